#include <array>
#include <cmath>
#include <complex>

#include "cbr/errors.hpp"
#include "cbr/lineshapes.hpp"

namespace cbr::lineshapes {

namespace {

constexpr double kPi = PhysicalConstants::pi;
const double kSqrtPi = std::sqrt(kPi);

// Weideman's rational approximation with N = 32 terms, valid in the closed
// upper half plane. Coefficients come from a cosine sum over the mapped
// Gaussian, evaluated once.
constexpr int kTerms = 32;

struct WeidemanTable {
    double L;
    std::array<double, kTerms> a;  // p(Z) = sum a[n] Z^n

    WeidemanTable() {
        const int M = 2 * kTerms;
        L = std::sqrt(kTerms / std::sqrt(2.0));
        std::array<double, 2 * 2 * kTerms> f{};
        for (int k = -M + 1; k <= M - 1; ++k) {
            const double theta = k * kPi / M;
            const double t = L * std::tan(theta / 2.0);
            f[static_cast<std::size_t>(k + M)] = std::exp(-t * t) * (L * L + t * t);
        }
        for (int n = 1; n <= kTerms; ++n) {
            double s = 0.0;
            for (int k = -M + 1; k <= M - 1; ++k)
                s += f[static_cast<std::size_t>(k + M)] * std::cos(kPi * n * k / M);
            a[static_cast<std::size_t>(n - 1)] = s / (2.0 * M);
        }
    }
};

const WeidemanTable& weideman() {
    static const WeidemanTable table;
    return table;
}

std::complex<double> faddeeva_rational(std::complex<double> z) {
    const auto& tab = weideman();
    const std::complex<double> iz(-z.imag(), z.real());
    const std::complex<double> denom = tab.L - iz;
    const std::complex<double> Z = (tab.L + iz) / denom;
    std::complex<double> p = 0.0;
    for (int n = kTerms - 1; n >= 0; --n) p = p * Z + tab.a[static_cast<std::size_t>(n)];
    return 2.0 * p / (denom * denom) + (1.0 / kSqrtPi) / denom;
}

// Laplace continued fraction, accurate for large |z| in the upper half plane.
std::complex<double> faddeeva_asymptotic(std::complex<double> z) {
    std::complex<double> f = z;
    for (int n = 40; n >= 1; --n) f = z - (0.5 * n) / f;
    return std::complex<double>(0.0, 1.0) / (kSqrtPi * f);
}

}  // namespace

void FanoParams::validate() const {
    if (!(width_ev > 0.0) || !std::isfinite(width_ev)) throw DomainError("Fano linewidth must be positive");
    if (!std::isfinite(amplitude) || !std::isfinite(baseline) || !std::isfinite(q) || !std::isfinite(center_ev))
        throw DomainError("Fano parameters must be finite");
}

FanoParams FanoParams::from_array(std::span<const double> p) {
    return FanoParams{p[0], p[1], p[2], p[3], p[4]};
}

double fano_value(double energy_ev, const FanoParams& p) {
    const double w = 2.0 * (energy_ev - p.center_ev) / p.width_ev;
    const double s = p.q + w;
    return p.baseline + p.amplitude * s * s / (1.0 + w * w);
}

std::array<double, 5> fano_gradient(double energy_ev, const FanoParams& p) {
    const double w = 2.0 * (energy_ev - p.center_ev) / p.width_ev;
    const double s = p.q + w;
    const double d = 1.0 + w * w;
    const double dI_dw = 2.0 * p.amplitude * s * (1.0 - p.q * w) / (d * d);
    return {s * s / d, 1.0, 2.0 * p.amplitude * s / d, dI_dw * (-2.0 / p.width_ev), dI_dw * (-w / p.width_ev)};
}

double lorentzian_density(double x, double half_width) {
    return half_width / (kPi * (x * x + half_width * half_width));
}

double gaussian_density(double x, double sigma) {
    return std::exp(-0.5 * (x / sigma) * (x / sigma)) / (sigma * std::sqrt(2.0 * kPi));
}

void VoigtParams::validate() const {
    if (!(sigma >= 0.0) || !(gamma >= 0.0)) throw DomainError("Voigt widths must be non-negative");
    if (sigma == 0.0 && gamma == 0.0) throw DomainError("Voigt widths cannot both be zero");
    if (!std::isfinite(sigma) || !std::isfinite(gamma)) throw DomainError("Voigt widths must be finite");
}

std::complex<double> faddeeva(std::complex<double> z) {
    if (z.imag() < 0.0) throw DomainError("faddeeva evaluated only in the upper half plane");
    if (std::abs(z) > 8.0) return faddeeva_asymptotic(z);
    return faddeeva_rational(z);
}

double voigt_value(double energy_ev, double center_ev, const VoigtParams& p) {
    p.validate();
    const double x = energy_ev - center_ev;
    if (p.gamma == 0.0) return gaussian_density(x, p.sigma);
    if (p.sigma == 0.0) return lorentzian_density(x, p.gamma);
    const double scale = p.sigma * std::sqrt(2.0);
    const std::complex<double> z(x / scale, p.gamma / scale);
    return faddeeva(z).real() / (p.sigma * std::sqrt(2.0 * kPi));
}

double gaussian_fwhm_from_sigma(double sigma) { return 2.0 * sigma * std::sqrt(2.0 * std::log(2.0)); }

double lorentzian_fwhm_from_gamma(double gamma) { return 2.0 * gamma; }

double voigt_fwhm(double f_gaussian, double f_lorentzian) {
    if (!(f_gaussian >= 0.0) || !(f_lorentzian >= 0.0)) throw DomainError("FWHM values must be non-negative");
    if (f_gaussian == 0.0 && f_lorentzian == 0.0) throw DomainError("both FWHM values are zero");
    return 0.5346 * f_lorentzian + std::sqrt(0.2166 * f_lorentzian * f_lorentzian + f_gaussian * f_gaussian);
}

double quality_factor(double center, double width) {
    if (!(width > 0.0)) throw DomainError("linewidth must be positive", std::to_string(width));
    return center / width;
}

}  // namespace cbr::lineshapes
