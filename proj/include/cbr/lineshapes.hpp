#pragma once

#include <array>
#include <complex>
#include <optional>
#include <utility>

#include "json.hpp"

#include "cbr/fit.hpp"
#include "cbr/spectra.hpp"

namespace cbr::lineshapes {

// I(E) = B + A (q + W)^2 / (1 + W^2), W = 2 (E - E_c) / Gamma_c.
// B is the dip floor for q = 0 and B + A the far-off-resonance level.
struct FanoParams {
    double amplitude = 1.0;   // A
    double baseline = 0.0;    // B
    double q = 0.0;           // asymmetry
    double center_ev = 1.55;  // E_c
    double width_ev = 0.01;   // Gamma_c, FWHM

    void validate() const;
    std::array<double, 5> as_array() const { return {amplitude, baseline, q, center_ev, width_ev}; }
    static FanoParams from_array(std::span<const double> p);
};

double fano_value(double energy_ev, const FanoParams& p);
// d I / d (A, B, q, E_c, Gamma_c)
std::array<double, 5> fano_gradient(double energy_ev, const FanoParams& p);

// Unit-area profiles.
double lorentzian_density(double x, double half_width);
double gaussian_density(double x, double sigma);

struct VoigtParams {
    double sigma = 0.0;  // Gaussian standard deviation (eV)
    double gamma = 0.0;  // Lorentzian half width (eV)
    void validate() const;
};

// Faddeeva function w(z) = exp(-z^2) erfc(-i z) for Im z >= 0.
std::complex<double> faddeeva(std::complex<double> z);

double voigt_value(double energy_ev, double center_ev, const VoigtParams& p);

double gaussian_fwhm_from_sigma(double sigma);
double lorentzian_fwhm_from_gamma(double gamma);
// f_V ~ 0.5346 f_L + sqrt(0.2166 f_L^2 + f_G^2)
double voigt_fwhm(double f_gaussian, double f_lorentzian);

double quality_factor(double center, double width);

struct EnergyWindow {
    double lo = 0.0;
    double hi = 0.0;
};

struct FanoFit {
    FanoParams params;
    fit::FitResult fit;
    std::vector<double> uncertainties;  // same order as FanoParams::as_array
    EnergyWindow window;
    double quality() const { return quality_factor(params.center_ev, params.width_ev); }
};

struct FanoInitialGuess {
    FanoParams params;
    EnergyWindow window;
};

// Initial guess: E_c at the intensity minimum, Gamma_c from the dip width at
// half depth, q = 0, B at the floor and A from the window edge level. Without
// an explicit window the fit covers +-5 Gamma_c around the minimum.
FanoInitialGuess fano_initial_guess(const spectra::Spectrum& energy_spectrum,
                                    std::optional<EnergyWindow> window);

// Fits on the energy axis; wavelength spectra are converted first.
FanoFit fit_fano(const spectra::Spectrum& spectrum, std::optional<EnergyWindow> window = std::nullopt);

nlohmann::json fano_report(const FanoFit& f);

}  // namespace cbr::lineshapes
