#include "cbr/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "cbr/constants.hpp"
#include "cbr/csv.hpp"
#include "cbr/errors.hpp"
#include "cbr/lineshapes.hpp"

namespace cbr::coherence {

namespace {

constexpr double kHbarEvPs = PhysicalConstants::hbar_ev_s * 1e12;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct CosineFit {
    double a = 0, b = 0, c = 0;
    double chi2 = 0;
};

// Plain linear least squares of a + b cos(kx) + c sin(kx); used for the
// free-period search only.
CosineFit linear_cosine(const FringeScan& s, double k) {
    const Eigen::Index n = static_cast<Eigen::Index>(s.positions_nm.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = s.positions_nm[static_cast<std::size_t>(i)];
        A(i, 0) = 1.0;
        A(i, 1) = std::cos(k * x);
        A(i, 2) = std::sin(k * x);
        y(i) = s.intensities[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd p = A.colPivHouseholderQr().solve(y);
    return {p(0), p(1), p(2), (A * p - y).squaredNorm()};
}

double fringe_model(std::span<const double> p, double x, double k) {
    return p[0] + p[1] * std::cos(k * x) + p[2] * std::sin(k * x);
}

}  // namespace

void FringeScan::validate() const {
    if (positions_nm.size() != intensities.size()) throw ShapeError("positions and intensities differ in length");
    if (positions_nm.size() < 8) throw ValidationError("a fringe scan needs at least 8 samples");
    for (std::size_t i = 0; i < intensities.size(); ++i) {
        if (!std::isfinite(intensities[i]) || intensities[i] < 0.0)
            throw ValidationError("intensities must be finite and non-negative", "sample " + std::to_string(i));
        if (!std::isfinite(positions_nm[i])) throw ValidationError("non-finite piezo position");
        if (i > 0 && !(positions_nm[i] > positions_nm[i - 1]))
            throw ValidationError("piezo positions must increase", "sample " + std::to_string(i));
    }
}

Visibility fringe_visibility(const FringeScan& scan, double wavelength_nm) {
    scan.validate();
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm)) throw DomainError("wavelength must be positive");
    const double period = 0.5 * wavelength_nm;
    const std::size_t n = scan.positions_nm.size();
    const double span = scan.positions_nm.back() - scan.positions_nm.front();
    const double covered = span * static_cast<double>(n) / static_cast<double>(n - 1);
    if (covered < period * (1.0 - 1e-9))
        throw DataError("scan covers less than one fringe period",
                        "covered " + std::to_string(covered) + " nm, period " + std::to_string(period) + " nm");
    if (span > 2.0 * period * (1.0 + 1e-9))
        throw DataError("scan is longer than two fringe periods",
                        "span " + std::to_string(span) + " nm, period " + std::to_string(period) + " nm");

    const double k = 4.0 * PhysicalConstants::pi / wavelength_nm;
    fit::FitData data{scan.positions_nm, scan.intensities, {}};
    const fit::FitModel model = fit::make_curve_model(
        3, [k](std::span<const double> p, double x) { return fringe_model(p, x, k); }, {"a", "b", "c"});
    const double mean = std::accumulate(scan.intensities.begin(), scan.intensities.end(), 0.0) / static_cast<double>(n);
    const fit::FitResult res = fit::least_squares_fit(model, data, {mean, 0.0, 0.0});
    const double a = res.params[0], b = res.params[1], c = res.params[2];
    if (!(a > 0.0)) throw DataError("mean fringe intensity is not positive", "I0=" + std::to_string(a));

    const double r = std::hypot(b, c);
    Visibility v;
    v.value = std::clamp(r / a, 0.0, 1.0);
    const Eigen::MatrixXd C = res.covariance * res.reduced_chi2;
    Eigen::Vector3d g;
    if (r > 0.0) {
        g << -r / (a * a), b / (a * r), c / (a * r);
        v.uncertainty = std::sqrt(std::max(0.0, g.dot(C * g)));
    } else {
        v.uncertainty = std::sqrt(std::max(0.0, 0.5 * (C(1, 1) + C(2, 2)))) / a;
    }

    // free-period check, only meaningful for resolved fringes
    if (v.value > 1e-3 && v.value > 3.0 * v.uncertainty) {
        double best_k = k, best_chi2 = kInf;
        for (int i = 0; i <= 300; ++i) {
            const double kk = k * (0.5 + 1.5 * i / 300.0);
            const CosineFit f = linear_cosine(scan, kk);
            if (f.chi2 < best_chi2) best_chi2 = f.chi2, best_k = kk;
        }
        const CosineFit start = linear_cosine(scan, best_k);
        const fit::FitModel free_model = fit::make_curve_model(
            4, [](std::span<const double> p, double x) { return fringe_model(p, x, p[3]); }, {"a", "b", "c", "k"});
        double k_fit = best_k;
        try {
            const auto fr = fit::least_squares_fit(free_model, data, {start.a, start.b, start.c, best_k});
            if (fr.converged) k_fit = fr.params[3];
        } catch (const RankDeficientError&) {
        }
        if (std::abs(k_fit - k) > 0.2 * k)
            throw ModelError("fringe period disagrees with the wavelength",
                             "fitted period " + std::to_string(2.0 * PhysicalConstants::pi / k_fit) + " nm vs " +
                                 std::to_string(period) + " nm");
    }
    return v;
}

void VisibilityTrace::validate() const {
    if (delays_ps.size() != visibilities.size() || delays_ps.size() != uncertainties.size())
        throw ShapeError("trace columns differ in length");
    for (std::size_t i = 0; i < delays_ps.size(); ++i) {
        if (!std::isfinite(delays_ps[i])) throw ValidationError("non-finite delay", "row " + std::to_string(i));
        if (!(visibilities[i] >= 0.0 && visibilities[i] <= 1.0))
            throw ValidationError("visibility outside [0, 1]", "row " + std::to_string(i));
        if (!(uncertainties[i] >= 0.0) || !std::isfinite(uncertainties[i]))
            throw ValidationError("visibility uncertainty must be finite and non-negative", "row " + std::to_string(i));
    }
}

VisibilityTrace trace_from_scans(const std::vector<FringeScan>& scans, double wavelength_nm) {
    VisibilityTrace t;
    for (const auto& s : scans) {
        const Visibility v = fringe_visibility(s, wavelength_nm);
        t.delays_ps.push_back(s.stage_delay_ps);
        t.visibilities.push_back(v.value);
        t.uncertainties.push_back(v.uncertainty);
    }
    return t;
}

double visibility_model(double t, double t_g, double t_l) {
    if (!(t_g > 0.0) || !(t_l > 0.0)) throw DomainError("coherence times must be positive");
    const double g = std::isinf(t_g) ? 0.0 : t * t / (2.0 * t_g * t_g);
    const double l = std::isinf(t_l) ? 0.0 : std::abs(t) / t_l;
    return std::exp(-g - l);
}

CoherenceResult CoherenceResult::from_times(double t_g, double t_l) {
    if (!(t_g > 0.0) || !(t_l > 0.0)) throw DomainError("coherence times must be positive");
    CoherenceResult r;
    r.t_g_ps = t_g;
    r.t_l_ps = t_l;
    r.sigma_ev = kHbarEvPs / t_g;
    r.gamma_ev = kHbarEvPs / t_l;
    r.f_g_ev = 2.0 * r.sigma_ev * std::sqrt(2.0 * std::log(2.0));
    r.f_l_ev = 2.0 * r.gamma_ev;
    r.f_v_ev = lineshapes::voigt_fwhm(r.f_g_ev, r.f_l_ev);
    r.fourier_ratio = std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::pair<double, double> CoherenceResult::times() const {
    return {kHbarEvPs / sigma_ev, kHbarEvPs / gamma_ev};
}

CoherenceFit fit_coherence(const VisibilityTrace& trace, std::optional<double> lifetime_ps) {
    trace.validate();
    const std::size_t n = trace.delays_ps.size();
    if (n < 6) throw DataError("coherence fit needs at least 6 delay points", std::to_string(n) + " given");
    const auto [vmin, vmax] = std::minmax_element(trace.visibilities.begin(), trace.visibilities.end());
    if (*vmin > 0.95 || *vmax < 0.05 || *vmax - *vmin < 0.05)
        throw FitError("visibility trace is degenerate", "visibility range [" + std::to_string(*vmin) + ", " +
                                                             std::to_string(*vmax) + "]");
    double tmax = 0.0, tmin = kInf;
    for (double t : trace.delays_ps) tmax = std::max(tmax, std::abs(t)), tmin = std::min(tmin, std::abs(t));
    if (tmin > 0.2 * tmax) throw DataError("trace lacks a point near zero delay");
    if (*vmin >= 0.3) throw DataError("trace never decays below a visibility of 0.3");

    // init: weighted regression of -ln(nu) = a t^2 + b |t| through the origin
    double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = trace.visibilities[i];
        if (v < 0.02 || v > 0.999) continue;
        const double w = v * v, t = std::abs(trace.delays_ps[i]), y = -std::log(v);
        s11 += w * t * t * t * t;
        s12 += w * t * t * t;
        s22 += w * t * t;
        r1 += w * t * t * y;
        r2 += w * t * y;
    }
    double a0 = 0.0, b0 = 0.0;
    const double det = s11 * s22 - s12 * s12;
    if (det > 0.0) {
        a0 = (r1 * s22 - r2 * s12) / det;
        b0 = (s11 * r2 - s12 * r1) / det;
    }
    if (!(a0 > 0.0) || !(b0 > 0.0)) {
        // one factor dominates; seed both from single-factor fits
        a0 = s11 > 0.0 ? std::max(r1 / s11, 0.0) : 0.0;
        b0 = s22 > 0.0 ? std::max(r2 / s22, 0.0) : 0.0;
        a0 *= 0.5;
        b0 *= 0.5;
    }
    if (!(a0 > 0.0) && !(b0 > 0.0)) b0 = 1.0 / tmax;

    fit::FitData data{trace.delays_ps, trace.visibilities, {}};
    bool all_err = true;
    for (double e : trace.uncertainties) all_err = all_err && e > 0.0;
    if (all_err)
        for (double e : trace.uncertainties) data.weights.push_back(1.0 / (e * e));

    fit::FitModel model;
    model.n_params = 2;
    model.names = {"a", "b"};
    model.residual = [](std::span<const double> p, const fit::FitData& d, std::span<double> r) {
        for (std::size_t i = 0; i < d.size(); ++i)
            r[i] = std::exp(-p[0] * d.x[i] * d.x[i] - p[1] * std::abs(d.x[i])) - d.y[i];
    };
    model.jacobian = [](std::span<const double> p, const fit::FitData& d, Eigen::MatrixXd& J) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double t = d.x[i];
            const double v = std::exp(-p[0] * t * t - p[1] * std::abs(t));
            J(static_cast<Eigen::Index>(i), 0) = -t * t * v;
            J(static_cast<Eigen::Index>(i), 1) = -std::abs(t) * v;
        }
    };
    model.bounds = {fit::Bound{0.0, kInf}, fit::Bound{0.0, kInf}};

    fit::FitOptions opt;
    opt.param_tolerance = 1e-13;
    opt.cost_tolerance = 1e-15;
    fit::FitResult res;
    try {
        res = fit::least_squares_fit(model, data, {a0, b0}, opt);
    } catch (const RankDeficientError& e) {
        throw FitError(std::string("coherence fit failed: ") + e.what());
    }
    if (!res.converged) throw FitError("coherence fit did not converge", "iterations=" + std::to_string(res.iterations));
    const auto err = fit::parameter_uncertainties(res);
    const double a = res.params[0], b = res.params[1];
    if (!(a > 0.0) && !(b > 0.0)) throw FitError("fit found no decay");

    CoherenceFit out;
    const double t_g = a > 0.0 ? 1.0 / std::sqrt(2.0 * a) : kInf;
    const double t_l = b > 0.0 ? 1.0 / b : kInf;
    out.result = CoherenceResult::from_times(t_g, t_l);
    CoherenceResult& r = out.result;
    // d t_G / d a = -(2a)^(-3/2), d sigma / d a = hbar / sqrt(2a)
    r.t_g_err_ps = a > 0.0 ? err[0] * std::pow(2.0 * a, -1.5) : kInf;
    r.t_l_err_ps = b > 0.0 ? err[1] / (b * b) : kInf;
    r.f_g_err_ev = a > 0.0 ? 2.0 * std::sqrt(2.0 * std::log(2.0)) * kHbarEvPs * err[0] / std::sqrt(2.0 * a) : kInf;
    r.f_l_err_ev = 2.0 * kHbarEvPs * err[1];
    if (lifetime_ps) r.fourier_ratio = fourier_limit_ratio(r.f_v_ev, *lifetime_ps);
    out.fit = std::move(res);
    return out;
}

double natural_linewidth_ev(double tau_ps) {
    if (!(tau_ps > 0.0) || !std::isfinite(tau_ps)) throw DomainError("lifetime must be positive", std::to_string(tau_ps));
    return kHbarEvPs / tau_ps;
}

double fourier_limit_ratio(double f_v_ev, double tau_ps) {
    if (!(f_v_ev > 0.0) || !std::isfinite(f_v_ev)) throw DomainError("linewidth must be positive", std::to_string(f_v_ev));
    return f_v_ev / natural_linewidth_ev(tau_ps);
}

double stage_delay_ps(double displacement_nm) {
    return 2.0 * displacement_nm * 1e-9 / PhysicalConstants::c_m_s * 1e12;
}

nlohmann::json coherence_report(const CoherenceFit& f) {
    const CoherenceResult& r = f.result;
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"t_G_ps", num(r.t_g_ps)},
            {"t_L_ps", num(r.t_l_ps)},
            {"sigma_eV", r.sigma_ev},
            {"gamma_eV", r.gamma_ev},
            {"f_G_eV", r.f_g_ev},
            {"f_L_eV", r.f_l_ev},
            {"f_V_eV", r.f_v_ev},
            {"fourier_ratio", num(r.fourier_ratio)},
            {"t_G_err_ps", num(r.t_g_err_ps)},
            {"t_L_err_ps", num(r.t_l_err_ps)},
            {"f_G_err_eV", num(r.f_g_err_ev)},
            {"f_L_err_eV", num(r.f_l_err_ev)},
            {"reduced_chi2", f.fit.reduced_chi2}};
}

FringeScan synthesize_fringe_scan(double visibility, double wavelength_nm, double mean_intensity,
                                  std::size_t n_samples, double step_nm, double phase, double stage_delay,
                                  std::mt19937_64& rng, bool poisson) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) throw DomainError("visibility outside [0, 1]");
    if (!(wavelength_nm > 0.0) || !(step_nm > 0.0) || !(mean_intensity > 0.0))
        throw DomainError("wavelength, step and intensity must be positive");
    FringeScan s;
    s.stage_delay_ps = stage_delay;
    const double k = 4.0 * PhysicalConstants::pi / wavelength_nm;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double x = step_nm * static_cast<double>(i);
        double v = mean_intensity * (1.0 + visibility * std::cos(k * x + phase));
        if (poisson) {
            std::poisson_distribution<long long> d(std::max(v, 0.0));
            v = v > 0.0 ? static_cast<double>(d(rng)) : 0.0;
        }
        s.positions_nm.push_back(x);
        s.intensities.push_back(std::max(v, 0.0));
    }
    return s;
}

VisibilityTrace synthesize_visibility_trace(double t_g, double t_l, const std::vector<double>& delays, double noise,
                                            std::mt19937_64& rng, bool relative_noise) {
    if (!(noise >= 0.0)) throw DomainError("noise must be non-negative");
    std::normal_distribution<double> gauss(0.0, 1.0);
    VisibilityTrace tr;
    for (double t : delays) {
        const double v0 = visibility_model(t, t_g, t_l);
        const double sd = relative_noise ? noise * v0 : noise;
        double v = v0;
        if (sd > 0.0) v += sd * gauss(rng);
        tr.delays_ps.push_back(t);
        tr.visibilities.push_back(std::clamp(v, 0.0, 1.0));
        tr.uncertainties.push_back(sd);
    }
    return tr;
}

FringeScan load_fringe_scan(const std::string& path) {
    const io::CsvTable t = io::read_csv_file(path);
    FringeScan s;
    s.stage_delay_ps = t.meta_number("stage_delay_ps").value_or(0.0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        s.positions_nm.push_back(t.number(r, 0));
        s.intensities.push_back(t.number(r, 1));
    }
    s.validate();
    return s;
}

void write_fringe_scan(std::ostream& out, const FringeScan& s) {
    out << "# stage_delay_ps=" << io::format_double(s.stage_delay_ps) << "\n";
    out << "position_nm,intensity\n";
    for (std::size_t i = 0; i < s.positions_nm.size(); ++i)
        out << io::format_double(s.positions_nm[i]) << "," << io::format_double(s.intensities[i]) << "\n";
}

VisibilityTrace load_visibility_trace(const std::string& path) {
    const io::CsvTable t = io::read_csv_file(path);
    VisibilityTrace tr;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        tr.delays_ps.push_back(t.number(r, 0));
        tr.visibilities.push_back(t.number(r, 1));
        tr.uncertainties.push_back(t.header.size() > 2 ? t.number(r, 2) : 0.0);
    }
    tr.validate();
    return tr;
}

void write_visibility_trace(std::ostream& out, const VisibilityTrace& tr) {
    out << "delay_ps,visibility,err\n";
    for (std::size_t i = 0; i < tr.delays_ps.size(); ++i)
        out << io::format_double(tr.delays_ps[i]) << "," << io::format_double(tr.visibilities[i]) << ","
            << io::format_double(tr.uncertainties[i]) << "\n";
}

}  // namespace cbr::coherence
