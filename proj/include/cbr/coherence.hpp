#pragma once

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cbr/fit.hpp"

namespace cbr::coherence {

// Intensity at the interferometer output versus piezo mirror position, taken
// at one coarse stage delay.
struct FringeScan {
    std::vector<double> positions_nm;
    std::vector<double> intensities;
    double stage_delay_ps = 0.0;

    void validate() const;
};

struct Visibility {
    double value = 0.0;
    double uncertainty = 0.0;
};

// Cosine fit I = a + b cos(kx) + c sin(kx), k = 4 pi / lambda, with
// nu = sqrt(b^2 + c^2) / a clamped to [0, 1]. A free-period search guards
// against a wrong wavelength.
Visibility fringe_visibility(const FringeScan& scan, double wavelength_nm);

struct VisibilityTrace {
    std::vector<double> delays_ps;
    std::vector<double> visibilities;
    std::vector<double> uncertainties;

    void validate() const;
};

VisibilityTrace trace_from_scans(const std::vector<FringeScan>& scans, double wavelength_nm);

// exp(-t^2 / (2 t_G^2)) exp(-|t| / t_L); an infinite time drops its factor.
double visibility_model(double t_ps, double t_g_ps, double t_l_ps);

struct CoherenceResult {
    double t_g_ps = 0.0;
    double t_l_ps = 0.0;
    double sigma_ev = 0.0;
    double gamma_ev = 0.0;
    double f_g_ev = 0.0;
    double f_l_ev = 0.0;
    double f_v_ev = 0.0;
    double fourier_ratio = 0.0;  // NaN without a lifetime
    // 1-sigma errors propagated from the fit
    double t_g_err_ps = 0.0;
    double t_l_err_ps = 0.0;
    double f_g_err_ev = 0.0;
    double f_l_err_ev = 0.0;

    // sigma = hbar / t_G, gamma = hbar / t_L
    static CoherenceResult from_times(double t_g_ps, double t_l_ps);
    std::pair<double, double> times() const;  // back from sigma and gamma
};

struct CoherenceFit {
    CoherenceResult result;
    fit::FitResult fit;  // params: a = 1/(2 t_G^2) [ps^-2], b = 1/t_L [ps^-1]
};

CoherenceFit fit_coherence(const VisibilityTrace& trace, std::optional<double> lifetime_ps = std::nullopt);

// f_V / (hbar / tau)
double fourier_limit_ratio(double f_v_ev, double tau_ps);
double natural_linewidth_ev(double tau_ps);

// Double-pass delay of a retroreflector displaced by dx.
double stage_delay_ps(double displacement_nm);

nlohmann::json coherence_report(const CoherenceFit& f);

FringeScan synthesize_fringe_scan(double visibility, double wavelength_nm, double mean_intensity,
                                  std::size_t n_samples, double step_nm, double phase, double stage_delay_ps,
                                  std::mt19937_64& rng, bool poisson = true);
// Gaussian noise of standard deviation noise * nu (relative) or noise
// (absolute); the stated uncertainty is that standard deviation.
VisibilityTrace synthesize_visibility_trace(double t_g_ps, double t_l_ps, const std::vector<double>& delays_ps,
                                            double noise, std::mt19937_64& rng, bool relative_noise = true);

FringeScan load_fringe_scan(const std::string& path);
void write_fringe_scan(std::ostream& out, const FringeScan& scan);
VisibilityTrace load_visibility_trace(const std::string& path);
void write_visibility_trace(std::ostream& out, const VisibilityTrace& trace);

}  // namespace cbr::coherence
