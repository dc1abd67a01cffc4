#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cbr/fit.hpp"

namespace cbr::decay {

// Uniformly binned arrival-time histogram. Counts are normally integers; the
// container also accepts non-negative expected values so noiseless model
// curves can be fed through the same code.
class DecayHistogram {
public:
    DecayHistogram(std::vector<double> bin_centers_ps, std::vector<double> counts);
    static DecayHistogram uniform(double first_center_ps, double bin_width_ps, std::vector<double> counts);

    const std::vector<double>& bin_centers() const noexcept { return centers_; }
    const std::vector<double>& counts() const noexcept { return counts_; }
    double bin_width() const noexcept { return width_; }
    std::size_t size() const noexcept { return counts_.size(); }
    double total() const;
    DecayHistogram shifted(double dt_ps) const;

private:
    std::vector<double> centers_;
    std::vector<double> counts_;
    double width_ = 0.0;
};

// Instrument response normalized to unit sum. Times are kept relative to the
// response centroid so a model time offset t0 places the decay onset at the
// centre of gravity of the IRF.
class Irf {
public:
    explicit Irf(const DecayHistogram& measured);
    static Irf delta(double bin_width_ps);
    static Irf gaussian(double bin_width_ps, double fwhm_ps, double support_sigmas = 8.0);

    const std::vector<double>& weights() const noexcept { return weights_; }
    std::vector<double> offsets() const;  // ps, relative to centroid
    double first_offset() const noexcept { return first_offset_; }
    double bin_width() const noexcept { return width_; }
    double fwhm_estimate() const;

private:
    Irf() = default;
    std::vector<double> weights_;
    double first_offset_ = 0.0;
    double width_ = 0.0;
};

enum class DecayKind { single_exp, bi_exp };

std::string to_string(DecayKind kind);
DecayKind decay_kind_from_string(const std::string& s);

// single: A exp(-(t - t0)/tau)
// bi:     B exp(-(t - t0)/tau_X) + C exp(-(t - t0)/tau_XX)
// Amplitudes are rates in counts per ps at t0; background is counts per bin.
struct DecayModel {
    DecayKind kind = DecayKind::single_exp;
    double amp1 = 0.0;  // A or B
    double tau1 = 1.0;  // tau or tau_X
    double amp2 = 0.0;  // C (bi only)
    double tau2 = 1.0;  // tau_XX (bi only)
    double t0 = 0.0;
    double background = 0.0;

    void validate() const;
    std::size_t n_params() const { return kind == DecayKind::single_exp ? 4 : 6; }
    std::vector<double> as_params() const;
    static DecayModel from_params(DecayKind kind, std::span<const double> p);
    std::vector<std::string> param_names() const;
    double area() const;  // integral of the decay without background
};

// Expected counts per bin: bin-integrated model convolved with the IRF, plus
// background. Grid bin width must equal the IRF bin width. Each response
// sample acts as a point mass; oversample = 0 picks x4 sub-sampling (linear
// interpolation of the response) when a lifetime is shorter than 3 bins,
// 1 disables it.
std::vector<double> convolve_model_with_irf(const DecayModel& model, const Irf& irf,
                                            const std::vector<double>& bin_centers_ps, int oversample = 0);

struct LifetimeFit {
    DecayModel model;
    fit::FitResult fit;
    std::vector<double> uncertainties;  // same order as DecayModel::as_params
    double tau_error(int which) const;
};

struct LifetimeOptions {
    // Passes re-weighting by the fitted expectation after the 1/max(count, 1)
    // fit; 0 keeps the plain count-weighted result.
    int poisson_refine_passes = 10;
};

// Initial guess: background from bins more than 3 IRF widths before the peak,
// t0 at the half-height crossing of the rise, tau from a log-linear fit of
// the tail.
DecayModel lifetime_initial_guess(const DecayHistogram& hist, const Irf& irf, DecayKind kind);
LifetimeFit fit_lifetime(const DecayHistogram& hist, const Irf& irf, DecayKind kind,
                         const LifetimeOptions& options = {});

nlohmann::json lifetime_report(const LifetimeFit& f);

struct PurcellEstimate {
    double value = 0.0;
    double uncertainty = 0.0;
};

// F_P = tau_ref / tau_cav with relative errors added in quadrature.
PurcellEstimate purcell_factor(double tau_ref_ps, double tau_cav_ps, double tau_ref_err_ps = 0.0,
                               double tau_cav_err_ps = 0.0);

inline constexpr double kBulkLifetimeX_ps = 230.0;
inline constexpr double kBulkLifetimeXX_ps = 120.0;

struct PurcellPoint {
    double detuning_ev = 0.0;  // E_c - E_transition
    double fp = 0.0;
    double fp_err = 0.0;
};

// F(D) = baseline + peak * (w/2)^2 / ((D - center)^2 + (w/2)^2)
struct PurcellLorentzian {
    double center_ev = 0.0;
    double fwhm_ev = 0.0;
    double peak = 0.0;  // height above baseline
    double baseline = 0.0;
    fit::FitResult fit;
    std::vector<double> uncertainties;  // center, fwhm, peak, baseline
    double value(double detuning_ev) const;
};

PurcellLorentzian fit_purcell_vs_detuning(const std::vector<PurcellPoint>& points);

// Seeded Poisson realisation of the IRF-convolved model (expected total is
// model.area() plus background); poisson = false returns the expectation.
DecayHistogram synthesize_histogram(const DecayModel& model, const Irf& irf, double first_center_ps,
                                    std::size_t n_bins, std::mt19937_64& rng, bool poisson = true);

DecayHistogram load_decay_histogram(const std::string& path);
void write_decay_histogram(std::ostream& out, const DecayHistogram& h);

}  // namespace cbr::decay
