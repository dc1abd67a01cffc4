#include "cbr/decay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "cbr/csv.hpp"
#include "cbr/errors.hpp"

namespace cbr::decay {

namespace {

// Integral of exp(-(t - t0)/tau) over [a, b] for t >= t0, with derivatives
// with respect to tau and t0.
struct BinIntegral {
    double value = 0.0;
    double d_tau = 0.0;
    double d_t0 = 0.0;
};

BinIntegral bin_integral(double a, double b, double t0, double tau) {
    BinIntegral out;
    if (b <= t0) return out;
    const double ua = std::max(a - t0, 0.0);
    const double ub = b - t0;
    const double ea = std::exp(-ua / tau);
    const double eb = std::exp(-ub / tau);
    out.value = tau * ea * -std::expm1(-(ub - ua) / tau);
    out.d_tau = (ea - eb) + (ua * ea - ub * eb) / tau;
    out.d_t0 = (a > t0 ? ea : 0.0) - eb;
    return out;
}

// One sub-lattice of the response: point weights at offsets
// first_offset + k * dt + shift.
struct Component {
    double shift = 0.0;
    std::vector<double> w;
};

std::vector<Component> components_for(const Irf& irf, double min_tau, int oversample) {
    const double dt = irf.bin_width();
    const auto& w = irf.weights();
    if (oversample == 0) oversample = (w.size() > 1 && min_tau < 3.0 * dt) ? 4 : 1;
    if (oversample <= 1 || w.size() == 1) return {Component{0.0, w}};
    // sub-sample the response with Catmull-Rom interpolation between samples
    auto at = [&w](std::ptrdiff_t k) {
        return (k < 0 || k >= static_cast<std::ptrdiff_t>(w.size())) ? 0.0 : w[static_cast<std::size_t>(k)];
    };
    std::vector<Component> out;
    double total = 0.0;
    for (int j = 0; j < oversample; ++j) {
        const double frac = (j + 0.5) / oversample - 0.5;  // in units of dt
        Component c;
        c.shift = frac * dt;
        c.w.resize(w.size());
        for (std::size_t kk = 0; kk < w.size(); ++kk) {
            const auto k = static_cast<std::ptrdiff_t>(kk);
            const std::ptrdiff_t b = frac < 0.0 ? k - 1 : k;  // interval [b, b + 1]
            const double x = frac < 0.0 ? 1.0 + frac : frac;
            const double p0 = at(b - 1), p1 = at(b), p2 = at(b + 1), p3 = at(b + 2);
            const double v = 0.5 * (2.0 * p1 + (p2 - p0) * x + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * x * x +
                                    (3.0 * p1 - p0 - 3.0 * p2 + p3) * x * x * x);
            c.w[kk] = std::max(v, 0.0);
            total += c.w[kk];
        }
        out.push_back(std::move(c));
    }
    for (auto& c : out)
        for (double& v : c.w) v /= total;
    return out;
}

// acc[i] += sum_k w[k] * f[i - k + K - 1], f indexed from lag -(K-1).
void convolve_add(const std::vector<double>& w, const std::vector<double>& f, std::vector<double>& acc) {
    const std::size_t K = w.size();
    for (std::size_t i = 0; i < acc.size(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += w[k] * f[i + K - 1 - k];
        acc[i] += s;
    }
}

// Expected counts and, when J is given, d/dparams in DecayModel::as_params order.
// Grid and response share one lattice, so the bin integrals depend only on the
// lag i - k and are computed once per lag.
void evaluate(const DecayModel& m, const Irf& irf, const std::vector<double>& centers, std::vector<double>& out,
              Eigen::MatrixXd* J, int oversample = 0) {
    const double dt = irf.bin_width();
    const bool bi = m.kind == DecayKind::bi_exp;
    const std::size_t N = centers.size();
    const auto comps = components_for(irf, bi ? std::min(m.tau1, m.tau2) : m.tau1, oversample);
    const std::size_t K = irf.weights().size();
    const std::size_t L = N + K - 1;

    std::vector<double> v(N, 0.0);
    const std::size_t n_arr = J ? (bi ? 5 : 3) : 0;
    std::vector<std::vector<double>> g(n_arr, std::vector<double>(N, 0.0));
    std::vector<double> f(L), f1(L), f2(L), f3(L), f4(L), f5(L);
    for (const auto& c : comps) {
        for (std::size_t l = 0; l < L; ++l) {
            const double lag = static_cast<double>(l) - static_cast<double>(K - 1);
            const double a = centers.front() + lag * dt - 0.5 * dt - irf.first_offset() - c.shift;
            const BinIntegral e1 = bin_integral(a, a + dt, m.t0, m.tau1);
            f[l] = m.amp1 * e1.value;
            if (J) {
                f1[l] = e1.value;
                f2[l] = m.amp1 * e1.d_tau;
                f3[l] = m.amp1 * e1.d_t0;
            }
            if (bi) {
                const BinIntegral e2 = bin_integral(a, a + dt, m.t0, m.tau2);
                f[l] += m.amp2 * e2.value;
                if (J) {
                    f4[l] = e2.value;
                    f5[l] = m.amp2 * e2.d_tau;
                    f3[l] += m.amp2 * e2.d_t0;
                }
            }
        }
        convolve_add(c.w, f, v);
        if (J) {
            convolve_add(c.w, f1, g[0]);
            convolve_add(c.w, f2, g[1]);
            convolve_add(c.w, f3, g[2]);
            if (bi) {
                convolve_add(c.w, f4, g[3]);
                convolve_add(c.w, f5, g[4]);
            }
        }
    }
    out.resize(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = v[i] + m.background;
    if (J) {
        J->setZero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(m.n_params()));
        // column order: single (A, tau, t0, bg); bi (B, tau_X, C, tau_XX, t0, bg)
        const std::vector<std::size_t> col =
            bi ? std::vector<std::size_t>{0, 1, 4, 2, 3} : std::vector<std::size_t>{0, 1, 2};
        for (std::size_t a = 0; a < n_arr; ++a)
            for (std::size_t i = 0; i < N; ++i)
                (*J)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col[a])) = g[a][i];
        J->col(static_cast<Eigen::Index>(m.n_params() - 1)).setOnes();
    }
}

void check_uniform(const std::vector<double>& c, double width) {
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (std::abs((c[i] - c[i - 1]) - width) > 1e-6 * width)
            throw ValidationError("histogram bins are not uniform", "bin " + std::to_string(i));
    }
}

}  // namespace

DecayHistogram::DecayHistogram(std::vector<double> bin_centers_ps, std::vector<double> counts)
    : centers_(std::move(bin_centers_ps)), counts_(std::move(counts)) {
    if (centers_.size() != counts_.size()) throw ShapeError("bin centers and counts differ in length");
    if (centers_.size() < 2) throw ValidationError("histogram needs at least two bins");
    width_ = (centers_.back() - centers_.front()) / static_cast<double>(centers_.size() - 1);
    if (!(width_ > 0.0)) throw ValidationError("bin centers must increase");
    check_uniform(centers_, width_);
    for (std::size_t i = 0; i < counts_.size(); ++i)
        if (!std::isfinite(counts_[i]) || counts_[i] < 0.0)
            throw ValidationError("counts must be finite and non-negative", "bin " + std::to_string(i));
}

DecayHistogram DecayHistogram::uniform(double first_center_ps, double bin_width_ps, std::vector<double> counts) {
    if (!(bin_width_ps > 0.0)) throw DomainError("bin width must be positive");
    std::vector<double> c(counts.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = first_center_ps + bin_width_ps * static_cast<double>(i);
    return DecayHistogram(std::move(c), std::move(counts));
}

double DecayHistogram::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0.0); }

DecayHistogram DecayHistogram::shifted(double dt_ps) const {
    std::vector<double> c = centers_;
    for (double& x : c) x += dt_ps;
    return DecayHistogram(std::move(c), counts_);
}

Irf::Irf(const DecayHistogram& measured) : width_(measured.bin_width()) {
    const double total = measured.total();
    if (!(total > 0.0)) throw NormalizationError("instrument response has zero area");
    double centroid = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) centroid += measured.counts()[i] * measured.bin_centers()[i];
    centroid /= total;
    std::size_t lo = 0, hi = measured.size() - 1;
    while (measured.counts()[lo] == 0.0) ++lo;
    while (measured.counts()[hi] == 0.0) --hi;
    for (std::size_t i = lo; i <= hi; ++i) weights_.push_back(measured.counts()[i] / total);
    first_offset_ = measured.bin_centers()[lo] - centroid;
}

std::vector<double> Irf::offsets() const {
    std::vector<double> o(weights_.size());
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = first_offset_ + width_ * static_cast<double>(k);
    return o;
}

Irf Irf::delta(double bin_width_ps) {
    if (!(bin_width_ps > 0.0)) throw DomainError("bin width must be positive");
    Irf irf;
    irf.width_ = bin_width_ps;
    irf.weights_ = {1.0};
    irf.first_offset_ = 0.0;
    return irf;
}

Irf Irf::gaussian(double bin_width_ps, double fwhm_ps, double support_sigmas) {
    if (!(bin_width_ps > 0.0) || !(fwhm_ps > 0.0)) throw DomainError("IRF widths must be positive");
    const double sigma = fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const int half = static_cast<int>(std::ceil(support_sigmas * sigma / bin_width_ps));
    std::vector<double> counts;
    for (int i = -half; i <= half; ++i) {
        const double u = i * bin_width_ps / sigma;
        counts.push_back(std::exp(-0.5 * u * u));
    }
    return Irf(DecayHistogram::uniform(-half * bin_width_ps, bin_width_ps, std::move(counts)));
}

double Irf::fwhm_estimate() const {
    if (weights_.size() == 1) return width_;
    const double peak = *std::max_element(weights_.begin(), weights_.end());
    std::size_t lo = weights_.size(), hi = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (weights_[i] >= 0.5 * peak) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    return static_cast<double>(hi - lo + 1) * width_;
}

std::string to_string(DecayKind kind) { return kind == DecayKind::single_exp ? "single_exp" : "bi_exp"; }

DecayKind decay_kind_from_string(const std::string& s) {
    if (s == "single_exp" || s == "single") return DecayKind::single_exp;
    if (s == "bi_exp" || s == "bi") return DecayKind::bi_exp;
    throw ParameterError("unknown decay model '" + s + "'");
}

void DecayModel::validate() const {
    if (!(tau1 > 0.0) || (kind == DecayKind::bi_exp && !(tau2 > 0.0)))
        throw DomainError("lifetimes must be positive");
    if (!(amp1 >= 0.0) || (kind == DecayKind::bi_exp && !(amp2 >= 0.0)))
        throw DomainError("amplitudes must be non-negative");
    if (!std::isfinite(t0) || !std::isfinite(background)) throw DomainError("decay parameters must be finite");
}

std::vector<double> DecayModel::as_params() const {
    if (kind == DecayKind::single_exp) return {amp1, tau1, t0, background};
    return {amp1, tau1, amp2, tau2, t0, background};
}

DecayModel DecayModel::from_params(DecayKind kind, std::span<const double> p) {
    DecayModel m;
    m.kind = kind;
    if (kind == DecayKind::single_exp) {
        m.amp1 = p[0];
        m.tau1 = p[1];
        m.t0 = p[2];
        m.background = p[3];
    } else {
        m.amp1 = p[0];
        m.tau1 = p[1];
        m.amp2 = p[2];
        m.tau2 = p[3];
        m.t0 = p[4];
        m.background = p[5];
    }
    return m;
}

std::vector<std::string> DecayModel::param_names() const {
    if (kind == DecayKind::single_exp) return {"A", "tau", "t0", "background"};
    return {"B", "tau_X", "C", "tau_XX", "t0", "background"};
}

double DecayModel::area() const {
    return amp1 * tau1 + (kind == DecayKind::bi_exp ? amp2 * tau2 : 0.0);
}

std::vector<double> convolve_model_with_irf(const DecayModel& model, const Irf& irf,
                                            const std::vector<double>& centers, int oversample) {
    model.validate();
    if (centers.size() >= 2) {
        const double w = centers[1] - centers[0];
        if (std::abs(w - irf.bin_width()) > 1e-9 * irf.bin_width())
            throw ShapeError("grid and IRF bin widths differ",
                             std::to_string(w) + " vs " + std::to_string(irf.bin_width()));
        check_uniform(centers, w);
    }
    std::vector<double> out;
    evaluate(model, irf, centers, out, nullptr, oversample);
    return out;
}

double LifetimeFit::tau_error(int which) const {
    const std::size_t idx = which == 0 ? 1 : 3;
    return idx < uncertainties.size() ? uncertainties[idx] : 0.0;
}

DecayModel lifetime_initial_guess(const DecayHistogram& hist, const Irf& irf, DecayKind kind) {
    const auto& t = hist.bin_centers();
    const auto& c = hist.counts();
    const double dt = hist.bin_width();
    const std::size_t ipk = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    const double fwhm = irf.fwhm_estimate();

    double bg = 0.0;
    std::size_t n_pre = 0;
    for (std::size_t i = 0; i < c.size() && t[i] < t[ipk] - 3.0 * fwhm; ++i, ++n_pre) bg += c[i];
    bg = n_pre > 0 ? bg / static_cast<double>(n_pre) : 0.0;

    const double height = c[ipk] - bg;
    if (!(height > 0.0)) throw FitError("histogram has no peak above background");
    if (n_pre > 1 && bg > 0.0 && height / std::sqrt(bg) < 3.0) throw FitError("peak signal-to-noise below 3");

    // log-linear regression over the tail
    std::size_t start = ipk;
    while (start < c.size() && t[start] < t[ipk] + 1.5 * fwhm) ++start;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    const double floor = std::max(0.02 * height, 3.0);
    for (std::size_t i = start; i < c.size(); ++i) {
        const double y = c[i] - bg;
        if (y < floor) break;
        const double w = y;
        const double ly = std::log(y);
        sw += w;
        sx += w * t[i];
        sy += w * ly;
        sxx += w * t[i] * t[i];
        sxy += w * t[i] * ly;
        ++used;
    }
    double tau = 5.0 * dt;
    if (used >= 3) {
        const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
        if (slope < 0.0) tau = -1.0 / slope;
    }
    const double span = t.back() - t.front();
    tau = std::clamp(tau, 0.2 * dt, 0.5 * span);

    double area = 0.0;
    for (double v : c) area += std::max(v - bg, 0.0);

    // onset at the half-height crossing of the rising edge
    double t_on = t[ipk];
    for (std::size_t i = ipk; i > 0; --i) {
        const double y0 = c[i - 1] - bg, y1 = c[i] - bg;
        if (y0 < 0.5 * height) {
            t_on = t[i - 1] + (0.5 * height - y0) / (y1 - y0) * dt;
            break;
        }
    }

    DecayModel m;
    m.kind = kind;
    m.t0 = std::clamp(t_on, t.front(), t.back());
    m.background = bg;
    if (kind == DecayKind::single_exp) {
        m.tau1 = tau;
        m.amp1 = area / tau;
    } else {
        m.tau1 = tau;
        m.tau2 = 0.5 * tau;
        m.amp1 = 0.5 * area / m.tau1;
        m.amp2 = 0.5 * area / m.tau2;
    }
    return m;
}

LifetimeFit fit_lifetime(const DecayHistogram& hist, const Irf& irf, DecayKind kind,
                         const LifetimeOptions& options) {
    if (std::abs(hist.bin_width() - irf.bin_width()) > 1e-9 * irf.bin_width())
        throw ShapeError("histogram and IRF bin widths differ",
                         std::to_string(hist.bin_width()) + " vs " + std::to_string(irf.bin_width()));
    const DecayModel init = lifetime_initial_guess(hist, irf, kind);

    fit::FitData data;
    data.x = hist.bin_centers();
    data.y = hist.counts();
    data.weights.resize(data.y.size());
    for (std::size_t i = 0; i < data.y.size(); ++i) data.weights[i] = 1.0 / std::max(data.y[i], 1.0);

    const double dt = hist.bin_width();
    const double span = hist.bin_centers().back() - hist.bin_centers().front();
    const fit::Bound amp{0.0, std::numeric_limits<double>::infinity()};
    const fit::Bound tau{0.05 * dt, 20.0 * span};
    const fit::Bound t0{hist.bin_centers().front(), hist.bin_centers().back()};
    const fit::Bound bg{0.0, std::numeric_limits<double>::infinity()};

    fit::FitModel model;
    model.n_params = init.n_params();
    model.names = init.param_names();
    if (kind == DecayKind::single_exp)
        model.bounds = {amp, tau, t0, bg};
    else
        model.bounds = {amp, tau, amp, tau, t0, bg};
    model.residual = [&irf, kind](std::span<const double> p, const fit::FitData& d, std::span<double> r) {
        std::vector<double> e;
        evaluate(DecayModel::from_params(kind, p), irf, d.x, e, nullptr);
        for (std::size_t i = 0; i < e.size(); ++i) r[i] = e[i] - d.y[i];
    };
    model.jacobian = [&irf, kind](std::span<const double> p, const fit::FitData& d, Eigen::MatrixXd& J) {
        std::vector<double> e;
        evaluate(DecayModel::from_params(kind, p), irf, d.x, e, &J);
    };

    fit::FitResult res;
    try {
        res = fit::least_squares_fit(model, data, init.as_params());
        if (!res.converged)
            throw FitError("lifetime fit did not converge", "iterations=" + std::to_string(res.iterations));
        // Reweight with the fitted expectation; the fixed point of this
        // iteration is the Poisson maximum-likelihood estimate.
        for (int pass = 0; pass < options.poisson_refine_passes; ++pass) {
            std::vector<double> mu;
            evaluate(DecayModel::from_params(kind, res.params), irf, data.x, mu, nullptr);
            for (std::size_t i = 0; i < mu.size(); ++i) data.weights[i] = 1.0 / std::max(mu[i], 1e-3);
            const double before = res.params[1];
            res = fit::least_squares_fit(model, data, res.params);
            if (!res.converged)
                throw FitError("lifetime fit did not converge", "refinement pass " + std::to_string(pass + 1));
            if (std::abs(res.params[1] - before) <= 1e-9 * before) break;
        }
    } catch (const RankDeficientError& e) {
        throw FitError(std::string("lifetime fit failed: ") + e.what());
    }
    const std::vector<std::size_t> tau_idx =
        kind == DecayKind::single_exp ? std::vector<std::size_t>{1} : std::vector<std::size_t>{1, 3};
    for (std::size_t k : tau_idx)
        if (res.at_bound[k])
            throw FitError("lifetime ran into its bound", model.names[k] + "=" + std::to_string(res.params[k]));

    LifetimeFit out;
    out.model = DecayModel::from_params(kind, res.params);
    out.uncertainties = fit::parameter_uncertainties(res);
    out.fit = std::move(res);
    return out;
}

nlohmann::json lifetime_report(const LifetimeFit& f) {
    nlohmann::json j;
    j["kind"] = to_string(f.model.kind);
    if (f.model.kind == DecayKind::single_exp) {
        j["tau_ps"] = f.model.tau1;
        j["tau_err_ps"] = f.tau_error(0);
    } else {
        j["tau_ps"] = {f.model.tau1, f.model.tau2};
        j["tau_err_ps"] = {f.tau_error(0), f.tau_error(1)};
        j["tau_names"] = {"tau_X", "tau_XX"};
    }
    j["t0_ps"] = f.model.t0;
    j["background"] = f.model.background;
    j["reduced_chi2"] = f.fit.reduced_chi2;
    nlohmann::json params;
    const auto names = f.model.param_names();
    const auto values = f.model.as_params();
    for (std::size_t k = 0; k < names.size(); ++k) params[names[k]] = {values[k], f.uncertainties[k]};
    j["params"] = params;
    return j;
}

PurcellEstimate purcell_factor(double tau_ref, double tau_cav, double ref_err, double cav_err) {
    if (!(tau_ref > 0.0) || !(tau_cav > 0.0)) throw DomainError("lifetimes must be positive");
    if (!(ref_err >= 0.0) || !(cav_err >= 0.0)) throw DomainError("lifetime errors must be non-negative");
    PurcellEstimate p;
    p.value = tau_ref / tau_cav;
    p.uncertainty = p.value * std::hypot(ref_err / tau_ref, cav_err / tau_cav);
    return p;
}

double PurcellLorentzian::value(double d) const {
    const double h = 0.5 * fwhm_ev;
    return baseline + peak * h * h / ((d - center_ev) * (d - center_ev) + h * h);
}

PurcellLorentzian fit_purcell_vs_detuning(const std::vector<PurcellPoint>& points) {
    if (points.size() < 5) throw DataError("need at least 5 Purcell points", std::to_string(points.size()));
    fit::FitData data;
    for (const auto& p : points) {
        if (!(p.fp_err > 0.0)) throw DataError("Purcell uncertainties must be positive");
        data.x.push_back(p.detuning_ev);
        data.y.push_back(p.fp);
        data.weights.push_back(1.0 / (p.fp_err * p.fp_err));
    }
    const auto [xlo, xhi] = std::minmax_element(data.x.begin(), data.x.end());
    const double span = *xhi - *xlo;
    const auto [ylo, yhi] = std::minmax_element(data.y.begin(), data.y.end());
    if (!(span > 0.0) || !(*yhi > *ylo)) throw FitError("degenerate spread of Purcell points");

    // initial guess from the points that carry real weight
    const double wmax = *std::max_element(data.weights.begin(), data.weights.end());
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.x.size(); ++i)
        if (data.weights[i] >= 1e-6 * wmax) idx.push_back(i);
    std::size_t ipk = idx.front();
    double ymin = data.y[idx.front()];
    for (std::size_t i : idx) {
        if (data.y[i] > data.y[ipk]) ipk = i;
        ymin = std::min(ymin, data.y[i]);
    }
    const double base0 = std::max(ymin, 0.0);
    const double ymax = data.y[ipk];
    double half_lo = *xlo, half_hi = *xhi;
    const double half = base0 + 0.5 * (ymax - base0);
    for (std::size_t i : idx) {
        if (data.y[i] < half) {
            if (data.x[i] < data.x[ipk]) half_lo = std::max(half_lo, data.x[i]);
            if (data.x[i] > data.x[ipk]) half_hi = std::min(half_hi, data.x[i]);
        }
    }
    const double w0 = std::clamp(half_hi - half_lo, 0.05 * span, span);

    const fit::FitModel model = [&] {
        fit::FitModel m = fit::make_curve_model(
            4,
            [](std::span<const double> p, double x) {
                const double h = 0.5 * p[1];
                return p[3] + p[2] * h * h / ((x - p[0]) * (x - p[0]) + h * h);
            },
            {"center", "fwhm", "peak", "baseline"});
        m.bounds = {fit::Bound{*xlo - span, *xhi + span}, fit::Bound{1e-6 * span, 100.0 * span},
                    fit::Bound{0.0, std::numeric_limits<double>::infinity()},
                    fit::Bound{0.0, std::numeric_limits<double>::infinity()}};
        return m;
    }();
    fit::FitResult res;
    try {
        res = fit::least_squares_fit(model, data, {data.x[ipk], w0, std::max(ymax - base0, 1e-12), base0});
    } catch (const RankDeficientError& e) {
        throw FitError(std::string("Purcell Lorentzian fit failed: ") + e.what());
    }
    if (!res.converged) throw FitError("Purcell Lorentzian fit did not converge");
    PurcellLorentzian out;
    out.center_ev = res.params[0];
    out.fwhm_ev = res.params[1];
    out.peak = res.params[2];
    out.baseline = res.params[3];
    out.uncertainties = fit::parameter_uncertainties(res);
    out.fit = std::move(res);
    return out;
}

DecayHistogram synthesize_histogram(const DecayModel& model, const Irf& irf, double first_center_ps,
                                    std::size_t n_bins, std::mt19937_64& rng, bool poisson) {
    std::vector<double> centers(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) centers[i] = first_center_ps + irf.bin_width() * static_cast<double>(i);
    std::vector<double> expected = convolve_model_with_irf(model, irf, centers);
    if (poisson) {
        for (double& v : expected) {
            std::poisson_distribution<long long> d(v);
            v = v > 0.0 ? static_cast<double>(d(rng)) : 0.0;
        }
    }
    return DecayHistogram(std::move(centers), std::move(expected));
}

DecayHistogram load_decay_histogram(const std::string& path) {
    const io::CsvTable t = io::read_csv_file(path);
    if (t.rows.empty()) throw ParseError("no data rows", path);
    std::vector<double> time, counts;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        time.push_back(t.number(r, 0));
        counts.push_back(t.number(r, 1));
    }
    DecayHistogram h(std::move(time), std::move(counts));
    if (auto bw = t.meta_number("bin_width_ps")) {
        if (std::abs(*bw - h.bin_width()) > 1e-6 * h.bin_width())
            throw ValidationError("declared bin width disagrees with bin spacing", path);
    }
    return h;
}

void write_decay_histogram(std::ostream& out, const DecayHistogram& h) {
    out << "# bin_width_ps=" << io::format_double(h.bin_width()) << "\n";
    out << "time_ps,counts\n";
    for (std::size_t i = 0; i < h.size(); ++i)
        out << io::format_double(h.bin_centers()[i]) << "," << io::format_double(h.counts()[i]) << "\n";
}

}  // namespace cbr::decay
