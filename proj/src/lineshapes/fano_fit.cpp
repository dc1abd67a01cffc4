#include <algorithm>
#include <cmath>

#include "cbr/errors.hpp"
#include "cbr/lineshapes.hpp"

namespace cbr::lineshapes {

namespace {

struct Range {
    std::size_t first = 0;
    std::size_t last = 0;  // inclusive
};

Range index_range(std::span<const double> axis, EnergyWindow w) {
    Range r{axis.size(), 0};
    for (std::size_t i = 0; i < axis.size(); ++i) {
        if (axis[i] >= w.lo && axis[i] <= w.hi) {
            r.first = std::min(r.first, i);
            r.last = std::max(r.last, i);
        }
    }
    return r;
}

double edge_level(std::span<const double> y, Range r) {
    const std::size_t n = std::min<std::size_t>(3, (r.last - r.first + 1) / 4 + 1);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += y[r.first + k] + y[r.last - k];
    return s / static_cast<double>(2 * n);
}

// Width of the dip at half depth, linearly interpolated at both crossings.
double half_depth_width(std::span<const double> x, std::span<const double> y, Range r, std::size_t imin,
                        double level) {
    const double half = y[imin] + 0.5 * (level - y[imin]);
    double left = x[r.first];
    for (std::size_t i = imin; i > r.first; --i) {
        if (y[i - 1] >= half) {
            const double t = (half - y[i]) / (y[i - 1] - y[i]);
            left = x[i] + t * (x[i - 1] - x[i]);
            break;
        }
    }
    double right = x[r.last];
    for (std::size_t i = imin; i < r.last; ++i) {
        if (y[i + 1] >= half) {
            const double t = (half - y[i]) / (y[i + 1] - y[i]);
            right = x[i] + t * (x[i + 1] - x[i]);
            break;
        }
    }
    return right - left;
}

}  // namespace

FanoInitialGuess fano_initial_guess(const spectra::Spectrum& s, std::optional<EnergyWindow> window) {
    const auto x = s.axis();
    const auto y = s.intensity();
    const EnergyWindow full{x.front(), x.back()};
    if (window) {
        if (!(window->lo < window->hi)) throw InitError("fit window is empty");
        if (window->lo < full.lo || window->hi > full.hi)
            throw InitError("fit window lies outside the spectrum axis",
                            "[" + std::to_string(window->lo) + ", " + std::to_string(window->hi) + "] vs [" +
                                std::to_string(full.lo) + ", " + std::to_string(full.hi) + "]");
    }
    const EnergyWindow search = window.value_or(full);
    Range r = index_range(x, search);
    if (r.first >= r.last || r.last - r.first < 4) throw InitError("fit window holds too few samples");

    auto imin = static_cast<std::size_t>(std::min_element(y.begin() + static_cast<std::ptrdiff_t>(r.first),
                                                          y.begin() + static_cast<std::ptrdiff_t>(r.last) + 1) -
                                         y.begin());
    if (imin == r.first || imin == r.last) throw InitError("no local intensity minimum inside the fit window");

    double level = edge_level(y, r);
    if (!(level > y[imin])) throw InitError("dip has no depth relative to the window edges");
    double width = half_depth_width(x, y, r, imin, level);

    EnergyWindow used = search;
    if (!window) {
        used = EnergyWindow{std::max(full.lo, x[imin] - 5.0 * width), std::min(full.hi, x[imin] + 5.0 * width)};
        r = index_range(x, used);
        if (r.last - r.first < 6) throw InitError("default fit window holds too few samples");
        level = edge_level(y, r);
        if (!(level > y[imin])) throw InitError("dip has no depth relative to the window edges");
        width = half_depth_width(x, y, r, imin, level);
    }
    if (!(width > 0.0)) throw InitError("cannot estimate dip width");

    FanoInitialGuess g;
    g.window = used;
    g.params = FanoParams{level - y[imin], y[imin], 0.0, x[imin], width};
    return g;
}

FanoFit fit_fano(const spectra::Spectrum& spectrum, std::optional<EnergyWindow> window) {
    const spectra::Spectrum s = spectrum.to_energy();
    const FanoInitialGuess guess = fano_initial_guess(s, window);

    fit::FitData data;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double e = s.axis()[i];
        if (e >= guess.window.lo && e <= guess.window.hi) {
            data.x.push_back(e);
            data.y.push_back(s.intensity()[i]);
        }
    }

    fit::FitModel model;
    model.n_params = 5;
    model.names = {"A", "B", "q", "E_c", "Gamma_c"};
    model.residual = [](std::span<const double> p, const fit::FitData& d, std::span<double> r) {
        const FanoParams fp = FanoParams::from_array(p);
        for (std::size_t i = 0; i < d.size(); ++i) r[i] = fano_value(d.x[i], fp) - d.y[i];
    };
    model.jacobian = [](std::span<const double> p, const fit::FitData& d, Eigen::MatrixXd& J) {
        const FanoParams fp = FanoParams::from_array(p);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto g = fano_gradient(d.x[i], fp);
            for (std::size_t k = 0; k < 5; ++k) J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g[k];
        }
    };
    const double span = guess.window.hi - guess.window.lo;
    model.bounds = {fit::Bound{}, fit::Bound{}, fit::Bound{},
                    fit::Bound{guess.window.lo, guess.window.hi}, fit::Bound{1e-9 * span, 10.0 * span}};

    const auto init = guess.params.as_array();
    fit::FitResult res;
    try {
        res = fit::least_squares_fit(model, data, std::vector<double>(init.begin(), init.end()));
    } catch (const RankDeficientError& e) {
        throw FitError(std::string("Fano fit failed: ") + e.what());
    }
    if (!res.converged)
        throw FitError("Fano fit did not converge", "iterations=" + std::to_string(res.iterations) +
                                                        " chi2=" + std::to_string(res.chi2));

    FanoFit out;
    out.params = FanoParams::from_array(res.params);
    out.uncertainties = fit::parameter_uncertainties(res);
    out.fit = std::move(res);
    out.window = guess.window;
    return out;
}

nlohmann::json fano_report(const FanoFit& f) {
    nlohmann::json j;
    j["model"] = "fano";
    j["params"] = {{"A", f.params.amplitude},
                   {"B", f.params.baseline},
                   {"q", f.params.q},
                   {"E_c", f.params.center_ev},
                   {"Gamma_c", f.params.width_ev}};
    j["uncertainties"] = {{"A", f.uncertainties[0]},
                          {"B", f.uncertainties[1]},
                          {"q", f.uncertainties[2]},
                          {"E_c", f.uncertainties[3]},
                          {"Gamma_c", f.uncertainties[4]}};
    j["reduced_chi2"] = f.fit.reduced_chi2;
    j["window"] = {f.window.lo, f.window.hi};
    j["E_c_eV"] = f.params.center_ev;
    j["E_c_nm"] = PhysicalConstants::hc_ev_nm / f.params.center_ev;
    j["Q"] = f.quality();
    return j;
}

}  // namespace cbr::lineshapes
