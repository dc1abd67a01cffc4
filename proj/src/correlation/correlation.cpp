#include "cbr/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cbr/csv.hpp"
#include "cbr/errors.hpp"

namespace cbr::correlation {

CoincidenceHistogram::CoincidenceHistogram(std::vector<double> delays_ns, std::vector<double> counts,
                                           double rep_period_ns)
    : delays_(std::move(delays_ns)), counts_(std::move(counts)), rep_(rep_period_ns) {
    if (delays_.size() != counts_.size()) throw ShapeError("delays and counts differ in length");
    if (delays_.size() < 2) throw ValidationError("histogram needs at least two bins");
    if (!(rep_ > 0.0)) throw ValidationError("repetition period must be positive");
    width_ = (delays_.back() - delays_.front()) / static_cast<double>(delays_.size() - 1);
    if (!(width_ > 0.0)) throw ValidationError("delays must increase");
    for (std::size_t i = 1; i < delays_.size(); ++i)
        if (std::abs(delays_[i] - delays_[i - 1] - width_) > 1e-6 * width_)
            throw ValidationError("histogram bins are not uniform", "bin " + std::to_string(i));
    for (std::size_t i = 0; i < counts_.size(); ++i)
        if (!std::isfinite(counts_[i]) || counts_[i] < 0.0)
            throw ValidationError("counts must be finite and non-negative", "bin " + std::to_string(i));
}

double CoincidenceHistogram::window_sum(double centre, double window) const {
    // bin-centre rule; the tiny margin keeps centres sitting on the edge out
    const double half = 0.5 * window - 1e-9 * window;
    double s = 0.0;
    for (std::size_t i = 0; i < delays_.size(); ++i)
        if (std::abs(delays_[i] - centre) < half) s += counts_[i];
    return s;
}

double CoincidenceHistogram::window_centroid(double centre, double window) const {
    const double half = 0.5 * window - 1e-9 * window;
    double s = 0.0, st = 0.0;
    for (std::size_t i = 0; i < delays_.size(); ++i) {
        if (std::abs(delays_[i] - centre) < half) {
            s += counts_[i];
            st += counts_[i] * delays_[i];
        }
    }
    return s > 0.0 ? st / s : centre;
}

G2Result g2_zero(const CoincidenceHistogram& hist, double window, double rep, double offset) {
    if (!(window > 0.0)) throw ParameterError("integration window must be positive");
    if (!(rep > 0.0)) throw ParameterError("repetition period must be positive");
    if (window >= rep)
        throw ParameterError("integration window straddles the side peaks",
                             "window " + std::to_string(window) + " ns >= period " + std::to_string(rep) + " ns");
    const double lo = hist.delays().front() - 0.5 * hist.bin_width();
    const double hi = hist.delays().back() + 0.5 * hist.bin_width();
    if (lo > offset - 1.5 * rep + 1e-9 * rep || hi < offset + 1.5 * rep - 1e-9 * rep)
        throw DataError("histogram must span at least +-1.5 repetition periods");

    G2Result r;
    r.window_ns = window;
    r.rep_period_ns = rep;
    r.offset_ns = offset;
    r.central_counts = hist.window_sum(offset, window);
    r.side_counts[0] = hist.window_sum(offset - rep, window);
    r.side_counts[1] = hist.window_sum(offset + rep, window);
    const double m = 0.5 * (r.side_counts[0] + r.side_counts[1]);
    if (!(m > 0.0)) throw NormalizationError("side peaks are empty");
    const double n0 = r.central_counts;
    r.g2_0 = n0 / m;
    const double var = std::max(n0, 1.0) / (m * m) +
                       n0 * n0 * (r.side_counts[0] + r.side_counts[1]) / (4.0 * m * m * m * m);
    r.uncertainty = std::sqrt(var);
    return r;
}

PeakComb locate_peaks(const CoincidenceHistogram& hist, double rep) {
    if (!(rep > 0.0)) throw ParameterError("repetition period must be positive");
    const double lo = hist.delays().front();
    const double hi = hist.delays().back();
    const double search = 0.5 * rep;  // +-rep/4
    const int kmin = static_cast<int>(std::ceil((lo + 0.5 * search) / rep));
    const int kmax = static_cast<int>(std::floor((hi - 0.5 * search) / rep));
    if (kmin > -1 || kmax < 1) throw DetectionError("histogram holds fewer than 3 comb positions");

    PeakComb comb;
    for (int k = kmin; k <= kmax; ++k) {
        double c = k * rep;
        for (int it = 0; it < 3; ++it) c = hist.window_centroid(c, search);
        // a recentred window must stay near the nominal position
        if (std::abs(c - k * rep) > 0.25 * rep) c = k * rep;
        comb.orders.push_back(k);
        comb.centers_ns.push_back(c);
        comb.areas.push_back(hist.window_sum(c, search));
    }
    double largest = 0.0;
    for (std::size_t i = 0; i < comb.orders.size(); ++i)
        if (comb.orders[i] != 0) largest = std::max(largest, comb.areas[i]);
    if (!(largest > 0.0)) throw DetectionError("no side peaks found");
    for (std::size_t i = 0; i < comb.orders.size(); ++i) {
        if (comb.orders[i] != 0 && comb.areas[i] < 0.1 * largest)
            throw DetectionError("expected peak is missing",
                                 "order " + std::to_string(comb.orders[i]) + " near " +
                                     std::to_string(comb.orders[i] * rep) + " ns");
    }
    // line through the side-peak centroids
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < comb.orders.size(); ++i) {
        if (comb.orders[i] == 0) continue;
        const double x = comb.orders[i], y = comb.centers_ns[i];
        sw += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    comb.period_ns = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    comb.offset_ns = (sy - comb.period_ns * sx) / sw;
    if (std::abs(comb.period_ns - rep) > 0.1 * rep)
        throw DetectionError("peak spacing disagrees with the repetition period",
                             "fitted " + std::to_string(comb.period_ns) + " ns vs " + std::to_string(rep) + " ns");
    if (std::abs(comb.offset_ns) > 0.25 * rep) throw DetectionError("comb offset exceeds a quarter period");
    return comb;
}

G2Result analyze_g2(const CoincidenceHistogram& hist, double window, double rep) {
    const PeakComb comb = locate_peaks(hist, rep);
    return g2_zero(hist, window, rep, comb.offset_ns);
}

nlohmann::json g2_report(const G2Result& r) {
    return {{"g2_0", r.g2_0},
            {"err", r.uncertainty},
            {"window_ns", r.window_ns},
            {"rep_period_ns", r.rep_period_ns},
            {"offset_ns", r.offset_ns},
            {"central_counts", r.central_counts},
            {"side_counts", {r.side_counts[0], r.side_counts[1]}}};
}

nlohmann::json comb_report(const PeakComb& c) {
    nlohmann::json peaks = nlohmann::json::array();
    for (std::size_t i = 0; i < c.orders.size(); ++i)
        peaks.push_back({{"order", c.orders[i]}, {"center_ns", c.centers_ns[i]}, {"area", c.areas[i]}});
    return {{"offset_ns", c.offset_ns}, {"period_ns", c.period_ns}, {"peaks", peaks}};
}

CoincidenceHistogram synthesize_comb(const CombSpec& s, std::mt19937_64& rng, bool poisson) {
    if (!(s.bin_width_ns > 0.0) || !(s.decay_ns > 0.0)) throw DomainError("comb widths must be positive");
    const double half_span = (s.n_side_peaks + 0.5) * s.rep_period_ns;
    const auto n = static_cast<std::size_t>(std::floor(2.0 * half_span / s.bin_width_ns));
    std::vector<double> t(n), c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) t[i] = -half_span + (static_cast<double>(i) + 0.5) * s.bin_width_ns;
    // integral of exp(-|u|/d) / (2 d) over [a, b]
    auto two_sided = [d = s.decay_ns](double a, double b) {
        auto cdf = [d](double u) { return u < 0 ? 0.5 * std::exp(u / d) : 1.0 - 0.5 * std::exp(-u / d); };
        return cdf(b) - cdf(a);
    };
    for (int k = -s.n_side_peaks; k <= s.n_side_peaks; ++k) {
        const double area = k == 0 ? s.center_ratio * s.side_area : s.side_area;
        const double centre = k * s.rep_period_ns + s.offset_ns;
        for (std::size_t i = 0; i < n; ++i)
            c[i] += area * two_sided(t[i] - 0.5 * s.bin_width_ns - centre, t[i] + 0.5 * s.bin_width_ns - centre);
    }
    for (double& v : c) {
        v += s.background;
        if (poisson) {
            std::poisson_distribution<long long> d(v);
            v = v > 0.0 ? static_cast<double>(d(rng)) : 0.0;
        }
    }
    return CoincidenceHistogram(std::move(t), std::move(c), s.rep_period_ns);
}

CoincidenceHistogram load_coincidence_histogram(const std::string& path, double rep) {
    const io::CsvTable t = io::read_csv_file(path);
    if (t.rows.empty()) throw ParseError("no data rows", path);
    std::vector<double> d, c;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        d.push_back(t.number(r, 0));
        c.push_back(t.number(r, 1));
    }
    if (auto meta = t.meta_number("rep_period_ns")) rep = *meta;
    CoincidenceHistogram h(std::move(d), std::move(c), rep);
    if (auto bw = t.meta_number("bin_width_ns")) {
        if (std::abs(*bw - h.bin_width()) > 1e-6 * h.bin_width())
            throw ValidationError("declared bin width disagrees with bin spacing", path);
    }
    return h;
}

void write_coincidence_histogram(std::ostream& out, const CoincidenceHistogram& h) {
    out << "# bin_width_ns=" << io::format_double(h.bin_width())
        << " rep_period_ns=" << io::format_double(h.rep_period()) << "\n";
    out << "delay_ns,counts\n";
    for (std::size_t i = 0; i < h.size(); ++i)
        out << io::format_double(h.delays()[i]) << "," << io::format_double(h.counts()[i]) << "\n";
}

}  // namespace cbr::correlation
