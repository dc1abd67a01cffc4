#pragma once

#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace cbr::correlation {

inline constexpr double kDefaultRepPeriod_ns = 12.5;  // 80 MHz laser

class CoincidenceHistogram {
public:
    CoincidenceHistogram(std::vector<double> delays_ns, std::vector<double> counts,
                         double rep_period_ns = kDefaultRepPeriod_ns);

    const std::vector<double>& delays() const noexcept { return delays_; }
    const std::vector<double>& counts() const noexcept { return counts_; }
    double bin_width() const noexcept { return width_; }
    double rep_period() const noexcept { return rep_; }
    std::size_t size() const noexcept { return counts_.size(); }

    // Sum of bins whose centres satisfy |t - centre| < window / 2.
    double window_sum(double centre_ns, double window_ns) const;
    double window_centroid(double centre_ns, double window_ns) const;

private:
    std::vector<double> delays_;
    std::vector<double> counts_;
    double width_ = 0.0;
    double rep_ = kDefaultRepPeriod_ns;
};

struct G2Result {
    double g2_0 = 0.0;
    double uncertainty = 0.0;
    double window_ns = 0.0;
    double rep_period_ns = 0.0;
    double offset_ns = 0.0;
    double central_counts = 0.0;
    double side_counts[2] = {0.0, 0.0};  // at -rep and +rep
};

// g2(0) = N(0) / mean(N(-T), N(+T)) with all three windows centred on the comb
// shifted by offset. Poisson errors: var = max(N0,1)/M^2 + N0^2 (N- + N+)/(4 M^4).
G2Result g2_zero(const CoincidenceHistogram& hist, double window_ns = 2.0,
                 double rep_period_ns = kDefaultRepPeriod_ns, double offset_ns = 0.0);

struct PeakComb {
    std::vector<int> orders;         // k of each comb position
    std::vector<double> centers_ns;  // centroid per order
    std::vector<double> areas;       // counts within +-rep/4
    double offset_ns = 0.0;          // fitted comb offset
    double period_ns = 0.0;          // fitted spacing
};

// Centroids within +-rep/4 of each nominal comb position k rep. The fitted
// offset and period come from a line through the side-peak centroids; the
// central peak is reported but not required (it is suppressed for a good
// single-photon source).
PeakComb locate_peaks(const CoincidenceHistogram& hist, double rep_period_ns = kDefaultRepPeriod_ns);

// locate_peaks followed by g2_zero at the detected offset.
G2Result analyze_g2(const CoincidenceHistogram& hist, double window_ns = 2.0,
                    double rep_period_ns = kDefaultRepPeriod_ns);

nlohmann::json g2_report(const G2Result& r);
nlohmann::json comb_report(const PeakComb& c);

struct CombSpec {
    double rep_period_ns = kDefaultRepPeriod_ns;
    double bin_width_ns = 0.05;
    int n_side_peaks = 4;        // per side
    double side_area = 1e4;      // expected counts per side peak
    double center_ratio = 0.03;  // central area / side area
    double decay_ns = 0.3;       // two-sided exponential width of a peak
    double offset_ns = 0.0;
    double background = 0.0;     // counts per bin
};

CoincidenceHistogram synthesize_comb(const CombSpec& spec, std::mt19937_64& rng, bool poisson = true);

CoincidenceHistogram load_coincidence_histogram(const std::string& path,
                                                double rep_period_ns = kDefaultRepPeriod_ns);
void write_coincidence_histogram(std::ostream& out, const CoincidenceHistogram& h);

}  // namespace cbr::correlation
