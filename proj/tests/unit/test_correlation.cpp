#include <cmath>
#include <random>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_paths.hpp"

#include "cbr/correlation.hpp"
#include "cbr/errors.hpp"

using namespace cbr::correlation;

namespace {

// 0.5 ns bins centred on multiples of 0.5 ns over +-2 periods. Bins at 0 and
// +-12.5 carry the given counts; every other bin is empty.
CoincidenceHistogram three_spikes(double n0, double nm, double np) {
    std::vector<double> t, c;
    for (int i = -50; i <= 50; ++i) {
        t.push_back(0.5 * i);
        c.push_back(i == 0 ? n0 : i == -25 ? nm : i == 25 ? np : 0.0);
    }
    return CoincidenceHistogram(t, c);
}

CoincidenceHistogram merge_pairs(const CoincidenceHistogram& h) {
    std::vector<double> t, c;
    for (std::size_t i = 0; i + 1 < h.size(); i += 2) {
        t.push_back(0.5 * (h.delays()[i] + h.delays()[i + 1]));
        c.push_back(h.counts()[i] + h.counts()[i + 1]);
    }
    return CoincidenceHistogram(t, c, h.rep_period());
}

}  // namespace

TEST_CASE("g2 arithmetic on constructed windows") {
    const auto r = g2_zero(three_spikes(300, 1e4, 1e4));
    CHECK(r.g2_0 == doctest::Approx(0.030).epsilon(1e-12));
    // oracle: var = N0/M^2 + N0^2 (N- + N+) / (4 M^4)
    const double m = 1e4;
    const double sigma = std::sqrt(300 / (m * m) + 300.0 * 300.0 * 2e4 / (4 * m * m * m * m));
    CHECK(r.uncertainty == doctest::Approx(sigma).epsilon(1e-12));
    CHECK(r.uncertainty == doctest::Approx(0.002).epsilon(0.15));
    CHECK(r.central_counts == 300);
    CHECK(r.side_counts[0] == 1e4);
    CHECK(r.side_counts[1] == 1e4);
    CHECK(r.window_ns == 2.0);

    CHECK(g2_zero(three_spikes(0, 1e4, 1e4)).g2_0 == 0.0);
    CHECK(g2_zero(three_spikes(0, 1e4, 1e4)).uncertainty > 0.0);
    CHECK(g2_zero(three_spikes(5e3, 5e3, 5e3)).g2_0 == doctest::Approx(1.0));
    // mean of unequal side peaks
    CHECK(g2_zero(three_spikes(100, 4e3, 6e3)).g2_0 == doctest::Approx(0.02));
}

TEST_CASE("only first neighbours normalize") {
    CombSpec s;
    s.center_ratio = 0.1;
    std::mt19937_64 rng(1);
    auto h = synthesize_comb(s, rng, false);
    const double before = g2_zero(h).g2_0;
    // blinking-like bunching on far peaks leaves the result unchanged
    std::vector<double> c = h.counts();
    for (std::size_t i = 0; i < h.size(); ++i)
        if (std::abs(h.delays()[i]) > 20.0) c[i] *= 3.0;
    const CoincidenceHistogram bunched(h.delays(), c, h.rep_period());
    CHECK(g2_zero(bunched).g2_0 == doctest::Approx(before).epsilon(1e-14));
    const auto comb = locate_peaks(bunched);
    CHECK(comb.areas.front() > 2.5 * comb.areas[comb.areas.size() / 2 + 1]);
}

TEST_CASE("bin-centre rule") {
    // centres exactly on the window edge are excluded
    std::vector<double> t, c;
    for (int i = -40; i <= 40; ++i) {
        t.push_back(0.5 * i);
        c.push_back(1.0);
    }
    const CoincidenceHistogram h(t, c);
    CHECK(h.window_sum(0.0, 2.0) == 3.0);  // -0.5, 0, 0.5
    CHECK(h.window_sum(0.0, 2.01) == 5.0);
}

TEST_CASE("g2 is invariant under uniform scaling") {
    CombSpec s;
    std::mt19937_64 rng(7);
    const auto h = synthesize_comb(s, rng);
    const double g = g2_zero(h).g2_0;
    for (double k : {0.5, 2.0, 17.0, 1e3}) {
        std::vector<double> c = h.counts();
        for (double& v : c) v *= k;
        CHECK(g2_zero(CoincidenceHistogram(h.delays(), c)).g2_0 == doctest::Approx(g).epsilon(1e-13));
    }
}

TEST_CASE("bin resolution change stays within one sigma") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        CombSpec s;
        s.bin_width_ns = 0.025;
        s.background = 0.5;
        const auto fine = synthesize_comb(s, rng);
        const auto coarse = merge_pairs(fine);
        CHECK(coarse.bin_width() == doctest::Approx(0.05));
        const auto a = g2_zero(fine);
        const auto b = g2_zero(coarse);
        CHECK(std::abs(a.g2_0 - b.g2_0) < a.uncertainty);
    }
}

TEST_CASE("coverage of the Poisson error over seeded trials") {
    const double rho = 0.03;
    std::mt19937_64 rng(2024);
    int inside = 0;
    const int trials = 500;
    for (int k = 0; k < trials; ++k) {
        CombSpec s;
        s.center_ratio = rho;
        s.decay_ns = 0.2;  // all but ~0.7 % of each peak lands inside 2 ns
        const auto r = g2_zero(synthesize_comb(s, rng));
        if (std::abs(r.g2_0 - rho) <= 2.0 * r.uncertainty) ++inside;
    }
    MESSAGE("inside 2 sigma: " << inside << " / " << trials);
    CHECK(inside >= 450);
}

TEST_CASE("locate_peaks on ideal and offset combs") {
    std::mt19937_64 rng(3);
    CombSpec s;
    const auto ideal = synthesize_comb(s, rng, false);
    const auto comb = locate_peaks(ideal);
    REQUIRE(comb.orders.size() >= 3);
    for (std::size_t i = 0; i < comb.orders.size(); ++i)
        CHECK(std::abs(comb.centers_ns[i] - comb.orders[i] * 12.5) < 0.1 * s.bin_width_ns);
    CHECK(comb.period_ns == doctest::Approx(12.5).epsilon(1e-6));

    s.offset_ns = 0.3;
    const auto shifted = synthesize_comb(s, rng);
    const auto c2 = locate_peaks(shifted);
    CHECK(std::abs(c2.offset_ns - 0.3) < 0.05);
    // aligned analysis recovers the same ratio as the unshifted comb
    const auto aligned = analyze_g2(shifted);
    CHECK(aligned.offset_ns == doctest::Approx(c2.offset_ns));
    CHECK(std::abs(aligned.g2_0 - 0.03) < 2 * aligned.uncertainty);

    s.offset_ns = 0.0;
    s.background = 2.0;
    const auto bg = locate_peaks(synthesize_comb(s, rng));
    CHECK(std::abs(bg.offset_ns) < 0.05);
}

TEST_CASE("detection and parameter errors") {
    std::mt19937_64 rng(5);
    CombSpec s;
    s.rep_period_ns = 15.0;  // data disagree with the nominal 12.5 ns by 20 %
    const auto wrong = synthesize_comb(s, rng, false);
    const std::vector<double> t = wrong.delays(), c = wrong.counts();
    CHECK_THROWS_AS(locate_peaks(CoincidenceHistogram(t, c, 12.5), 12.5), cbr::DetectionError);

    CombSpec ok;
    auto h = synthesize_comb(ok, rng, false);
    std::vector<double> cc = h.counts();
    for (std::size_t i = 0; i < h.size(); ++i)
        if (std::abs(h.delays()[i] - 25.0) < 3.0) cc[i] = 0.0;
    CHECK_THROWS_AS(locate_peaks(CoincidenceHistogram(h.delays(), cc)), cbr::DetectionError);

    CHECK_THROWS_AS(g2_zero(h, 12.5), cbr::ParameterError);
    CHECK_THROWS_AS(g2_zero(h, 13.0), cbr::ParameterError);
    CHECK_THROWS_AS(g2_zero(h, 0.0), cbr::ParameterError);
    CHECK_THROWS_AS(g2_zero(three_spikes(5, 0, 0)), cbr::NormalizationError);

    // less than +-1.5 periods
    std::vector<double> tt, c3;
    for (int i = -30; i <= 30; ++i) {
        tt.push_back(0.5 * i);
        c3.push_back(10);
    }
    CHECK_THROWS_AS(g2_zero(CoincidenceHistogram(tt, c3)), cbr::DataError);
    CHECK_THROWS_AS(CoincidenceHistogram({0, 1, 3}, {1, 1, 1}), cbr::ValidationError);
    CHECK_THROWS_AS(CoincidenceHistogram({0, 1}, {1, -1}), cbr::ValidationError);
    CHECK_THROWS_AS(CoincidenceHistogram({0, 1}, {1, 1}, 0.0), cbr::ValidationError);
}

TEST_CASE("histogram CSV round trip") {
    std::mt19937_64 rng(9);
    const auto h = synthesize_comb(CombSpec{}, rng);
    std::ostringstream os;
    write_coincidence_histogram(os, h);
    const std::string path = scratch_path("corr_roundtrip.csv");
    {
        std::ofstream f(path);
        f << os.str();
    }
    const auto back = load_coincidence_histogram(path);
    REQUIRE(back.size() == h.size());
    CHECK(back.counts() == h.counts());
    CHECK(g2_zero(back).g2_0 == g2_zero(h).g2_0);
    const auto j = g2_report(g2_zero(back));
    for (const char* k : {"g2_0", "err", "window_ns", "rep_period_ns"}) CHECK(j.contains(k));
}
