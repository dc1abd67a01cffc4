#include <cmath>
#include <numeric>
#include <fstream>
#include <random>

#include "doctest.h"
#include "test_paths.hpp"

#include "cbr/errors.hpp"
#include "cbr/etch.hpp"

using namespace cbr::etch;

namespace {

EtchSeries single_device(const std::vector<double>& ec_ev, const std::string& id = "A") {
    EtchSeries s;
    for (std::size_t c = 0; c < ec_ev.size(); ++c) {
        EtchRecord r;
        r.device_id = id;
        r.cycle = static_cast<int>(c);
        r.ec_rt_ev = ec_ev[c];
        s.records.push_back(r);
    }
    return s;
}

// ordinary least-squares slope, closed form
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    return sxy / sxx;
}

}  // namespace

TEST_CASE("shift per cycle on constructed series") {
    CHECK(std::abs(fit_shift_per_cycle(single_device({1.5, 1.5, 1.5, 1.5})).slope_ev.value) < 1e-15);

    // 31 meV over five cycles, the first step doubled
    std::vector<double> e;
    for (double m : {0.0, 10.6, 15.7, 20.8, 25.9, 31.0}) e.push_back(1.5 + 1e-3 * m);
    const auto s = single_device(e);
    CHECK(mean_shift_per_cycle(s) == doctest::Approx(6.2e-3).epsilon(1e-9));
    const auto raw = fit_shift_per_cycle(s);
    CHECK(raw.slope_ev.value == doctest::Approx(ols_slope({0, 1, 2, 3, 4, 5}, e)).epsilon(1e-12));
    const auto ex = fit_shift_per_cycle(s, {1});
    CHECK(ex.slope_ev.value == doctest::Approx(5.1e-3).epsilon(1e-10));
    CHECK(ex.slope_ev.uncertainty < 1e-12);
    CHECK(ex.fit.params[1] == doctest::Approx(5.5e-3).epsilon(1e-9));  // the extra first-cycle shift
    // nm conversion at the mean energy
    const double emean = std::accumulate(e.begin(), e.end(), 0.0) / 6.0;
    CHECK(ex.slope_nm.value == doctest::Approx(1239.84198 / (emean * emean) * 5.1e-3).epsilon(1e-12));
}

TEST_CASE("seeded regression recovers 5.1 meV per cycle") {
    std::mt19937_64 rng(51);
    int good = 0;
    for (int k = 0; k < 50; ++k) {
        EtchSynthSpec spec;
        spec.n_devices = 1;
        spec.n_cycles = 6;
        const auto f = fit_shift_per_cycle(synthesize_etch_series(spec, rng));
        if (std::abs(f.slope_ev.value - 5.1e-3) <= 0.4e-3) ++good;
        // closed-form standard error 0.5 meV / sqrt(17.5) in expectation
        CHECK(f.slope_ev.uncertainty < 0.3e-3);
    }
    CHECK(good == 50);
}

TEST_CASE("shift fit invariances") {
    std::mt19937_64 rng(3);
    EtchSynthSpec spec;
    spec.first_cycle_extra_ev = 5e-3;
    auto s = synthesize_etch_series(spec, rng);
    const double a = fit_shift_per_cycle(s, {1}).slope_ev.value;
    for (auto& r : s.records) *r.ec_rt_ev += 0.137;
    const double b = fit_shift_per_cycle(s, {1}).slope_ev.value;
    CHECK(std::abs(a - b) <= 1e-12);

    // per-device offsets do not leak into the slope
    EtchSeries two = single_device({1.50, 1.505, 1.51, 1.515}, "A");
    const EtchSeries other = single_device({1.60, 1.605, 1.61}, "B");
    two.records.insert(two.records.end(), other.records.begin(), other.records.end());
    CHECK(fit_shift_per_cycle(two).slope_ev.value == doctest::Approx(5e-3).epsilon(1e-10));
}

TEST_CASE("shift fit errors") {
    CHECK_THROWS_AS(fit_shift_per_cycle(single_device({1.5, 1.51})), cbr::DataError);
    CHECK_THROWS_AS(fit_shift_per_cycle(single_device({1.5, 1.51, 1.52}), {7}), cbr::DataError);
    EtchSeries bad = single_device({1.5, 1.51, 1.52});
    bad.records[2].cycle = 1;
    CHECK_THROWS_AS(fit_shift_per_cycle(bad), cbr::ValidationError);
    bad = single_device({1.5, 1.51, 1.52});
    bad.records[1].ec_rt_ev.reset();
    CHECK_THROWS_AS(bad.validate(), cbr::ValidationError);
    CHECK_THROWS_AS(design_from_string("d7"), cbr::ValidationError);
}

TEST_CASE("removal depth") {
    CHECK(estimate_removal_depth(0.0, 2.9).value == 0.0);
    const auto r = estimate_removal_depth(2.6, 2.9, 0.1, 0.2);
    CHECK(r.value == doctest::Approx(0.90).epsilon(5e-3));
    CHECK(r.uncertainty == doctest::Approx(std::hypot(0.1 / 2.9, 2.6 * 0.2 / (2.9 * 2.9))));
    // a solver 20 % off shifts the estimate in proportion
    CHECK(estimate_removal_depth(2.6, 2.9 * 1.2).value == doctest::Approx(r.value / 1.2).epsilon(1e-14));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int k = 0; k < 100; ++k) {
        const double m = u(rng), s = u(rng), a = u(rng);
        CHECK(estimate_removal_depth(a * m, s).value == doctest::Approx(a * estimate_removal_depth(m, s).value));
        CHECK(estimate_removal_depth(m, a * s).value == doctest::Approx(estimate_removal_depth(m, s).value / a));
    }
    CHECK_THROWS_AS(estimate_removal_depth(2.6, 0.0), cbr::DomainError);
    CHECK_THROWS_AS(estimate_removal_depth(2.6, -1.0), cbr::DomainError);
}

TEST_CASE("temperature offset") {
    EtchSeries s = single_device({1.50, 1.51, 1.52});
    for (auto& r : s.records) r.ec_lt_ev = r.ec_rt_ev;
    CHECK(temperature_offset(s).value == 0.0);

    std::mt19937_64 rng(164);
    const auto syn = synthesize_etch_series(EtchSynthSpec{}, rng);
    const auto t = temperature_offset(syn);
    CHECK(std::abs(t.value - 16.4e-3) < 3 * t.uncertainty);
    CHECK(t.uncertainty == doctest::Approx(0.5e-3 / std::sqrt(60.0)).epsilon(0.3));

    EtchSeries one = single_device({1.5, 1.51});
    one.records[0].ec_lt_ev = 1.52;
    const auto o = temperature_offset(one);
    CHECK(o.value == doctest::Approx(0.02));
    CHECK(std::isnan(o.uncertainty));

    // flagged records are left out
    EtchSeries fl = one;
    fl.records[1].ec_lt_ev = 1.6;
    fl.records[1].flag = "poor_vacuum";
    CHECK(temperature_offset(fl).value == doctest::Approx(0.02));
    CHECK_THROWS_AS(temperature_offset(single_device({1.5, 1.51})), cbr::DataError);
}

TEST_CASE("Q trend") {
    EtchSeries s = single_device({1.5, 1.51, 1.52, 1.53});
    for (auto& r : s.records) r.q = 150.0;
    CHECK(std::abs(fit_q_trend(s).slope.value) < 1e-12);

    std::mt19937_64 rng(26);
    int good = 0;
    for (int k = 0; k < 50; ++k) {
        const auto q = fit_q_trend(synthesize_etch_series(EtchSynthSpec{}, rng));
        if (std::abs(q.slope.value + 2.6) <= 0.5) ++good;
        CHECK(q.n_points == 60);
    }
    CHECK(good == 50);

    EtchSeries two = single_device({1.5, 1.51, 1.52});
    two.records[0].q = 150;
    two.records[1].q = 148;
    CHECK_THROWS_AS(fit_q_trend(two), cbr::DataError);
}

TEST_CASE("cycle planning") {
    const auto z = predict_cycles_to_target(1.5, 1.5, 5.1e-3);
    CHECK(z.cycles == 0);
    CHECK(z.residual_ev == 0.0);
    const auto a = predict_cycles_to_target(1.5, 1.5 + 15.3e-3, 5.1e-3);
    CHECK(a.cycles == 3);
    CHECK(std::abs(a.residual_ev) < 1e-12);
    const auto b = predict_cycles_to_target(1.5, 1.5 + 13e-3, 5.1e-3);
    CHECK(b.cycles == 3);
    CHECK(b.residual_ev == doctest::Approx(-2.3e-3).epsilon(1e-9));
    for (double d : {-2.5e-3, -1e-3, 0.0, 1e-3, 2.5e-3}) CHECK(predict_cycles_to_target(1.5, 1.5 + d, 5.1e-3).cycles == 0);
    CHECK_THROWS_AS(predict_cycles_to_target(1.5, 1.49, 5.1e-3), cbr::PlanningError);
    CHECK_THROWS_AS(predict_cycles_to_target(1.5, 1.51, 0.0), cbr::PlanningError);
}

TEST_CASE("etch CSV round trip and report") {
    std::mt19937_64 rng(8);
    auto s = synthesize_etch_series(EtchSynthSpec{}, rng);
    s.records[3].ec_lt_ev.reset();
    s.records[4].flag = "poor_vacuum";
    {
        std::ofstream f(scratch_path("etch_roundtrip.csv"));
        write_etch_series(f, s);
    }
    const auto back = load_etch_series(scratch_path("etch_roundtrip.csv"));
    REQUIRE(back.records.size() == s.records.size());
    CHECK(!back.records[3].ec_lt_ev);
    CHECK(back.records[4].flagged());
    CHECK(back.records[5].design == s.records[5].design);
    CHECK(fit_shift_per_cycle(back).slope_ev.value == fit_shift_per_cycle(s).slope_ev.value);

    const auto ex = fit_shift_per_cycle(back, {1});
    const auto raw = fit_shift_per_cycle(back);
    const auto j = tuning_report(ex, raw, mean_shift_per_cycle(back), temperature_offset(back), fit_q_trend(back),
                                 estimate_removal_depth(ex.slope_nm.value, 2.9));
    for (const char* k : {"shift_per_cycle_eV", "raw_shift_per_cycle_eV", "temperature_offset_eV", "q_slope",
                          "removal_per_cycle_nm"})
        CHECK(j.contains(k));
}
