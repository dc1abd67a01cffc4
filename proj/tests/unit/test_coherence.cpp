#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "test_paths.hpp"

#include "cbr/coherence.hpp"
#include "cbr/errors.hpp"

using namespace cbr::coherence;

namespace {

constexpr double kLambda = 780.0;
constexpr double kPi = 3.14159265358979323846;
constexpr double kHbarEvPs = 6.582119569e-4;

FringeScan analytic_scan(double i0, double nu, double lambda, std::size_t n = 39, double step = 20.0,
                         double phase = 0.4) {
    FringeScan s;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = step * static_cast<double>(i);
        s.positions_nm.push_back(x);
        s.intensities.push_back(i0 * (1.0 + nu * std::cos(4 * kPi * x / lambda + phase)));
    }
    return s;
}

std::vector<double> delay_grid() {
    std::vector<double> d;
    for (int i = 0; i <= 20; ++i) d.push_back(20.0 * i);
    return d;
}

}  // namespace

TEST_CASE("fringe visibility on analytic scans") {
    CHECK(fringe_visibility(analytic_scan(100, 0.0, kLambda), kLambda).value < 1e-12);
    CHECK(fringe_visibility(analytic_scan(100, 1.0, kLambda), kLambda).value == doctest::Approx(1.0).epsilon(1e-9));
    const Visibility half = fringe_visibility(analytic_scan(1.0, 0.5, kLambda), kLambda);
    CHECK(std::abs(half.value - 0.5) <= 1e-6);
    // one period exactly, coarse 8-sample scan
    const Visibility short_scan = fringe_visibility(analytic_scan(1.0, 0.5, kLambda, 8, 390.0 / 8.0), kLambda);
    CHECK(std::abs(short_scan.value - 0.5) <= 1e-6);
}

TEST_CASE("fringe visibility with counting noise") {
    std::mt19937_64 rng(42);
    int inside = 0;
    for (int k = 0; k < 200; ++k) {
        const auto s = synthesize_fringe_scan(0.6, kLambda, 2000, 39, 20.0, 0.1 * k, 80.0, rng);
        const auto v = fringe_visibility(s, kLambda);
        if (std::abs(v.value - 0.6) < 2 * v.uncertainty) ++inside;
    }
    MESSAGE("visibility within 2 sigma: " << inside << " / 200");
    CHECK(inside >= 170);
}

TEST_CASE("fringes at 80 ps delay as in the interference insets") {
    std::mt19937_64 rng(80);
    const double nu_true = visibility_model(80.0, 80.0, 150.0);
    const auto s = synthesize_fringe_scan(nu_true, kLambda, 500, 39, 20.0, 1.0, 80.0, rng);
    const auto v = fringe_visibility(s, kLambda);
    CHECK(v.value > 0.0);
    CHECK(v.value < 1.0);
    CHECK(std::abs(v.value - nu_true) < 4 * v.uncertainty);
}

TEST_CASE("fringe scan errors") {
    // data with a 600 nm fringe analysed at 780 nm
    CHECK_THROWS_AS(fringe_visibility(analytic_scan(1.0, 0.5, 600.0), kLambda), cbr::ModelError);
    CHECK_THROWS_AS(fringe_visibility(analytic_scan(0.0, 0.5, kLambda), kLambda), cbr::DataError);
    CHECK_THROWS_AS(fringe_visibility(analytic_scan(1.0, 0.5, kLambda, 10), kLambda), cbr::DataError);
    CHECK_THROWS_AS(fringe_visibility(analytic_scan(1.0, 0.5, kLambda, 60), kLambda), cbr::DataError);
    CHECK_THROWS_AS(fringe_visibility(analytic_scan(1.0, 0.5, kLambda, 7, 60.0), kLambda), cbr::ValidationError);
    FringeScan neg = analytic_scan(1.0, 0.5, kLambda);
    neg.intensities[3] = -1;
    CHECK_THROWS_AS(fringe_visibility(neg, kLambda), cbr::ValidationError);
    CHECK_THROWS_AS(fringe_visibility(analytic_scan(1.0, 0.5, kLambda), -1.0), cbr::DomainError);
}

TEST_CASE("visibility model values and properties") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(visibility_model(0.0, 80, 150) == 1.0);
    CHECK(visibility_model(150.0, inf, 150.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(visibility_model(80.0, 80.0, inf) == doctest::Approx(0.6065306597).epsilon(1e-9));
    CHECK_THROWS_AS(visibility_model(1.0, 0.0, 1.0), cbr::DomainError);
    CHECK_THROWS_AS(visibility_model(1.0, 1.0, -1.0), cbr::DomainError);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1.0, 500.0);
    for (int k = 0; k < 200; ++k) {
        const double tg = u(rng), tl = u(rng), t = u(rng) - 250.0;
        CHECK(visibility_model(0.0, tg, tl) == 1.0);
        CHECK(visibility_model(t, tg, inf) * visibility_model(t, inf, tl) ==
              doctest::Approx(visibility_model(t, tg, tl)).epsilon(1e-14));
        CHECK(visibility_model(t, tg, tl) == visibility_model(-t, tg, tl));
        double prev = 1.0;
        for (double s = 1.0; s < 600.0; s += 7.0) {
            const double v = visibility_model(s, tg, tl);
            if (prev > 1e-300) CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("coherence result round trip") {
    for (double tg : {1.0, 80.0, 333.3}) {
        for (double tl : {0.5, 150.0, 1e4}) {
            const auto r = CoherenceResult::from_times(tg, tl);
            CHECK(r.sigma_ev == doctest::Approx(kHbarEvPs / tg).epsilon(1e-15));
            CHECK(r.gamma_ev == doctest::Approx(kHbarEvPs / tl).epsilon(1e-15));
            CHECK(r.f_g_ev == doctest::Approx(2 * r.sigma_ev * std::sqrt(2 * std::log(2.0))));
            CHECK(r.f_l_ev == doctest::Approx(2 * r.gamma_ev));
            const auto [g, l] = r.times();
            CHECK(std::abs(g - tg) <= 1e-12 * tg);
            CHECK(std::abs(l - tl) <= 1e-12 * tl);
        }
    }
}

TEST_CASE("noiseless coherence fit recovers parameters") {
    std::mt19937_64 rng(0);
    for (auto [tg, tl] : {std::pair{80.0, 150.0}, std::pair{40.0, 400.0}, std::pair{200.0, 60.0}}) {
        std::vector<double> d;
        for (int i = 0; i <= 30; ++i) d.push_back(i * std::max(tg, tl) * 0.1);
        const auto tr = synthesize_visibility_trace(tg, tl, d, 0.0, rng);
        const auto f = fit_coherence(tr);
        CHECK(std::abs(f.result.t_g_ps - tg) <= 1e-6 * tg);
        CHECK(std::abs(f.result.t_l_ps - tl) <= 1e-6 * tl);
    }
}

TEST_CASE("noisy coherence fit recovers within 5 percent") {
    std::mt19937_64 rng(2023);
    std::vector<double> d;
    for (int i = 0; i <= 40; ++i) d.push_back(10.0 * i);
    int good = 0;
    double worst_g = 0, worst_l = 0;
    for (int k = 0; k < 50; ++k) {
        const auto f = fit_coherence(synthesize_visibility_trace(80.0, 150.0, d, 0.02, rng));
        const double eg = std::abs(f.result.t_g_ps / 80.0 - 1), el = std::abs(f.result.t_l_ps / 150.0 - 1);
        worst_g = std::max(worst_g, eg);
        worst_l = std::max(worst_l, el);
        if (eg < 0.05 && el < 0.05) ++good;
    }
    MESSAGE("worst relative errors t_G " << worst_g << " t_L " << worst_l << ", good " << good);
    CHECK(good == 50);
}

TEST_CASE("absolute visibility noise gives calibrated errors") {
    // with an absolute 2 % error the t_L precision is about 8 % on this grid,
    // so the check is on the reported uncertainty instead
    std::mt19937_64 rng(99);
    std::vector<double> d;
    for (int i = 0; i <= 40; ++i) d.push_back(10.0 * i);
    int inside = 0;
    for (int k = 0; k < 200; ++k) {
        const auto f = fit_coherence(synthesize_visibility_trace(80.0, 150.0, d, 0.02, rng, false));
        if (std::abs(f.result.t_g_ps - 80.0) < 2 * f.result.t_g_err_ps) ++inside;
    }
    MESSAGE("t_G within 2 sigma: " << inside << " / 200");
    CHECK(inside >= 170);
}

TEST_CASE("pure Gaussian trace") {
    std::mt19937_64 rng(5);
    const auto d = delay_grid();
    const auto f = fit_coherence(synthesize_visibility_trace(80.0, 1e12, d, 0.0, rng));
    CHECK(f.result.f_l_ev < 1e-9 * f.result.f_g_ev);
    CHECK(std::abs(f.result.f_v_ev / f.result.f_g_ev - 1) < 0.01);
    CHECK(f.result.t_g_ps == doctest::Approx(80.0).epsilon(1e-6));

    int consistent = 0;
    for (int k = 0; k < 50; ++k) {
        const auto g = fit_coherence(synthesize_visibility_trace(80.0, 1e12, d, 0.01, rng));
        if (g.result.f_l_ev <= 2 * g.result.f_l_err_ev + 1e-15) ++consistent;
    }
    CHECK(consistent >= 45);
}

TEST_CASE("end to end from fringe scans") {
    std::mt19937_64 rng(7);
    std::vector<FringeScan> scans;
    for (int i = 0; i <= 25; ++i) {
        const double t = 16.0 * i;
        scans.push_back(synthesize_fringe_scan(visibility_model(t, 80.0, 150.0), kLambda, 5000, 39, 20.0, 0.3 * i, t,
                                               rng));
    }
    const auto tr = trace_from_scans(scans, kLambda);
    const auto f = fit_coherence(tr, 53.0);
    CHECK(f.result.t_g_ps == doctest::Approx(80.0).epsilon(0.1));
    CHECK(f.result.t_l_ps == doctest::Approx(150.0).epsilon(0.1));
    CHECK(std::isfinite(f.result.fourier_ratio));
    const auto j = coherence_report(f);
    for (const char* k : {"t_G_ps", "t_L_ps", "sigma_eV", "gamma_eV", "f_V_eV", "fourier_ratio"}) CHECK(j.contains(k));
}

TEST_CASE("Fourier limit arithmetic") {
    CHECK(natural_linewidth_ev(53.0) == doctest::Approx(12.42e-6).epsilon(1e-3));
    CHECK(natural_linewidth_ev(53.0) == doctest::Approx(6.582119569e-16 / 53e-12).epsilon(1e-14));
    CHECK(fourier_limit_ratio(natural_linewidth_ev(53.0), 53.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fourier_limit_ratio(27.3e-6, 53.0) == doctest::Approx(2.20).epsilon(2e-3));
    CHECK_THROWS_AS(fourier_limit_ratio(0.0, 53.0), cbr::DomainError);
    CHECK_THROWS_AS(fourier_limit_ratio(1e-5, -1.0), cbr::DomainError);
    CHECK(stage_delay_ps(1e6) == doctest::Approx(2e-3 / 299792458.0 * 1e12).epsilon(1e-15));
}

TEST_CASE("coherence fit errors") {
    std::mt19937_64 rng(3);
    VisibilityTrace few = synthesize_visibility_trace(80, 150, {0, 50, 100, 200, 300}, 0.0, rng);
    CHECK_THROWS_AS(fit_coherence(few), cbr::DataError);
    VisibilityTrace flat{{0, 10, 20, 30, 40, 50}, {1, 1, 1, 1, 0.99, 1}, {0.01, 0.01, 0.01, 0.01, 0.01, 0.01}};
    CHECK_THROWS_AS(fit_coherence(flat), cbr::FitError);
    VisibilityTrace dark{{0, 10, 20, 30, 40, 50}, {0, 0.01, 0, 0, 0.01, 0}, {0.01, 0.01, 0.01, 0.01, 0.01, 0.01}};
    CHECK_THROWS_AS(fit_coherence(dark), cbr::FitError);
    VisibilityTrace bad{{0, 10, 20, 30, 40, 50}, {1.2, 0.8, 0.6, 0.4, 0.2, 0.1}, {0, 0, 0, 0, 0, 0}};
    CHECK_THROWS_AS(fit_coherence(bad), cbr::ValidationError);
    VisibilityTrace late = synthesize_visibility_trace(200, 400, {200, 220, 240, 260, 280, 300}, 0.0, rng);
    CHECK_THROWS_AS(fit_coherence(late), cbr::DataError);
}

TEST_CASE("CSV round trips") {
    std::mt19937_64 rng(11);
    const auto s = synthesize_fringe_scan(0.4, kLambda, 800, 39, 20.0, 0.0, 80.0, rng);
    {
        std::ofstream f(scratch_path("fringe_roundtrip.csv"));
        write_fringe_scan(f, s);
    }
    const auto s2 = load_fringe_scan(scratch_path("fringe_roundtrip.csv"));
    CHECK(s2.stage_delay_ps == 80.0);
    CHECK(s2.intensities == s.intensities);
    const auto tr = synthesize_visibility_trace(80, 150, delay_grid(), 0.02, rng);
    {
        std::ofstream f(scratch_path("trace_roundtrip.csv"));
        write_visibility_trace(f, tr);
    }
    const auto tr2 = load_visibility_trace(scratch_path("trace_roundtrip.csv"));
    CHECK(tr2.visibilities == tr.visibilities);
    CHECK(tr2.uncertainties == tr.uncertainties);
}
