// Acceptance suite: one PASS/FAIL line per criterion (criterion 9 has one
// line per property). Exit status is the number of failed lines.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "cbr/cli.hpp"
#include "cbr/coherence.hpp"
#include "cbr/constants.hpp"
#include "cbr/correlation.hpp"
#include "cbr/decay.hpp"
#include "cbr/etch.hpp"
#include "cbr/fdtd/simulation.hpp"
#include "cbr/lineshapes.hpp"

using namespace cbr;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int prec = 4) {
    char b[64];
    std::snprintf(b, sizeof b, "%.*g", prec, v);
    return b;
}

int g_failed = 0, g_total = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
    ++g_total;
    if (!pass) ++g_failed;
    std::printf("%s  %-3s %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
}

// Any exception turns the line into a FAIL carrying the error text.
void guarded(const std::string& id, const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        report(id, false, std::string("error ") + e.code() + ": " + e.what() + " [" + e.context() + "]");
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

// ---------------------------------------------------------------- oracles

// Gaussian (sigma) convolved with A exp(-(t - t0)/tau), closed form.
double emg(double t, double amp, double tau, double t0, double sigma) {
    const double u = t - t0;
    const double x = u / sigma - sigma / tau;
    return amp * std::exp(sigma * sigma / (2.0 * tau * tau) - u / tau) * 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// bin integral by 5-point Gauss-Legendre
double emg_bin(double c, double w, double amp, double tau, double t0, double sigma) {
    static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += wg[k] * emg(c + 0.5 * w * xg[k], amp, tau, t0, sigma);
    return 0.5 * w * s;
}

// half-maximum crossing of the evaluated profile by bisection
double numeric_fwhm(double sigma, double gamma) {
    const lineshapes::VoigtParams p{sigma, gamma};
    const double peak = lineshapes::voigt_value(0.0, 0.0, p);
    double lo = 0.0, hi = std::max(sigma, gamma);
    while (lineshapes::voigt_value(hi, 0.0, p) > 0.5 * peak) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (lineshapes::voigt_value(mid, 0.0, p) > 0.5 * peak ? lo : hi) = mid;
    }
    return lo + hi;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

spectra::Spectrum fano_spectrum(const lineshapes::FanoParams& p, double lo, double hi, int n, double noise,
                                std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> e(n), v(n);
    for (int i = 0; i < n; ++i) {
        e[i] = lo + (hi - lo) * i / (n - 1);
        v[i] = lineshapes::fano_value(e[i], p) * (1.0 + noise * g(rng));
    }
    return spectra::Spectrum(e, v, spectra::AxisKind::energy_ev);
}

// -------------------------------------------------------------- criteria

void criterion1() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1.40, 1.70);
    const lineshapes::FanoParams p{0.45, 0.25, 0.0, 1.548, 0.0103};
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double e = u(rng);
        const double x = (e - p.center_ev) / (0.5 * p.width_ev);
        const double lorentz = p.baseline + p.amplitude - p.amplitude / (1.0 + x * x);
        worst = std::max(worst, std::abs(lineshapes::fano_value(e, p) - lorentz));
    }
    const double dt = seconds_since(t0);
    report("1", worst <= 1e-12 && dt < 1.0,
           "Fano q=0 vs inverted Lorentzian: max |diff| = " + num(worst) + " (<= 1e-12) on 1e4 energies, " +
               num(dt, 3) + " s (< 1 s)");
}

void criterion2() {
    const auto t0 = Clock::now();
    const lineshapes::FanoParams truth{0.45, 0.25, -0.35, 1.548, 0.0103};
    std::mt19937_64 rng(2);
    const auto clean = lineshapes::fit_fano(fano_spectrum(truth, 1.50, 1.60, 801, 0.0, rng));
    const auto t = truth.as_array(), got = clean.params.as_array();
    double worst_rel = 0.0;
    for (int k = 0; k < 5; ++k) worst_rel = std::max(worst_rel, std::abs(got[k] - t[k]) / std::abs(t[k]));
    double worst_ec = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::mt19937_64 r(1000 + trial);
        const auto f = lineshapes::fit_fano(fano_spectrum(truth, 1.50, 1.60, 801, 0.01, r));
        worst_ec = std::max(worst_ec, std::abs(f.params.center_ev - truth.center_ev));
    }
    const double dt = seconds_since(t0);
    report("2", worst_rel <= 1e-4 && worst_ec <= 0.5e-3 && dt < 10.0,
           "Fano fit: noiseless max rel err = " + num(worst_rel) + " (<= 1e-4); 1% noise worst |dE_c| over 100 trials = " +
               num(worst_ec * 1e3) + " meV (<= 0.5); " + num(dt, 3) + " s (< 10 s)");
}

void criterion3() {
    const auto t0 = Clock::now();
    const double w = 8.0, fwhm = 100.0, sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const decay::Irf irf = decay::Irf::gaussian(w, fwhm);
    const int trials = 10;
    auto histogram = [&](std::mt19937_64& rng, const std::vector<std::pair<double, double>>& comps) {
        std::vector<double> counts;
        for (int i = 0; i < 750; ++i) {
            const double c = -2000.0 + w * i;
            double mean = 1.0;  // background per bin
            for (auto [amp, tau] : comps) mean += emg_bin(c, w, amp, tau, 0.0, sigma);
            counts.push_back(static_cast<double>(std::poisson_distribution<long>(mean)(rng)));
        }
        return decay::DecayHistogram::uniform(-2000.0, w, counts);
    };
    auto bi_errors = [&](std::mt19937_64& rng) {
        const auto fb = decay::fit_lifetime(histogram(rng, {{0.5e5 / 230.0, 230.0}, {0.5e5 / 120.0, 120.0}}), irf,
                                            decay::DecayKind::bi_exp);
        const int short_one = fb.model.tau1 < fb.model.tau2 ? 0 : 1;
        const double lo = std::min(fb.model.tau1, fb.model.tau2), hi = std::max(fb.model.tau1, fb.model.tau2);
        return std::tuple{std::abs(hi / 230.0 - 1.0), std::abs(lo / 120.0 - 1.0), fb.tau_error(short_one) / lo};
    };
    // the stated dataset: one realization per model at a fixed seed
    std::mt19937_64 rng3(3);
    const auto f1 = decay::fit_lifetime(histogram(rng3, {{1e5 / 230.0, 230.0}}), irf, decay::DecayKind::single_exp);
    const double err1 = std::abs(f1.model.tau1 / 230.0 - 1.0);
    const auto [err_x, err_xx, sigma_xx] = bi_errors(rng3);
    // spread over further seeds, shown alongside
    double worst1 = 0.0;
    int bi_out = 0;
    for (int s = 0; s < trials; ++s) {
        std::mt19937_64 rng(230 + s);
        const auto f = decay::fit_lifetime(histogram(rng, {{1e5 / 230.0, 230.0}}), irf, decay::DecayKind::single_exp);
        worst1 = std::max(worst1, std::abs(f.model.tau1 / 230.0 - 1.0));
        const auto [ex, exx, sxx] = bi_errors(rng);
        (void)sxx;
        if (ex > 0.08 || exx > 0.08) ++bi_out;
    }
    const double dt = seconds_since(t0);
    report("3", err1 <= 0.05 && worst1 <= 0.05 && err_x <= 0.08 && err_xx <= 0.08 && dt < 30.0,
           "lifetime vs analytic EMG, 1e5 counts, 100 ps IRF: single 230 ps err " + num(100 * err1, 3) +
               "% (<= 5%, worst over " + std::to_string(trials) + " more seeds " + num(100 * worst1, 3) +
               "%); bi 230 ps " + num(100 * err_x, 3) + "% / 120 ps " + num(100 * err_xx, 3) +
               "% (<= 8%; " + std::to_string(bi_out) + "/" + std::to_string(trials) +
               " more seeds exceed 8%, fitted sigma(tau_XX) " + num(100 * sigma_xx, 2) + "%); " + num(dt, 3) + " s (< 30 s)");
}

void criterion4() {
    const auto p = decay::purcell_factor(230.0, 53.0, 0.0, 2.0);
    const double expected_err = p.value * 2.0 / 53.0;
    bool identity = true;
    for (double tau : {1.0, 53.0, 120.0, 230.0, 1e4}) identity = identity && decay::purcell_factor(tau, tau).value == 1.0;
    const bool pass = p.value >= 4.1 && p.value <= 4.6 && std::abs(p.uncertainty - expected_err) <= 1e-12 &&
                      std::abs(p.value - 4.3) <= 0.2 && identity;
    report("4", pass,
           "F_P(230, 53(2)) = " + num(p.value, 4) + " +- " + num(p.uncertainty, 2) + " (in [4.1, 4.6], expected 4.3 +- 0.2); " +
               "F_P(tau, tau) == 1 exactly: " + (identity ? "yes" : "no"));
}

void criterion5() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(5);
    correlation::CombSpec spec;
    spec.center_ratio = 0.030;
    const auto built = correlation::g2_zero(correlation::synthesize_comb(spec, rng, false));
    const auto noisy = correlation::g2_zero(correlation::synthesize_comb(spec, rng, true));
    correlation::CombSpec flat = spec;
    flat.center_ratio = 1.0;
    const auto fb = correlation::g2_zero(correlation::synthesize_comb(flat, rng, false));
    const auto fn = correlation::g2_zero(correlation::synthesize_comb(flat, rng, true));
    const double dt = seconds_since(t0);
    const bool pass = std::abs(built.g2_0 - 0.030) <= 1e-6 && built.uncertainty >= 0.0015 &&
                      built.uncertainty <= 0.0025 && std::abs(noisy.g2_0 - 0.030) <= 3.0 * noisy.uncertainty &&
                      std::abs(fb.g2_0 - 1.0) <= 1e-6 && std::abs(fn.g2_0 - 1.0) <= 3.0 * fn.uncertainty && dt < 1.0;
    report("5", pass,
           "g2(0) constructed 0.030 -> " + num(built.g2_0, 6) + " +- " + num(built.uncertainty, 2) +
               " (err in [0.0015, 0.0025]); Poisson draw " + num(noisy.g2_0, 4) + " +- " + num(noisy.uncertainty, 2) +
               "; flat comb " + num(fb.g2_0, 6) + ", Poisson " + num(fn.g2_0, 4) + " +- " + num(fn.uncertainty, 2) +
               "; " + num(dt, 3) + " s (< 1 s)");
}

void criterion6() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const double fg = 1e-3 * std::pow(10.0, -1.0 + 2.0 * i / 9.0);
            const double fl = 1e-3 * std::pow(10.0, -1.0 + 2.0 * j / 9.0);
            const double sigma = fg / (2.0 * std::sqrt(2.0 * std::log(2.0)));
            const double numeric = numeric_fwhm(sigma, 0.5 * fl);
            worst = std::max(worst, std::abs(lineshapes::voigt_fwhm(fg, fl) - numeric) / numeric);
        }
    const double dt = seconds_since(t0);
    report("6", worst <= 5e-4 && dt < 30.0,
           "Voigt FWHM approximation vs bisected half maximum, 10x10 grid over 0.1..10 meV: worst rel err = " +
               num(worst, 3) + " (<= 5e-4); " + num(dt, 3) + " s (< 30 s)");
}

void criterion7() {
    std::mt19937_64 rng(7);
    std::vector<double> d;
    for (int i = 0; i <= 40; ++i) d.push_back(10.0 * i);
    double worst_g = 0.0, worst_l = 0.0;
    for (int k = 0; k < 50; ++k) {
        const auto f = coherence::fit_coherence(coherence::synthesize_visibility_trace(80.0, 150.0, d, 0.02, rng));
        worst_g = std::max(worst_g, std::abs(f.result.t_g_ps / 80.0 - 1.0));
        worst_l = std::max(worst_l, std::abs(f.result.t_l_ps / 150.0 - 1.0));
    }
    const auto g = coherence::fit_coherence(coherence::synthesize_visibility_trace(
        80.0, 1e12, d, 0.0, rng));
    const double ratio = g.result.f_v_ev / g.result.f_g_ev;
    report("7", worst_g <= 0.05 && worst_l <= 0.05 && std::abs(ratio - 1.0) <= 0.01,
           "coherence (t_G 80, t_L 150 ps, 2% noise, 50 trials): worst t_G " + num(100 * worst_g, 3) + "%, t_L " +
               num(100 * worst_l, 3) + "% (<= 5%); pure Gaussian f_V/f_G = " + num(ratio, 6) + " (within 1%)");
}

void criterion8(double sensitivity, double sensitivity_err) {
    std::mt19937_64 rng(8);
    const etch::EtchSynthSpec spec;  // 10 devices, 6 cycles, 5.1 meV, Q slope -2.6
    const auto series = etch::synthesize_etch_series(spec, rng);
    const auto shift = etch::fit_shift_per_cycle(series);
    const auto q = etch::fit_q_trend(series);
    const auto depth = etch::estimate_removal_depth(2.6, sensitivity, 0.0, sensitivity_err);
    const double slope_mev = shift.slope_ev.value * 1e3;
    report("8", std::abs(slope_mev - 5.1) <= 0.5 && std::abs(depth.value - 0.9) <= 0.3 &&
                    std::abs(q.slope.value + 2.6) <= 0.5,
           "etch: slope " + num(slope_mev, 4) + " meV/cycle (5.1 +- 0.5); removal 2.6 nm / " + num(sensitivity, 4) +
               " nm/nm = " + num(depth.value, 3) + " nm/cycle (0.9 +- 0.3); Q trend " + num(q.slope.value, 3) +
               "/cycle (-2.6 +- 0.5)");
}

void criterion9a() {
    using namespace fdtd;
    const double lambda = 800.0, dx = lambda / 20.0, L = 10.0 * lambda, pi = PhysicalConstants::pi;
    const Scene vac = make_bulk_scene(1.0, L, 2.0 * L, L);
    Solver s(vac, dx, 0.95, Boundaries{Boundary::mirror, Boundary::cpml, Boundary::cpml, Boundary::cpml});
    const double w = 2.0 * pi * PhysicalConstants::c_m_s / (lambda * 1e-9);
    s.set_frequencies({w}, 1);
    const int jc = s.j_of(L), i1 = s.i_of(3.0 * lambda), i2 = s.i_of(8.0 * lambda);
    const int g = s.add_dft_group(Component::ez, {s.idx(i1, jc), s.idx(i2, jc)});
    s.add_point_source(0, jc, Pulse::from_band(800.0, 200.0));
    RunControl rc;
    rc.max_steps = 20000;
    s.run(rc);
    const double r1 = s.x_nm(i1) * 1e-9, r2 = s.x_nm(i2) * 1e-9;
    const double measured = std::arg(s.dft(g)[1] / s.dft(g)[0]);
    // line source in 2D radiates H0(1)(k r)
    auto hankel_phase = [&](double k) {
        const std::complex<double> h1(std::cyl_bessel_j(0.0, k * r1), std::cyl_neumann(0.0, k * r1));
        const std::complex<double> h2(std::cyl_bessel_j(0.0, k * r2), std::cyl_neumann(0.0, k * r2));
        return std::arg(h2 / h1);
    };
    const double k0 = w / PhysicalConstants::c_m_s;
    const double dphi = std::remainder(measured - hankel_phase(k0), 2.0 * pi);
    const double k_num = k0 + dphi / (r2 - r1);
    const double err = std::abs(k0 / k_num - 1.0);
    report("9a", err < 0.005,
           "vacuum phase velocity error at 20 cells/lambda = " + num(100 * err, 3) + "% (< 0.5%)");
}

void criterion9b() {
    using namespace fdtd;
    const double dx = 11.0, n = 3.3;
    Pulse p;
    p.omega0 = 1.55 / PhysicalConstants::hbar_ev_s;
    p.tau = 2e-15;
    p.t0 = 6.0 * p.tau;
    auto run = [&](double half_cells, long steps, std::vector<double>& side, std::vector<double>& corner) {
        const double half = half_cells * dx;
        const Scene sc = make_bulk_scene(n, half, 2.0 * half, half);
        Solver s(sc, dx, 0.95, Boundaries{Boundary::cpml, Boundary::cpml, Boundary::cpml, Boundary::cpml});
        const int ic = s.i_of(0.0), jc = s.j_of(half);
        const int a = s.add_probe(Component::ez, s.idx(ic + 56, jc));
        const int b = s.add_probe(Component::ez, s.idx(ic + 56, jc + 56));
        s.add_point_source(ic, jc, p);
        for (long k = 0; k < steps; ++k) s.step();
        side = s.probe(a);
        corner = s.probe(b);
    };
    std::vector<double> s_small, c_small, s_big, c_big;
    run(60.0, 1400, s_small, c_small);
    run(210.0, 1400, s_big, c_big);
    auto ratio_db = [](const std::vector<double>& a, const std::vector<double>& ref) {
        double d = 0.0, m = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            d = std::max(d, std::abs(a[k] - ref[k]));
            m = std::max(m, std::abs(ref[k]));
        }
        return 20.0 * std::log10(d / m);
    };
    const double side = ratio_db(s_small, s_big), corner = ratio_db(c_small, c_big);
    report("9b", side < -50.0 && corner < -50.0,
           "CPML reflection vs large-domain reference: side " + num(side, 3) + " dB, corner " + num(corner, 3) +
               " dB (< -50 dB)");
}

void criterion9c() {
    using namespace fdtd;
    const auto r = compute_purcell_spectrum(CbrGeometry{}, DipoleSpec{}, SimulationConfig{}, Scene::Kind::homogeneous);
    double worst = 0.0;
    for (double v : r.spectrum.intensity()) worst = std::max(worst, std::abs(v - 1.0));
    report("9c", worst <= 0.05,
           "homogeneous-medium Purcell spectrum, 161 energies: max |F_P - 1| = " + num(worst, 3) + " (<= 0.05)");
}

struct SweepOutcome {
    fdtd::SweepResult result;
    double seconds = 0.0;
};

void criterion9de(const SweepOutcome& s) {
    const auto& rows = s.result.rows;
    bool monotone = rows.size() == 15;
    std::vector<double> delta, q;
    for (std::size_t m = 0; m < rows.size(); ++m) {
        if (m > 0 && !(rows[m].ec_ev > rows[m - 1].ec_ev)) monotone = false;
        delta.push_back(rows[m].delta_nm);
        q.push_back(rows[m].q);
    }
    const double q_slope = rows.size() > 1 ? ols_slope(delta, q) : 0.0;
    const double q_ratio = rows.empty() ? 0.0 : rows.back().q / rows.front().q;
    // mildly decreasing: negative trend and less than a factor of 2 lost
    const bool q_ok = q_slope < 0.0 && q_ratio >= 0.5 && q_ratio < 1.0;
    report("9d", monotone && q_ok && s.seconds < 1800.0,
           "14-step etch sweep: E_c " + num(rows.front().ec_ev, 5) + " -> " + num(rows.back().ec_ev, 5) +
               " eV strictly increasing: " + (monotone ? "yes" : "no") + "; Q " + num(rows.front().q, 4) + " -> " +
               num(rows.back().q, 4) + " (slope " + num(q_slope, 3) + "/nm < 0, end/start " + num(q_ratio, 3) +
               " >= 0.5); " + num(s.seconds, 4) + " s (< 1800 s)");

    double worst = 0.0;
    bool all = !rows.empty();
    for (const auto& r : rows) {
        const double d = std::abs(r.ec_ev - r.fp_peak_ev) / (0.5 * r.gamma_ev);
        worst = std::max(worst, d);
        if (d > 1.0) all = false;
    }
    report("9e", all,
           "reflectance-dip E_c vs Purcell peak, 15 geometries: worst |E_c - E_peak| / (Gamma_c/2) = " + num(worst, 3) +
               " (<= 1)");
}

void criterion9f(const SweepOutcome& s) {
    using namespace fdtd;
    SimulationConfig cfg;
    cfg.resolution = 30.0;
    const auto r = compute_reflectance_spectrum(CbrGeometry{}, BeamSpec{}, cfg);
    const auto f = fit_mode_dip(r.spectrum, s.result.rows.front().fp_peak_ev);
    const double e20 = s.result.rows.front().ec_ev, e30 = f.params.center_ev;
    const double rel = std::abs(e30 - e20) / e30;
    report("9f", rel < 0.002,
           "grid convergence of E_c (delta = 0): res 20 " + num(e20, 6) + " eV, res 30 " + num(e30, 6) + " eV, rel " +
               num(100 * rel, 3) + "% (< 0.2%)");
}

// ------------------------------------------------------------- criterion 10

struct CliRun {
    int code = 0;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cbr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void criterion10() {
    const fs::path root = fs::temp_directory_path() / "cbrtk_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string in = (root / "inputs").string();
    {
        std::ofstream c(root / "small.json");
        c << R"({"simulation": {"resolution": 10}, "geometry": {"n_rings": 2}})";
    }
    const std::string small = (root / "small.json").string();
    std::vector<std::string> problems;
    auto need = [&](const CliRun& r, const std::string& what) {
        if (r.code != 0) problems.push_back(what + ": exit " + std::to_string(r.code) + " " + r.err);
    };
    for (const char* kind : {"fano", "decay", "g2", "michelson", "etch"})
        need(cli({"synth", kind, "--seed", "10", "-o", in}), std::string("synth ") + kind);

    const std::vector<std::vector<std::string>> commands = {
        {"synth", "fano", "--seed", "42"},
        {"synth", "decay", "--seed", "42"},
        {"synth", "g2", "--seed", "42"},
        {"synth", "michelson", "--seed", "42"},
        {"synth", "etch", "--seed", "42"},
        {"fit-fano", in + "/fano_spectrum.csv"},
        {"lifetime", in + "/decay.csv", "--irf", in + "/decay_irf.csv", "--tau-ref", "230"},
        {"g2", in + "/g2.csv"},
        {"michelson", in + "/visibility.csv", "--tau", "53"},
        {"etch", in + "/etch_series.csv", "--sensitivity", "2.99"},
        {"--config", small, "simulate", "--observable", "reflectance", "--near", "1.41"},
        {"--config", small, "sweep", "--steps", "2"},
    };
    int compared = 0;
    for (std::size_t k = 0; k < commands.size(); ++k) {
        const fs::path a = root / ("a" + std::to_string(k)), b = root / ("b" + std::to_string(k));
        auto args = commands[k];
        auto args_a = args, args_b = args;
        args_a.insert(args_a.end(), {"-o", a.string()});
        args_b.insert(args_b.end(), {"-o", b.string(), "--jobs", "2"});
        need(cli(args_a), args[0]);
        need(cli(args_b), args[0]);
        if (!fs::exists(a)) continue;
        for (const auto& e : fs::directory_iterator(a)) {
            const auto ext = e.path().extension();
            if (ext != ".csv" && ext != ".json") continue;
            ++compared;
            if (slurp(e.path()) != slurp(b / e.path().filename()))
                problems.push_back(args[0] + " " + e.path().filename().string() + " differs");
        }
    }

    // stripe count independence of the stepping kernel
    using namespace fdtd;
    const CbrGeometry g;
    const SimulationConfig cfg;
    const Scene scene = make_scene(g, Scene::Kind::cbr, cfg.layout);
    auto stepped = [&](int threads) {
        Solver s(scene, cfg.dx_nm(scene.max_index), cfg.courant, Boundaries{}, cfg.pml);
        s.add_point_source(0, s.j_of(scene.emitter_y_nm), Pulse::from_band(780.0, 160.0));
        s.set_threads(threads);
        for (int n = 0; n < 3000; ++n) threads == 1 ? s.step_serial() : s.step_parallel();
        return s.ez();
    };
    const auto ref = stepped(1);
    double worst = 0.0, scale = 0.0;
    for (double v : ref) scale = std::max(scale, std::abs(v));
    for (int t : {2, 3, 4, 7}) {
        const auto e = stepped(t);
        for (std::size_t i = 0; i < e.size(); ++i) worst = std::max(worst, std::abs(e[i] - ref[i]) / scale);
    }
    std::string detail = std::to_string(compared) + " CSV/JSON outputs of " + std::to_string(commands.size()) +
                         " commands rerun with the same seed (--jobs 1 vs 2): " +
                         (problems.empty() ? "byte-identical" : std::to_string(problems.size()) + " problems") +
                         "; FDTD fields serial vs 2/3/4/7 stripes max rel diff " + num(worst, 3) + " (<= 1e-12)";
    for (const auto& p : problems) detail += "\n          " + p;
    report("10", problems.empty() && compared > 0 && worst <= 1e-12, detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite (%d OpenMP threads available)\n", omp_get_max_threads());
    guarded("1", criterion1);
    guarded("2", criterion2);
    guarded("3", criterion3);
    guarded("4", criterion4);
    guarded("5", criterion5);
    guarded("6", criterion6);
    guarded("7", criterion7);
    guarded("9a", criterion9a);
    guarded("9b", criterion9b);
    guarded("9c", criterion9c);

    std::optional<SweepOutcome> sweep;
    guarded("9d", [&] {
        const auto t0 = Clock::now();
        SweepOutcome s;
        s.result = fdtd::etch_sweep(fdtd::CbrGeometry{}, fdtd::sweep_deltas(14, 1.5), fdtd::SimulationConfig{}, {}, {},
                                    omp_get_max_threads());
        s.seconds = seconds_since(t0);
        sweep = std::move(s);
        criterion9de(*sweep);
    });
    if (sweep) {
        guarded("9f", [&] { criterion9f(*sweep); });
        guarded("8", [&] { criterion8(sweep->result.sensitivity, sweep->result.sensitivity_err); });
    } else {
        report("9e", false, "no sweep result");
        report("9f", false, "no sweep result");
        report("8", false, "no solver-derived sensitivity");
    }
    guarded("10", criterion10);

    std::printf("%d/%d passed\n", g_total - g_failed, g_total);
    return g_failed;
}
