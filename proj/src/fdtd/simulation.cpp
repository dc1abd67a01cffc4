#include "cbr/fdtd/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "cbr/constants.hpp"
#include "cbr/csv.hpp"
#include "cbr/errors.hpp"
#include "cbr/lineshapes.hpp"

namespace cbr::fdtd {

namespace {

using cplx = std::complex<double>;
constexpr double kHbar = PhysicalConstants::hbar_ev_s;
constexpr double kPi = PhysicalConstants::pi;
constexpr double kMu0 = PhysicalConstants::mu0;
constexpr double kEps0 = PhysicalConstants::eps0;
constexpr double kC = PhysicalConstants::c_m_s;

std::vector<double> omegas_of(const std::vector<double>& ev) {
    std::vector<double> w(ev.size());
    for (std::size_t f = 0; f < ev.size(); ++f) w[f] = ev[f] / kHbar;
    return w;
}

long step_cap(const SimulationConfig& cfg, double dt) {
    double mean = 0.0;
    for (double e : cfg.frequencies_ev) mean += e;
    mean /= static_cast<double>(cfg.frequencies_ev.size());
    const double period = 2.0 * kPi * kHbar / mean;
    return static_cast<long>(std::ceil(cfg.runtime_periods * period / dt));
}

RunControl control_for(const SimulationConfig& cfg, double dt) {
    RunControl c;
    c.max_steps = step_cap(cfg, dt);
    c.decay_threshold = cfg.decay_threshold;
    return c;
}

std::vector<std::size_t> rect_nodes(const Solver& s, int i0, int i1, int j0, int j1) {
    std::vector<std::size_t> n;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) n.push_back(s.idx(i, j));
    return n;
}

// Horizontal line between Ez rows j and j + 1, on the Hx row j + 1/2.
struct HLine {
    int j = 0, i0 = 0, i1 = 0;
    int g_lo = -1, g_hi = -1, g_hx = -1;

    void attach(Solver& s) {
        g_lo = s.add_dft_group(Component::ez, rect_nodes(s, i0, i1, j, j));
        g_hi = s.add_dft_group(Component::ez, rect_nodes(s, i0, i1, j + 1, j + 1));
        g_hx = s.add_dft_group(Component::hx, rect_nodes(s, i0, i1, j, j));
    }
    std::size_t count() const { return static_cast<std::size_t>(i1 - i0 + 1); }
    cplx ez(const Solver& s, std::size_t q, std::size_t f) const {
        const std::size_t nf = s.n_freq();
        return 0.5 * (s.dft(g_lo)[q * nf + f] + s.dft(g_hi)[q * nf + f]);
    }
    cplx hx(const Solver& s, std::size_t q, std::size_t f) const { return s.dft(g_hx)[q * s.n_freq() + f]; }
    double weight(const Solver& s, std::size_t q) const {
        return (s.mirror() && i0 + static_cast<int>(q) == 0) ? 0.5 : 1.0;
    }
    // upward flux, S_y = 1/2 Re(Ez Hx*)
    double flux(const Solver& s, std::size_t f) const {
        double p = 0.0;
        for (std::size_t q = 0; q < count(); ++q) p += weight(s, q) * 0.5 * std::real(ez(s, q, f) * std::conj(hx(s, q, f)));
        return p * s.dx();
    }
};

// Vertical line between Ez columns i and i + 1, on the Hy column i + 1/2.
struct VLine {
    int i = 0, j0 = 0, j1 = 0;
    int g_lo = -1, g_hi = -1, g_hy = -1;

    void attach(Solver& s) {
        g_lo = s.add_dft_group(Component::ez, rect_nodes(s, i, i, j0, j1));
        g_hi = s.add_dft_group(Component::ez, rect_nodes(s, i + 1, i + 1, j0, j1));
        g_hy = s.add_dft_group(Component::hy, rect_nodes(s, i, i, j0, j1));
    }
    // flux in +x, S_x = -1/2 Re(Ez Hy*)
    double flux(const Solver& s, std::size_t f) const {
        const std::size_t nf = s.n_freq();
        double p = 0.0;
        for (std::size_t q = 0; q <= static_cast<std::size_t>(j1 - j0); ++q) {
            const cplx e = 0.5 * (s.dft(g_lo)[q * nf + f] + s.dft(g_hi)[q * nf + f]);
            p += -0.5 * std::real(e * std::conj(s.dft(g_hy)[q * nf + f]));
        }
        return p * s.dx();
    }
};

struct Box {
    HLine top, bottom;
    VLine right, left;
    bool has_left = false;

    Box(Solver& s, int ic, int jc, int h) {
        const int ia = s.mirror() ? std::max(0, ic - h) : ic - h;
        const int ib = ic + h;
        if (ia < 0 || ib + 1 > s.i_hi() || jc - h - 1 < s.j_lo() || jc + h + 1 > s.j_hi())
            throw DomainError("flux box around the dipole leaves the grid interior");
        top = {jc + h, ia, ib};
        bottom = {jc - h - 1, ia, ib};
        right = {ib, jc - h, jc + h};
        has_left = !(s.mirror() && ia == 0);
        left = {ia - 1, jc - h, jc + h};
        top.attach(s);
        bottom.attach(s);
        right.attach(s);
        if (has_left) left.attach(s);
    }
    double power(const Solver& s, std::size_t f) const {
        double p = top.flux(s, f) - bottom.flux(s, f) + right.flux(s, f);
        if (has_left) p -= left.flux(s, f);
        return p;
    }
};

// |E_far(theta)|^2 up to a constant from an air-side line: the upward part of
// the plane-wave spectrum times cos(theta).
std::vector<double> far_field(const Solver& s, const HLine& line, std::size_t f, const std::vector<double>& theta) {
    const double w = s.omegas()[f];
    const double k0 = w / kC;
    const double eta0 = kMu0 * kC;
    const std::size_t n = line.count();
    std::vector<double> xs(n);
    std::vector<cplx> e(n), h(n);
    for (std::size_t q = 0; q < n; ++q) {
        xs[q] = s.x_nm(line.i0 + static_cast<int>(q)) * 1e-9;
        e[q] = line.ez(s, q, f);
        h[q] = line.hx(s, q, f);
    }
    std::vector<double> out(theta.size());
    for (std::size_t a = 0; a < theta.size(); ++a) {
        const double kx = k0 * std::sin(theta[a]);
        cplx E = 0.0, H = 0.0;
        for (std::size_t q = 0; q < n; ++q) {
            cplx basis;
            if (s.mirror())
                basis = 2.0 * line.weight(s, q) * std::cos(kx * xs[q]);
            else
                basis = std::polar(1.0, -kx * xs[q]);
            E += basis * e[q];
            H += basis * h[q];
        }
        const cplx up = 0.5 * (std::cos(theta[a]) * E + eta0 * H);
        out[a] = std::norm(up * s.dx());
    }
    return out;
}

std::vector<double> theta_grid(bool mirror) {
    const int n = 361;
    std::vector<double> t;
    const double lo = mirror ? 0.0 : -0.5 * kPi;
    const int count = mirror ? n : 2 * n - 1;
    for (int k = 0; k < count; ++k) t.push_back(lo + (0.5 * kPi - lo) * k / (count - 1));
    return t;
}

// Monitor frequencies must lie inside +-3 spectral sigma of the pulse (the
// nominal band is +-2 sigma), where the source power is above ~1e-4 of its peak.
void check_band(const Pulse& p, const std::vector<double>& ev, const std::string& what) {
    const double sigma = 1.0 / p.tau;
    for (double e : ev) {
        if (std::abs(e / kHbar - p.omega0) > 3.0 * sigma)
            throw ValidationError("DFT frequency outside the " + what + " source bandwidth",
                                  "E = " + io::format_double(e) + " eV, source " +
                                      io::format_double(kHbar * (p.omega0 - 3.0 * sigma)) + " - " +
                                      io::format_double(kHbar * (p.omega0 + 3.0 * sigma)) + " eV");
    }
}

Boundaries boundaries_for(const DipoleSpec& d, Scene::Kind kind = Scene::Kind::cbr) {
    Boundaries bc;
    if (d.x_nm != 0.0) bc.left = Boundary::cpml;
    // the uniform medium has no metal backing to terminate on
    if (kind == Scene::Kind::homogeneous) bc.bottom = Boundary::cpml;
    return bc;
}

std::string fmt(double v) { return io::format_double(v); }

spectra::Spectrum energy_spectrum(const std::vector<double>& ev, const std::vector<double>& y, const std::string& label) {
    return spectra::Spectrum(ev, y, spectra::AxisKind::energy_ev, label);
}

}  // namespace

std::vector<double> SimulationConfig::default_frequencies_ev() {
    std::vector<double> f(161);
    for (int k = 0; k < 161; ++k) f[static_cast<std::size_t>(k)] = 1.36 + 0.34 * k / 160.0;
    return f;
}

void SimulationConfig::validate() const {
    if (!(resolution >= 4.0) || !std::isfinite(resolution)) throw ValidationError("resolution must be at least 4 cells per wavelength");
    if (!(courant > 0.0 && courant < 1.0)) throw ValidationError("courant factor must lie in (0, 1)");
    if (!(runtime_periods > 0.0)) throw ValidationError("runtime must be positive");
    if (!(decay_threshold > 0.0 && decay_threshold < 1.0)) throw ValidationError("decay threshold must lie in (0, 1)");
    if (pml.cells < 8) throw ValidationError("PML must be at least 8 cells thick");
    if (!(pml.order >= 1.0) || !(pml.sigma_factor > 0.0) || !(pml.kappa_max >= 1.0) || !(pml.alpha_factor >= 0.0))
        throw ValidationError("invalid PML grading");
    if (frequencies_ev.empty()) throw ValidationError("no DFT frequencies");
    for (double e : frequencies_ev)
        if (!(e > 0.0) || !std::isfinite(e)) throw ValidationError("DFT frequencies must be positive");
    if (dft_stride < 0) throw ValidationError("dft_stride must be >= 0");
    if (polarization == Polarization::te)
        throw ValidationError("TE polarization is not implemented by this solver", "use polarization TM");
    if (!(monitor_gap_nm > 0.0)) throw ValidationError("monitor gap must be positive");
    if (!(na > 0.0 && na <= 1.0)) throw ValidationError("NA must lie in (0, 1]");
    if (box_half_cells < 1) throw ValidationError("flux box half size must be at least one cell");
    if (!(layout.margin_nm >= 0.0) || !(layout.air_nm > 0.0)) throw ValidationError("invalid scene layout");
}

double SimulationConfig::dx_nm(double max_index) const {
    const double e_max = *std::max_element(frequencies_ev.begin(), frequencies_ev.end());
    return PhysicalConstants::hc_ev_nm / e_max / (max_index * resolution);
}

int SimulationConfig::stride_for(double dt) const {
    if (dft_stride > 0) return dft_stride;
    const double e_max = *std::max_element(frequencies_ev.begin(), frequencies_ev.end());
    const double period = 2.0 * kPi * kHbar / e_max;
    return std::max(1, static_cast<int>(std::floor(period / (20.0 * dt))));
}

nlohmann::json to_json(const SimulationConfig& c) {
    nlohmann::json j;
    j["resolution"] = c.resolution;
    j["courant"] = c.courant;
    j["runtime_periods"] = c.runtime_periods;
    j["decay_threshold"] = c.decay_threshold;
    j["pml"] = {{"cells", c.pml.cells},
                {"order", c.pml.order},
                {"sigma_factor", c.pml.sigma_factor},
                {"kappa_max", c.pml.kappa_max},
                {"alpha_factor", c.pml.alpha_factor}};
    j["frequencies_ev"] = c.frequencies_ev;
    j["dft_stride"] = c.dft_stride;
    j["polarization"] = c.polarization == Polarization::tm ? "TM" : "TE";
    j["layout"] = {{"margin_nm", c.layout.margin_nm}, {"air_nm", c.layout.air_nm}};
    j["monitor_gap_nm"] = c.monitor_gap_nm;
    j["na"] = c.na;
    j["box_half_cells"] = c.box_half_cells;
    j["threads"] = c.threads;
    return j;
}

SimulationConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("simulation config must be a JSON object");
    SimulationConfig c;
    try {
        c.resolution = j.value("resolution", c.resolution);
        c.courant = j.value("courant", c.courant);
        c.runtime_periods = j.value("runtime_periods", c.runtime_periods);
        c.decay_threshold = j.value("decay_threshold", c.decay_threshold);
        if (j.contains("pml")) {
            const auto& p = j.at("pml");
            c.pml.cells = p.value("cells", c.pml.cells);
            c.pml.order = p.value("order", c.pml.order);
            c.pml.sigma_factor = p.value("sigma_factor", c.pml.sigma_factor);
            c.pml.kappa_max = p.value("kappa_max", c.pml.kappa_max);
            c.pml.alpha_factor = p.value("alpha_factor", c.pml.alpha_factor);
        }
        if (j.contains("frequencies_ev")) {
            const auto& f = j.at("frequencies_ev");
            if (f.is_array()) {
                c.frequencies_ev = f.get<std::vector<double>>();
            } else {
                const double lo = f.at("min"), hi = f.at("max");
                const int n = f.at("count");
                if (n < 1) throw ValidationError("frequency count must be positive");
                c.frequencies_ev.assign(static_cast<std::size_t>(n), lo);
                for (int k = 0; k < n; ++k)
                    c.frequencies_ev[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
            }
        }
        c.dft_stride = j.value("dft_stride", c.dft_stride);
        const std::string pol = j.value("polarization", std::string("TM"));
        if (pol == "TM" || pol == "tm")
            c.polarization = Polarization::tm;
        else if (pol == "TE" || pol == "te")
            c.polarization = Polarization::te;
        else
            throw ValidationError("unknown polarization", pol);
        if (j.contains("layout")) {
            c.layout.margin_nm = j.at("layout").value("margin_nm", c.layout.margin_nm);
            c.layout.air_nm = j.at("layout").value("air_nm", c.layout.air_nm);
        }
        c.monitor_gap_nm = j.value("monitor_gap_nm", c.monitor_gap_nm);
        c.na = j.value("na", c.na);
        c.box_half_cells = j.value("box_half_cells", c.box_half_cells);
        c.threads = j.value("threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid simulation config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const DipoleSpec& d) {
    nlohmann::json j{{"x_nm", d.x_nm}, {"center_nm", d.center_nm}, {"range_nm", d.range_nm}};
    j["y_nm"] = d.y_nm ? nlohmann::json(*d.y_nm) : nlohmann::json(nullptr);
    return j;
}

DipoleSpec dipole_from_json(const nlohmann::json& j) {
    DipoleSpec d;
    try {
        d.x_nm = j.value("x_nm", d.x_nm);
        if (j.contains("y_nm") && !j.at("y_nm").is_null()) d.y_nm = j.at("y_nm").get<double>();
        d.center_nm = j.value("center_nm", d.center_nm);
        d.range_nm = j.value("range_nm", d.range_nm);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid dipole spec: ") + e.what());
    }
    return d;
}

nlohmann::json to_json(const BeamSpec& b) {
    return {{"center_nm", b.center_nm}, {"range_nm", b.range_nm}, {"waist_nm", b.waist_nm}, {"height_nm", b.height_nm}};
}

BeamSpec beam_from_json(const nlohmann::json& j) {
    BeamSpec b;
    try {
        b.center_nm = j.value("center_nm", b.center_nm);
        b.range_nm = j.value("range_nm", b.range_nm);
        b.waist_nm = j.value("waist_nm", b.waist_nm);
        b.height_nm = j.value("height_nm", b.height_nm);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid beam spec: ") + e.what());
    }
    if (!(b.waist_nm > 0.0) || !(b.height_nm > 0.0)) throw ValidationError("beam waist and height must be positive");
    return b;
}

DipoleRun run_dipole(const Scene& scene, const Boundaries& bc, double dx_nm, const SimulationConfig& cfg,
                     const DipoleSpec& dipole, const DipoleRunOptions& options) {
    cfg.validate();
    Solver s(scene, dx_nm, cfg.courant, bc, cfg.pml);
    s.set_threads(cfg.threads);
    s.set_frequencies(omegas_of(cfg.frequencies_ev), cfg.stride_for(s.dt()));
    const double y = dipole.y_nm.value_or(scene.emitter_y_nm);
    const int ic = s.i_of(dipole.x_nm), jc = s.j_of(y);
    if (s.mirror() && dipole.x_nm != 0.0) throw DomainError("off-axis dipoles need a full domain");
    Box box(s, ic, jc, cfg.box_half_cells);

    HLine top;
    const bool want_top = options.far_field || options.flux_balance;
    if (want_top) {
        const int jt = s.j_of(scene.membrane_top_nm + cfg.monitor_gap_nm);
        if (jt + 1 >= s.j_hi()) throw DomainError("top monitor lies inside the PML");
        top = {jt, s.i_lo(), options.flux_balance ? s.i_hi() - 2 : s.i_hi()};
        top.attach(s);
    }
    VLine side;
    int g_metal = -1;
    std::vector<std::size_t> metal_nodes;
    if (options.flux_balance) {
        if (!s.mirror()) throw DomainError("flux balance is implemented for the mirrored domain");
        side = {top.i1, std::max(1, s.j_lo()), top.j};
        side.attach(s);
        for (int j = 1; j <= top.j; ++j)
            for (int i = 0; i <= top.i1; ++i)
                if (s.metal_fraction()[s.idx(i, j)] > 0.0) metal_nodes.push_back(s.idx(i, j));
        if (!metal_nodes.empty()) g_metal = s.add_dft_group(Component::ez, metal_nodes);
    }

    const Pulse pulse = Pulse::from_band(dipole.center_nm, dipole.range_nm);
    check_band(pulse, cfg.frequencies_ev, "dipole");
    s.add_point_source(ic, jc, pulse);
    DipoleRun out;
    out.stats = s.run(control_for(cfg, s.dt()));
    out.nx = s.nx();
    out.ny = s.ny();
    out.dx_nm = dx_nm;
    out.energies_ev = cfg.frequencies_ev;
    const std::size_t nf = s.n_freq();
    const auto theta = theta_grid(s.mirror());
    for (std::size_t f = 0; f < nf; ++f) {
        out.box_power.push_back(box.power(s, f));
        if (want_top) {
            out.top_power.push_back(top.flux(s, f));
        }
        if (options.far_field) {
            const auto I = far_field(s, top, f, theta);
            double total = 0.0;
            for (double v : I) total += v;
            if (!(total > 0.0) || !std::isfinite(total)) {
                throw TransformError("far field vanishes", "E = " + fmt(cfg.frequencies_ev[f]) + " eV");
            }
            out.angular_ratio.push_back(angular_ratio(theta, I, cfg.na));
        }
        if (options.flux_balance) {
            out.side_power.push_back(side.flux(s, f));
            double absorbed = 0.0;
            if (g_metal >= 0) {
                const double w = s.omegas()[f];
                const double im = std::imag(scene.metal.epsilon(cfg.frequencies_ev[f]));
                const auto& acc = s.dft(g_metal);
                for (std::size_t q = 0; q < metal_nodes.size(); ++q) {
                    const int i = static_cast<int>(metal_nodes[q] % static_cast<std::size_t>(s.nx()));
                    const double wt = i == 0 ? 0.5 : 1.0;
                    absorbed += wt * 0.5 * w * kEps0 * im * s.metal_fraction()[metal_nodes[q]] *
                                std::norm(acc[q * nf + f]);
                }
                absorbed *= s.dx() * s.dx();
            }
            out.absorbed_power.push_back(absorbed);
        }
    }
    return out;
}

DipoleRun bulk_reference(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg) {
    cfg.validate();
    const double dx = cfg.dx_nm(std::max(g.n_membrane, g.n_oxide));
    const int h = cfg.box_half_cells;
    const double half = (std::abs(dipole.x_nm) + (h + 12) * dx);
    const double height = 2.0 * (h + 12) * dx;
    Scene bulk = make_bulk_scene(g.n_membrane, half, height, 0.5 * height);
    Boundaries bc{Boundary::mirror, Boundary::cpml, Boundary::cpml, Boundary::cpml};
    if (dipole.x_nm != 0.0) bc.left = Boundary::cpml;
    DipoleSpec d = dipole;
    d.y_nm = 0.5 * height;
    DipoleRunOptions opt;
    opt.far_field = false;
    return run_dipole(bulk, bc, dx, cfg, d, opt);
}

std::vector<double> purcell_ratio(const DipoleRun& run, const DipoleRun& ref) {
    if (run.box_power.size() != ref.box_power.size()) throw ShapeError("reference run has a different frequency grid");
    std::vector<double> fp(run.box_power.size());
    double scale = 0.0;
    for (double p : ref.box_power) scale = std::max(scale, std::abs(p));
    for (std::size_t f = 0; f < fp.size(); ++f) {
        if (!(std::abs(ref.box_power[f]) > 1e-9 * scale) || !(scale > 0.0))
            throw NormalizationError("bulk reference power vanishes", "E = " + fmt(run.energies_ev[f]) + " eV");
        fp[f] = run.box_power[f] / ref.box_power[f];
        if (fp[f] < 0.0) throw NormalizationError("negative emitted power", "E = " + fmt(run.energies_ev[f]) + " eV");
    }
    return fp;
}

SpectrumResult compute_purcell_spectrum(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg,
                                        Scene::Kind kind, const DipoleRun* reference) {
    const Scene scene = make_scene(g, kind, cfg.layout);
    const double dx = cfg.dx_nm(std::max(g.n_membrane, g.n_oxide));
    DipoleRunOptions opt;
    opt.far_field = false;
    const DipoleRun run = run_dipole(scene, boundaries_for(dipole, kind), dx, cfg, dipole, opt);
    const DipoleRun ref = reference ? *reference : bulk_reference(g, dipole, cfg);
    SpectrumResult r{energy_spectrum(cfg.frequencies_ev, purcell_ratio(run, ref), "purcell"),
                     "bulk n=" + fmt(g.n_membrane) + " dx=" + fmt(dx) + "nm", {}};
    r.provenance = {{"observable", "purcell"}, {"scene", to_string(kind)}, {"steps", run.stats.steps},
                    {"decayed", run.stats.decayed}, {"reference_steps", ref.stats.steps}, {"dx_nm", dx},
                    {"grid", {run.nx, run.ny}}};
    return r;
}

BeamRun run_beam(const Scene& scene, const Boundaries& bc, double dx_nm, const SimulationConfig& cfg,
                 const BeamSpec& beam) {
    cfg.validate();
    if (!(beam.height_nm > cfg.monitor_gap_nm)) throw DomainError("beam source must sit above the reflectance monitor");
    Solver s(scene, dx_nm, cfg.courant, bc, cfg.pml);
    s.set_threads(cfg.threads);
    s.set_frequencies(omegas_of(cfg.frequencies_ev), cfg.stride_for(s.dt()));
    const int jm = s.j_of(scene.membrane_top_nm + cfg.monitor_gap_nm);
    const int js = s.j_of(scene.membrane_top_nm + beam.height_nm);
    if (js >= s.j_hi() || jm + 1 >= js) throw DomainError("beam source and monitor do not fit below the PML");
    HLine line{jm, s.i_lo(), s.i_hi()};
    line.attach(s);
    std::vector<double> amp(static_cast<std::size_t>(s.nx()), 0.0);
    for (int i = s.i_lo(); i <= s.i_hi(); ++i) {
        const double x = s.x_nm(i) / beam.waist_nm;
        amp[static_cast<std::size_t>(i)] = std::exp(-x * x);
    }
    const Pulse pulse = Pulse::from_band(beam.center_nm, beam.range_nm);
    check_band(pulse, cfg.frequencies_ev, "beam");
    s.add_line_source(js, amp, pulse);
    BeamRun out;
    out.stats = s.run(control_for(cfg, s.dt()));
    out.energies_ev = cfg.frequencies_ev;
    const auto theta = theta_grid(s.mirror());
    const double cut = std::asin(std::min(cfg.na, 1.0));
    for (std::size_t f = 0; f < s.n_freq(); ++f) {
        const auto I = far_field(s, line, f, theta);
        double p = 0.0;
        for (std::size_t a = 0; a + 1 < theta.size(); ++a) {
            const double lo = std::max(theta[a], -cut), hi = std::min(theta[a + 1], cut);
            if (hi <= lo) continue;
            auto at = [&](double t) { return I[a] + (I[a + 1] - I[a]) * (t - theta[a]) / (theta[a + 1] - theta[a]); };
            p += 0.5 * (at(lo) + at(hi)) * (hi - lo);
        }
        out.collected.push_back(p);
    }
    return out;
}

SpectrumResult compute_reflectance_spectrum(const CbrGeometry& g, const BeamSpec& beam, const SimulationConfig& cfg,
                                            Scene::Kind kind) {
    const double dx = cfg.dx_nm(std::max(g.n_membrane, g.n_oxide));
    const BeamRun run = run_beam(make_scene(g, kind, cfg.layout), Boundaries{}, dx, cfg, beam);
    const BeamRun ref = run_beam(make_scene(g, Scene::Kind::planar, cfg.layout), Boundaries{}, dx, cfg, beam);
    double scale = 0.0;
    for (double v : ref.collected) scale = std::max(scale, v);
    std::vector<double> r(run.collected.size());
    for (std::size_t f = 0; f < r.size(); ++f) {
        if (!(ref.collected[f] > 1e-9 * scale))
            throw NormalizationError("planar-stack reflectance vanishes", "E = " + fmt(cfg.frequencies_ev[f]) + " eV");
        r[f] = run.collected[f] / ref.collected[f];
    }
    SpectrumResult out{energy_spectrum(cfg.frequencies_ev, r, "relative reflectance"),
                       "planar stack d=" + fmt(g.membrane_nm) + "nm dx=" + fmt(dx) + "nm", {}};
    out.provenance = {{"observable", "reflectance"}, {"scene", to_string(kind)}, {"steps", run.stats.steps},
                      {"reference_steps", ref.stats.steps}, {"dx_nm", dx}, {"na", cfg.na}};
    return out;
}

DipoleObservables simulate_dipole(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg,
                                  const DipoleRun& ref) {
    const Scene scene = make_scene(g, Scene::Kind::cbr, cfg.layout);
    const double dx = cfg.dx_nm(std::max(g.n_membrane, g.n_oxide));
    DipoleObservables o{SpectrumResult{energy_spectrum({1.0}, {0.0}, ""), "", {}},
                        SpectrumResult{energy_spectrum({1.0}, {0.0}, ""), "", {}},
                        run_dipole(scene, boundaries_for(dipole), dx, cfg, dipole)};
    const auto fp = purcell_ratio(o.run, ref);
    std::vector<double> eta(fp.size());
    for (std::size_t f = 0; f < fp.size(); ++f) {
        const double T = o.run.top_power[f] / ref.box_power[f];
        eta[f] = std::max(0.0, o.run.angular_ratio[f] * T / fp[f]);
    }
    const std::string id = "bulk n=" + fmt(g.n_membrane) + " dx=" + fmt(dx) + "nm";
    const nlohmann::json prov = {{"scene", "cbr"}, {"steps", o.run.stats.steps}, {"decayed", o.run.stats.decayed},
                                 {"reference_steps", ref.stats.steps}, {"dx_nm", dx}, {"grid", {o.run.nx, o.run.ny}},
                                 {"na", cfg.na}};
    o.purcell = {energy_spectrum(cfg.frequencies_ev, fp, "purcell"), id, prov};
    o.purcell.provenance["observable"] = "purcell";
    o.extraction = {energy_spectrum(cfg.frequencies_ev, eta, "extraction efficiency"), id, prov};
    o.extraction.provenance["observable"] = "extraction";
    return o;
}

SpectrumResult compute_extraction_efficiency(const CbrGeometry& g, const DipoleSpec& dipole,
                                             const SimulationConfig& cfg, const DipoleRun* reference) {
    const DipoleRun ref = reference ? *reference : bulk_reference(g, dipole, cfg);
    return simulate_dipole(g, dipole, cfg, ref).extraction;
}

double angular_ratio(const std::vector<double>& theta, const std::vector<double>& I, double na) {
    if (theta.size() != I.size() || theta.size() < 2) throw ShapeError("angular grid and intensity differ in size");
    if (!(na > 0.0 && na <= 1.0)) throw DomainError("NA must lie in (0, 1]");
    const double cut = std::asin(na);
    double inside = 0.0, total = 0.0;
    for (std::size_t a = 0; a + 1 < theta.size(); ++a) {
        if (!(theta[a + 1] > theta[a])) throw DomainError("angles must be increasing");
        total += 0.5 * (I[a] + I[a + 1]) * (theta[a + 1] - theta[a]);
        const double lo = std::max(theta[a], -cut), hi = std::min(theta[a + 1], cut);
        if (hi <= lo) continue;
        auto at = [&](double t) { return I[a] + (I[a + 1] - I[a]) * (t - theta[a]) / (theta[a + 1] - theta[a]); };
        inside += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw TransformError("far-field norm vanishes");
    return inside / total;
}

Peak spectrum_peak(const spectra::Spectrum& in) {
    const spectra::Spectrum s = in.to_energy();
    const auto x = s.axis();
    const auto y = s.intensity();
    if (s.size() < 3) throw DataError("peak search needs at least three samples");
    const auto k = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    if (k == 0 || k + 1 == s.size()) return {x[k], y[k]};
    const double y0 = y[k - 1], y1 = y[k], y2 = y[k + 1];
    const double h = 0.5 * (x[k + 1] - x[k - 1]);
    const double den = y0 - 2.0 * y1 + y2;
    if (!(den < 0.0)) return {x[k], y1};
    const double u = 0.5 * (y0 - y2) / den;
    return {x[k] + u * h, y1 - 0.25 * (y0 - y2) * u};
}

lineshapes::FanoFit fit_mode_dip(const spectra::Spectrum& reflectance, double near_ev, double search_ev) {
    const spectra::Spectrum s = reflectance.to_energy();
    const double lo = s.axis().front(), hi = s.axis().back();
    if (!(near_ev > lo && near_ev < hi)) throw DomainError("mode energy lies outside the reflectance spectrum");
    const lineshapes::EnergyWindow first{std::max(lo, near_ev - search_ev), std::min(hi, near_ev + search_ev)};
    const auto coarse = lineshapes::fit_fano(s, first);
    const double c = coarse.params.center_ev, w = coarse.params.width_ev;
    const lineshapes::EnergyWindow second{std::max(lo, c - 5.0 * w), std::min(hi, c + 5.0 * w)};
    return lineshapes::fit_fano(s, second);
}

std::vector<double> sweep_deltas(int steps, double step_nm) {
    if (steps < 2) throw ParameterError("an etch sweep needs at least two steps");
    if (!(step_nm > 0.0)) throw ParameterError("etch step must be positive");
    std::vector<double> d;
    for (int k = 0; k <= steps; ++k) d.push_back(k * step_nm);
    return d;
}

SweepResult etch_sweep(const CbrGeometry& base, const std::vector<double>& deltas, const SimulationConfig& cfg,
                       const DipoleSpec& dipole, const BeamSpec& beam, int jobs) {
    cfg.validate();
    if (deltas.size() < 2) throw ParameterError("an etch sweep needs at least two steps");
    if (jobs < 1) throw ParameterError("jobs must be at least 1");
    for (double d : deltas) (void)build_geometry(base, d);

    SimulationConfig member = cfg;
    if (jobs > 1) member.threads = 1;
    const DipoleRun ref = bulk_reference(base, dipole, cfg);

    const auto n = static_cast<long>(deltas.size());
    std::vector<SweepRow> rows(deltas.size());
    std::vector<int> ok(deltas.size(), 0);
    std::vector<std::string> failure(deltas.size());
    SweepResult out;
    const auto empty = SpectrumResult{energy_spectrum({1.0}, {0.0}, ""), "", {}};
    out.reflectance.assign(deltas.size(), empty);
    out.purcell.assign(deltas.size(), empty);
    out.extraction.assign(deltas.size(), empty);

#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
    for (long m = 0; m < n; ++m) {
        const auto u = static_cast<std::size_t>(m);
        try {
            const CbrGeometry g = build_geometry(base, deltas[u]);
            const DipoleObservables dip = simulate_dipole(g, dipole, member, ref);
            const SpectrumResult refl = compute_reflectance_spectrum(g, beam, member);
            const Peak pk = spectrum_peak(dip.purcell.spectrum);
            const auto fano = fit_mode_dip(refl.spectrum, pk.energy_ev);
            rows[u] = {deltas[u], fano.params.center_ev, fano.params.width_ev, fano.quality(), fano.params.q,
                       pk.value, pk.energy_ev};
            out.reflectance[u] = refl;
            out.purcell[u] = dip.purcell;
            out.extraction[u] = dip.extraction;
            ok[u] = 1;
        } catch (const std::exception& e) {
            failure[u] = e.what();
        }
    }

    std::string done, failed;
    for (std::size_t u = 0; u < deltas.size(); ++u) {
        (ok[u] ? done : failed) += (ok[u] ? done : failed).empty() ? fmt(deltas[u]) : "," + fmt(deltas[u]);
    }
    if (!failed.empty()) {
        std::string why;
        for (std::size_t u = 0; u < deltas.size(); ++u)
            if (!ok[u]) {
                why = "delta=" + fmt(deltas[u]) + ": " + failure[u];
                break;
            }
        throw PartialResultError("etch sweep incomplete; completed delta_nm = [" + done + "], failed = [" + failed + "]",
                                 why);
    }
    out.rows = rows;

    // -d lambda_c / d delta by least squares
    const double nrow = static_cast<double>(rows.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& r : rows) {
        sx += r.delta_nm;
        sy += PhysicalConstants::hc_ev_nm / r.ec_ev;
    }
    const double mx = sx / nrow, my = sy / nrow;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& r : rows) {
        sxx += (r.delta_nm - mx) * (r.delta_nm - mx);
        sxy += (r.delta_nm - mx) * (PhysicalConstants::hc_ev_nm / r.ec_ev - my);
    }
    if (!(sxx > 0.0)) {
        out.sensitivity = 0.0;
        out.sensitivity_err = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double slope = sxy / sxx;
    double ss = 0.0;
    for (const auto& r : rows) {
        const double e = PhysicalConstants::hc_ev_nm / r.ec_ev - (my + slope * (r.delta_nm - mx));
        ss += e * e;
    }
    out.sensitivity = -slope;
    out.sensitivity_err = rows.size() > 2 ? std::sqrt(ss / (nrow - 2.0) / sxx) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
    out << "delta_nm,Ec_eV,Gamma_eV,Q,Fp_peak\n";
    for (const auto& row : r.rows)
        out << fmt(row.delta_nm) << ',' << fmt(row.ec_ev) << ',' << fmt(row.gamma_ev) << ',' << fmt(row.q) << ','
            << fmt(row.fp_peak) << '\n';
}

nlohmann::json sweep_report(const SweepResult& r) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows)
        j["rows"].push_back({{"delta_nm", row.delta_nm}, {"Ec_eV", row.ec_ev}, {"Gamma_eV", row.gamma_ev},
                             {"Q", row.q}, {"fano_q", row.fano_q}, {"Fp_peak", row.fp_peak},
                             {"Fp_peak_eV", row.fp_peak_ev}});
    j["sensitivity_nm_per_nm"] = r.sensitivity;
    j["sensitivity_err"] = std::isfinite(r.sensitivity_err) ? nlohmann::json(r.sensitivity_err) : nlohmann::json(nullptr);
    return j;
}

void write_field_dump(const std::string& stem, const Solver& s, Component c) {
    const auto& f = c == Component::ez ? s.ez() : c == Component::hx ? s.hx() : s.hy();
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw ParseError("cannot write field dump", stem + ".bin");
    for (double v : f) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xffu);
        bin.write(reinterpret_cast<const char*>(b), 8);
    }
    nlohmann::json side{{"component", c == Component::ez ? "Ez" : c == Component::hx ? "Hx" : "Hy"},
                        {"nx", s.nx()},
                        {"ny", s.ny()},
                        {"dx_nm", s.dx() * 1e9},
                        {"x0_nm", s.x_nm(0)},
                        {"y0_nm", s.y_nm(0)},
                        {"step", s.steps()},
                        {"time_s", s.time()},
                        {"dtype", "float64"},
                        {"endianness", "little"},
                        {"order", "row-major, x fastest"}};
    std::ofstream js(stem + ".json");
    if (!js) throw ParseError("cannot write field dump sidecar", stem + ".json");
    js << side.dump(2) << '\n';
}

std::vector<std::string> dump_dipole_fields(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg,
                                            Scene::Kind kind, const std::string& stem_prefix,
                                            std::optional<double> time_s) {
    cfg.validate();
    const Scene scene = make_scene(g, kind, cfg.layout);
    const double dx = cfg.dx_nm(std::max(g.n_membrane, g.n_oxide));
    Solver s(scene, dx, cfg.courant, boundaries_for(dipole, kind), cfg.pml);
    s.set_threads(cfg.threads);
    const Pulse pulse = Pulse::from_band(dipole.center_nm, dipole.range_nm);
    const double y = dipole.y_nm.value_or(scene.emitter_y_nm);
    if (s.mirror() && dipole.x_nm != 0.0) throw DomainError("off-axis dipoles need a full domain");
    s.add_point_source(s.i_of(dipole.x_nm), s.j_of(y), pulse);
    const double t = time_s.value_or(pulse.end_time());
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("snapshot time must be non-negative", fmt(t));
    const auto steps = static_cast<long>(std::ceil(t / s.dt()));
    if (steps > step_cap(cfg, s.dt())) throw DomainError("snapshot time exceeds the run time cap", fmt(t));
    for (long n = 0; n < steps; ++n) s.step();
    std::vector<std::string> stems;
    for (auto [c, name] : {std::pair{Component::ez, "ez"}, std::pair{Component::hx, "hx"}, std::pair{Component::hy, "hy"}}) {
        const std::string stem = stem_prefix + "_" + name;
        write_field_dump(stem, s, c);
        stems.push_back(stem);
    }
    return stems;
}

}  // namespace cbr::fdtd
