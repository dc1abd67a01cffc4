#include "cbr/fdtd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <omp.h>

#include "cbr/constants.hpp"
#include "cbr/errors.hpp"

namespace cbr::fdtd {

namespace {

constexpr double kC = PhysicalConstants::c_m_s;
constexpr double kEps0 = PhysicalConstants::eps0;
constexpr double kMu0 = PhysicalConstants::mu0;
constexpr double kHbar = PhysicalConstants::hbar_ev_s;

double overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

struct PmlCoef {
    double inv_kappa = 1.0, a = 0.0, b = 0.0;
};

PmlCoef pml_coef(double depth, const PmlSpec& p, double dx, double dt) {
    if (depth <= 0.0) return {};
    const double eta0 = std::sqrt(kMu0 / kEps0);
    const double u = std::min(depth / p.cells, 1.0);
    const double sigma = p.sigma_factor * 0.8 * (p.order + 1.0) / (eta0 * dx) * std::pow(u, p.order);
    const double kappa = 1.0 + (p.kappa_max - 1.0) * std::pow(u, p.order);
    const double omega_ref = 1.55 / kHbar;
    const double alpha = p.alpha_factor * kEps0 * omega_ref * (1.0 - u);
    PmlCoef c;
    c.inv_kappa = 1.0 / kappa;
    c.b = std::exp(-(sigma / kappa + alpha) * dt / kEps0);
    c.a = sigma > 0.0 ? sigma * (c.b - 1.0) / (kappa * (sigma + kappa * alpha)) : 0.0;
    return c;
}

}  // namespace

Pulse Pulse::from_band(double center_nm, double range_nm) {
    if (!(center_nm > 0.0) || !(range_nm > 0.0) || !(range_nm < 2.0 * center_nm))
        throw DomainError("pulse band must be positive and narrower than twice its centre");
    const double e_hi = PhysicalConstants::hc_ev_nm / (center_nm - 0.5 * range_nm);
    const double e_lo = PhysicalConstants::hc_ev_nm / (center_nm + 0.5 * range_nm);
    Pulse p;
    p.omega0 = 0.5 * (e_hi + e_lo) / kHbar;
    const double sigma_omega = 0.25 * (e_hi - e_lo) / kHbar;
    p.tau = 1.0 / sigma_omega;
    p.t0 = 6.0 * p.tau;
    return p;
}

double Pulse::value(double t) const {
    const double u = t - t0;
    const double env = std::exp(-0.5 * u * u / (tau * tau));
    // d/dt [env cos(w0 u)] scaled by 1 / w0
    return env * (-(u / (tau * tau)) * std::cos(omega0 * u) - omega0 * std::sin(omega0 * u)) / omega0;
}

Solver::Solver(const Scene& scene, double dx_nm, double courant, const Boundaries& bc, const PmlSpec& pml)
    : bc_(bc) {
    if (!(dx_nm > 0.0) || !std::isfinite(dx_nm)) throw DomainError("grid spacing must be positive");
    if (!(courant > 0.0)) throw DomainError("Courant factor must be positive");
    if (bc.right == Boundary::mirror || bc.top == Boundary::mirror || bc.bottom == Boundary::mirror)
        throw DomainError("mirror boundary is only available on the axis (left edge)");
    const bool any_pml = bc.left == Boundary::cpml || bc.right == Boundary::cpml || bc.bottom == Boundary::cpml ||
                         bc.top == Boundary::cpml;
    if (any_pml && pml.cells < 8) throw DomainError("PML must be at least 8 cells thick");

    dx_ = dx_nm * 1e-9;
    dt_ = courant * dx_ / (kC * std::sqrt(2.0));
    ch_ = dt_ / kMu0;
    const int P = pml.cells;
    const int half = static_cast<int>(std::ceil(scene.x_extent_nm / dx_nm - 1e-9));
    const int tall = static_cast<int>(std::ceil(scene.y_extent_nm / dx_nm - 1e-9));
    i0_ = bc.left == Boundary::cpml ? P + half : 0;
    j0_ = bc.bottom == Boundary::cpml ? P : 0;
    nx_ = i0_ + half + 1 + (bc.right == Boundary::cpml ? P : 0);
    ny_ = j0_ + tall + 1 + (bc.top == Boundary::cpml ? P : 0);
    il_ = bc.left == Boundary::cpml ? P : 0;
    ir_ = bc.right == Boundary::cpml ? nx_ - 1 - P : nx_ - 1;
    jb_ = bc.bottom == Boundary::cpml ? P : 0;
    jt_ = bc.top == Boundary::cpml ? ny_ - 1 - P : ny_ - 1;

    const std::size_t N = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
    eps_.assign(N, scene.background_eps);
    metal_.assign(N, 0.0);
    for (int j = 0; j < ny_; ++j) {
        const double y = y_nm(j);
        for (int i = 0; i < nx_; ++i) {
            const double x = x_nm(i);
            const double cell = dx_nm * dx_nm;
            double covered = 0.0, eps = 0.0, metal = 0.0;
            for (const Block& b : scene.blocks) {
                const double f = overlap(x - 0.5 * dx_nm, x + 0.5 * dx_nm, b.rect.x0, b.rect.x1) *
                                 overlap(y - 0.5 * dx_nm, y + 0.5 * dx_nm, b.rect.y0, b.rect.y1) / cell;
                if (f <= 0.0) continue;
                covered += f;
                eps += f * b.eps;
                if (b.metal) metal += f;
            }
            const std::size_t k = idx(i, j);
            eps_[k] = eps + std::max(0.0, 1.0 - covered) * scene.background_eps;
            metal_[k] = metal;
        }
    }

    ez_.assign(N, 0.0);
    hx_.assign(N, 0.0);
    hy_.assign(N, 0.0);
    jd_.assign(N, 0.0);
    ce_.assign(N, 0.0);
    jk_.assign(N, 0.0);
    jb_coef_.assign(N, 0.0);
    row_metal_.assign(static_cast<std::size_t>(ny_), 0);
    const double wp = scene.metal.omega_p_ev / kHbar;
    const double gm = scene.metal.gamma_ev / kHbar;
    for (int j = 0; j < ny_; ++j) {
        for (int i = 0; i < nx_; ++i) {
            const std::size_t k = idx(i, j);
            const bool pec = j == 0 || j == ny_ - 1 || i == nx_ - 1 || (i == 0 && !mirror());
            ce_[k] = pec ? 0.0 : dt_ / (kEps0 * eps_[k]);
            if (metal_[k] > 0.0 && scene.has_metal) {
                jk_[k] = (1.0 - 0.5 * gm * dt_) / (1.0 + 0.5 * gm * dt_);
                jb_coef_[k] = metal_[k] * kEps0 * wp * wp * dt_ / (1.0 + 0.5 * gm * dt_);
                row_metal_[static_cast<std::size_t>(j)] = 1;
            }
        }
    }

    // CPML profiles, depth in cells measured from the interior edge
    auto depth = [](double pos, double lo, double hi, bool use_lo, bool use_hi) {
        double d = 0.0;
        if (use_lo) d = std::max(d, lo - pos);
        if (use_hi) d = std::max(d, pos - hi);
        return d;
    };
    const bool pl = bc.left == Boundary::cpml, pr = bc.right == Boundary::cpml;
    const bool pb = bc.bottom == Boundary::cpml, pt = bc.top == Boundary::cpml;
    kex_.resize(static_cast<std::size_t>(nx_));
    aex_ = bex_ = khx_ = ahx_ = bhx_ = kex_;
    for (int i = 0; i < nx_; ++i) {
        const auto e = pml_coef(depth(i, il_, ir_, pl, pr), pml, dx_, dt_);
        const auto h = pml_coef(depth(i + 0.5, il_, ir_, pl, pr), pml, dx_, dt_);
        const auto u = static_cast<std::size_t>(i);
        kex_[u] = e.inv_kappa, aex_[u] = e.a, bex_[u] = e.b;
        khx_[u] = h.inv_kappa, ahx_[u] = h.a, bhx_[u] = h.b;
        if ((pl && i < il_) || (pr && i > ir_)) pml_cols_e_.push_back(i);
        if ((pl && i + 0.5 < il_) || (pr && i + 0.5 > ir_)) pml_cols_h_.push_back(i);
    }
    key_.resize(static_cast<std::size_t>(ny_));
    aey_ = bey_ = khy_ = ahy_ = bhy_ = key_;
    pml_row_e_.assign(static_cast<std::size_t>(ny_), 0);
    pml_row_h_.assign(static_cast<std::size_t>(ny_), 0);
    for (int j = 0; j < ny_; ++j) {
        const auto e = pml_coef(depth(j, jb_, jt_, pb, pt), pml, dx_, dt_);
        const auto h = pml_coef(depth(j + 0.5, jb_, jt_, pb, pt), pml, dx_, dt_);
        const auto u = static_cast<std::size_t>(j);
        key_[u] = e.inv_kappa, aey_[u] = e.a, bey_[u] = e.b;
        khy_[u] = h.inv_kappa, ahy_[u] = h.a, bhy_[u] = h.b;
        pml_row_e_[u] = (pb && j < jb_) || (pt && j > jt_);
        pml_row_h_[u] = (pb && j + 0.5 < jb_) || (pt && j + 0.5 > jt_);
    }
    psi_ezx_.assign(N, 0.0);
    psi_ezy_.assign(N, 0.0);
    psi_hx_.assign(N, 0.0);
    psi_hy_.assign(N, 0.0);
    omega_.clear();
}

int Solver::i_of(double x) const {
    const int i = static_cast<int>(std::lround(x * 1e-9 / dx_)) + i0_;
    return std::clamp(i, 0, nx_ - 1);
}

int Solver::j_of(double y) const {
    const int j = static_cast<int>(std::lround(y * 1e-9 / dx_)) + j0_;
    return std::clamp(j, 0, ny_ - 1);
}

double Solver::x_nm(int i) const { return static_cast<double>(i - i0_) * dx_ * 1e9; }
double Solver::y_nm(int j) const { return static_cast<double>(j - j0_) * dx_ * 1e9; }

void Solver::add_point_source(int i, int j, const Pulse& p, double amplitude) {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) throw DomainError("source outside the grid");
    sources_.push_back({idx(i, j), amplitude, p});
    source_end_ = std::max(source_end_, p.end_time());
}

void Solver::add_line_source(int j, const std::vector<double>& amp, const Pulse& p) {
    if (amp.size() != static_cast<std::size_t>(nx_)) throw ShapeError("line source needs one amplitude per column");
    for (int i = 0; i < nx_; ++i)
        if (amp[static_cast<std::size_t>(i)] != 0.0) add_point_source(i, j, p, amp[static_cast<std::size_t>(i)]);
}

void Solver::set_frequencies(const std::vector<double>& omega, int stride) {
    if (!groups_.empty()) throw StateError("frequencies must be set before adding DFT groups");
    if (stride < 1) throw DomainError("DFT stride must be at least 1");
    omega_ = omega;
    stride_ = stride;
}

int Solver::add_dft_group(Component c, const std::vector<std::size_t>& nodes) {
    if (omega_.empty()) throw StateError("set DFT frequencies first");
    for (std::size_t k : nodes)
        if (k >= ez_.size()) throw DomainError("DFT node outside the grid");
    groups_.push_back({c, nodes, std::vector<std::complex<double>>(nodes.size() * omega_.size())});
    return static_cast<int>(groups_.size()) - 1;
}

const std::vector<std::complex<double>>& Solver::dft(int g) const {
    return groups_.at(static_cast<std::size_t>(g)).acc;
}

int Solver::add_probe(Component c, std::size_t node) {
    if (node >= ez_.size()) throw DomainError("probe outside the grid");
    probes_.push_back({c, node, {}});
    return static_cast<int>(probes_.size()) - 1;
}

const std::vector<double>& Solver::probe(int id) const { return probes_.at(static_cast<std::size_t>(id)).values; }

void Solver::update_h_rows(int j0, int j1) {
    const double inv_dx = 1.0 / dx_;
    for (int j = j0; j < j1; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const std::size_t row = idx(0, j);
        if (j < ny_ - 1) {
            const std::size_t up = idx(0, j + 1);
            const double ik = khy_[uj];
            for (int i = 0; i < nx_; ++i) {
                const double d = (ez_[up + static_cast<std::size_t>(i)] - ez_[row + static_cast<std::size_t>(i)]) * inv_dx;
                hx_[row + static_cast<std::size_t>(i)] -= ch_ * d * ik;
            }
            if (pml_row_h_[uj]) {
                for (int i = 0; i < nx_; ++i) {
                    const std::size_t k = row + static_cast<std::size_t>(i);
                    const double d = (ez_[up + static_cast<std::size_t>(i)] - ez_[k]) * inv_dx;
                    psi_hx_[k] = bhy_[uj] * psi_hx_[k] + ahy_[uj] * d;
                    hx_[k] -= ch_ * psi_hx_[k];
                }
            }
        }
        for (int i = 0; i < nx_ - 1; ++i) {
            const std::size_t k = row + static_cast<std::size_t>(i);
            const double d = (ez_[k + 1] - ez_[k]) * inv_dx;
            hy_[k] += ch_ * d * khx_[static_cast<std::size_t>(i)];
        }
        for (int i : pml_cols_h_) {
            if (i >= nx_ - 1) continue;
            const std::size_t k = row + static_cast<std::size_t>(i);
            const double d = (ez_[k + 1] - ez_[k]) * inv_dx;
            psi_hy_[k] = bhx_[static_cast<std::size_t>(i)] * psi_hy_[k] + ahx_[static_cast<std::size_t>(i)] * d;
            hy_[k] += ch_ * psi_hy_[k];
        }
    }
}

void Solver::update_e_rows(int j0, int j1) {
    const double inv_dx = 1.0 / dx_;
    const int istart = mirror() ? 0 : 1;
    for (int j = std::max(j0, 1); j < std::min(j1, ny_ - 1); ++j) {
        const auto uj = static_cast<std::size_t>(j);
        const std::size_t row = idx(0, j);
        const std::size_t down = idx(0, j - 1);
        const double iky = key_[uj];
        auto dhy = [&](int i) {
            const std::size_t k = row + static_cast<std::size_t>(i);
            return (i == 0 ? 2.0 * hy_[k] : hy_[k] - hy_[k - 1]) * inv_dx;
        };
        auto dhx = [&](int i) {
            return (hx_[row + static_cast<std::size_t>(i)] - hx_[down + static_cast<std::size_t>(i)]) * inv_dx;
        };
        if (row_metal_[uj]) {
            for (int i = istart; i < nx_ - 1; ++i) {
                const std::size_t k = row + static_cast<std::size_t>(i);
                jd_[k] = jk_[k] * jd_[k] + jb_coef_[k] * ez_[k];
                const double curl = dhy(i) * kex_[static_cast<std::size_t>(i)] - dhx(i) * iky;
                ez_[k] += ce_[k] * (curl - jd_[k]);
            }
        } else {
            for (int i = istart; i < nx_ - 1; ++i) {
                const std::size_t k = row + static_cast<std::size_t>(i);
                const double curl = dhy(i) * kex_[static_cast<std::size_t>(i)] - dhx(i) * iky;
                ez_[k] += ce_[k] * curl;
            }
        }
        for (int i : pml_cols_e_) {
            if (i < istart || i >= nx_ - 1) continue;
            const std::size_t k = row + static_cast<std::size_t>(i);
            psi_ezx_[k] = bex_[static_cast<std::size_t>(i)] * psi_ezx_[k] + aex_[static_cast<std::size_t>(i)] * dhy(i);
            ez_[k] += ce_[k] * psi_ezx_[k];
        }
        if (pml_row_e_[uj]) {
            for (int i = istart; i < nx_ - 1; ++i) {
                const std::size_t k = row + static_cast<std::size_t>(i);
                psi_ezy_[k] = bey_[uj] * psi_ezy_[k] + aey_[uj] * dhx(i);
                ez_[k] -= ce_[k] * psi_ezy_[k];
            }
        }
    }
}

void Solver::apply_sources() {
    const double t = (static_cast<double>(n_) + 0.5) * dt_;
    const double area = dx_ * dx_;
    for (const auto& s : sources_) ez_[s.node] -= ce_[s.node] * s.amplitude * s.pulse.value(t) / area;
}

void Solver::sample() {
    for (auto& p : probes_) {
        const auto& f = p.c == Component::ez ? ez_ : p.c == Component::hx ? hx_ : hy_;
        p.values.push_back(f[p.node]);
    }
    if (groups_.empty() || n_ % stride_ != 0) return;
    const std::size_t nf = omega_.size();
    const double te = static_cast<double>(n_) * dt_;
    const double th = te - 0.5 * dt_;
    const double w = stride_ * dt_;
    std::vector<std::complex<double>> pe(nf), ph(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        pe[f] = std::polar(w, omega_[f] * te);
        ph[f] = std::polar(w, omega_[f] * th);
    }
    for (auto& g : groups_) {
        const auto& field = g.c == Component::ez ? ez_ : g.c == Component::hx ? hx_ : hy_;
        const auto& ph_use = g.c == Component::ez ? pe : ph;
        const auto nn = static_cast<long>(g.nodes.size());
#pragma omp parallel for schedule(static) num_threads(threads_ > 0 ? threads_ : omp_get_max_threads()) if (threads_ != 1 && nn > 64)
        for (long q = 0; q < nn; ++q) {
            const double v = field[g.nodes[static_cast<std::size_t>(q)]];
            if (v == 0.0) continue;
            std::complex<double>* acc = g.acc.data() + static_cast<std::size_t>(q) * nf;
            for (std::size_t f = 0; f < nf; ++f) acc[f] += v * ph_use[f];
        }
    }
}

void Solver::step_serial() {
    if (track_) ez_prev_ = ez_;
    update_h_rows(0, ny_);
    update_e_rows(0, ny_);
    apply_sources();
    ++n_;
    sample();
}

void Solver::step_parallel() {
    if (track_) ez_prev_ = ez_;
    const int threads = threads_ > 0 ? threads_ : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
    {
#pragma omp for schedule(static)
        for (int j = 0; j < ny_; ++j) update_h_rows(j, j + 1);
#pragma omp for schedule(static)
        for (int j = 0; j < ny_; ++j) update_e_rows(j, j + 1);
    }
    apply_sources();
    ++n_;
    sample();
}

void Solver::step() {
    if (threads_ == 1)
        step_serial();
    else
        step_parallel();
}

double Solver::energy() const {
    double u = 0.0;
    for (int j = jb_; j <= jt_; ++j) {
        double row = 0.0;
        for (int i = il_; i <= ir_; ++i) {
            const std::size_t k = idx(i, j);
            const double w = node_weight(i);
            row += w * (kEps0 * eps_[k] * ez_[k] * ez_[k] + kMu0 * hx_[k] * hx_[k]);
            if (i < ir_) row += kMu0 * hy_[k] * hy_[k];
        }
        u += row;
    }
    return 0.5 * u * dx_ * dx_;
}

double Solver::discrete_energy() const {
    if (!track_ || ez_prev_.empty()) throw StateError("discrete energy tracking is off");
    double u = 0.0;
    for (int j = 0; j < ny_; ++j) {
        double row = 0.0;
        for (int i = 0; i < nx_; ++i) {
            const std::size_t k = idx(i, j);
            const double w = node_weight(i);
            row += w * (kEps0 * eps_[k] * ez_prev_[k] * ez_[k] + kMu0 * hx_[k] * hx_[k]) + kMu0 * hy_[k] * hy_[k];
        }
        u += row;
    }
    return 0.5 * u * dx_ * dx_;
}

RunStats Solver::run(const RunControl& c) {
    RunStats st;
    double last = -1.0;
    const int interval = std::max(1, c.check_interval);
    while (n_ < c.max_steps) {
        step();
        if (n_ % interval != 0) continue;
        const double u = energy();
        const bool after_source = time() > source_end_;
        if (!std::isfinite(u))
            throw StabilityError("field energy is not finite",
                                 "step " + std::to_string(n_) + "; check the Courant factor (dt/dx = " +
                                     std::to_string(dt_ * kC * std::sqrt(2.0) / dx_) + ") and the PML");
        if (after_source && last > 0.0 && u > 10.0 * last)
            throw StabilityError("field energy grew more than tenfold in " + std::to_string(interval) + " steps",
                                 "step " + std::to_string(n_) + "; check the Courant factor (dt/dx = " +
                                     std::to_string(dt_ * kC * std::sqrt(2.0) / dx_) + ") and the PML");
        st.peak_energy = std::max(st.peak_energy, u);
        last = u;
        if (after_source && u <= c.decay_threshold * st.peak_energy) {
            st.decayed = true;
            break;
        }
    }
    st.steps = n_;
    st.final_energy = energy();
    return st;
}

}  // namespace cbr::fdtd
