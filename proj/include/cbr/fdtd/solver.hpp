#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "cbr/fdtd/geometry.hpp"

namespace cbr::fdtd {

enum class Boundary { pec, mirror, cpml };

// mirror is only available on the left edge (the resonator axis); it holds
// Ez even and Hy odd about x = 0.
struct Boundaries {
    Boundary left = Boundary::mirror;
    Boundary right = Boundary::cpml;
    Boundary bottom = Boundary::pec;
    Boundary top = Boundary::cpml;
};

struct PmlSpec {
    int cells = 16;
    double order = 3.0;
    double sigma_factor = 1.0;  // times 0.8 (m + 1) / (eta0 dx)
    double kappa_max = 1.0;
    double alpha_factor = 0.05;  // alpha = alpha_factor eps0 omega_ref
};

// Derivative of a Gaussian-enveloped cosine; no DC content.
struct Pulse {
    double omega0 = 0.0;  // rad/s
    double tau = 0.0;     // s, envelope exp(-u^2 / (2 tau^2))
    double t0 = 0.0;

    // band edges in nm map to +-2 spectral sigma
    static Pulse from_band(double center_nm, double range_nm);
    double value(double t) const;
    double end_time() const { return t0 + 6.0 * tau; }
};

enum class Component { ez, hx, hy };

struct RunControl {
    long max_steps = 100000;
    double decay_threshold = 1e-5;
    int check_interval = 100;
};

struct RunStats {
    long steps = 0;
    double peak_energy = 0.0;
    double final_energy = 0.0;
    bool decayed = false;
};

// 2D TM Yee grid: Ez at (i, j), Hx at (i, j + 1/2), Hy at (i + 1/2, j).
// Node (i, j) sits at x = (i - i0) dx, y = (j - j0) dx.
class Solver {
public:
    Solver(const Scene& scene, double dx_nm, double courant, const Boundaries& bc = {}, const PmlSpec& pml = {});

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    double dx() const noexcept { return dx_; }  // m
    double dt() const noexcept { return dt_; }
    long steps() const noexcept { return n_; }
    double time() const noexcept { return static_cast<double>(n_) * dt_; }
    std::size_t idx(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
    }
    int i_of(double x_nm) const;  // nearest node
    int j_of(double y_nm) const;
    double x_nm(int i) const;
    double y_nm(int j) const;
    // interior (non-PML) node range, inclusive
    int i_lo() const noexcept { return il_; }
    int i_hi() const noexcept { return ir_; }
    int j_lo() const noexcept { return jb_; }
    int j_hi() const noexcept { return jt_; }
    bool mirror() const noexcept { return bc_.left == Boundary::mirror; }
    const Boundaries& boundaries() const noexcept { return bc_; }

    const std::vector<double>& eps() const noexcept { return eps_; }
    const std::vector<double>& metal_fraction() const noexcept { return metal_; }
    std::vector<double>& ez() noexcept { return ez_; }
    std::vector<double>& hx() noexcept { return hx_; }
    std::vector<double>& hy() noexcept { return hy_; }
    const std::vector<double>& ez() const noexcept { return ez_; }
    const std::vector<double>& hx() const noexcept { return hx_; }
    const std::vector<double>& hy() const noexcept { return hy_; }

    // Line current (A) at an Ez node, I(t) = amplitude * pulse(t).
    void add_point_source(int i, int j, const Pulse& p, double amplitude = 1.0);
    void add_line_source(int j, const std::vector<double>& amplitude_per_i, const Pulse& p);
    double source_end_time() const noexcept { return source_end_; }

    // DFT groups accumulate x(t) exp(i w t) dt with E sampled at n dt and H
    // at (n - 1/2) dt, every stride steps.
    void set_frequencies(const std::vector<double>& omega, int stride);
    const std::vector<double>& omegas() const noexcept { return omega_; }
    int dft_stride() const noexcept { return stride_; }
    int add_dft_group(Component c, const std::vector<std::size_t>& nodes);
    // [node * n_freq + f]
    const std::vector<std::complex<double>>& dft(int group) const;
    std::size_t n_freq() const noexcept { return omega_.size(); }

    int add_probe(Component c, std::size_t node);
    const std::vector<double>& probe(int id) const;

    void set_threads(int threads) noexcept { threads_ = threads; }
    void step();           // OpenMP kernel when threads != 1
    void step_serial();    // reference kernel
    void step_parallel();  // row-striped OpenMP kernel

    // 1/2 sum eps E^2 + mu H^2 over the non-PML interior
    double energy() const;
    // sum eps E^n E^(n+1) + mu |H^(n+1/2)|^2 over all nodes; exactly
    // conserved by the leapfrog in a closed lossless domain
    void track_discrete_energy(bool on) { track_ = on; }
    double discrete_energy() const;

    RunStats run(const RunControl& control);

private:
    void update_h_rows(int j0, int j1);
    void update_e_rows(int j0, int j1);
    void apply_sources();
    void sample();
    double node_weight(int i) const noexcept { return (mirror() && i == 0) ? 0.5 : 1.0; }

    int nx_ = 0, ny_ = 0, i0_ = 0, j0_ = 0;
    int il_ = 0, ir_ = 0, jb_ = 0, jt_ = 0;
    double dx_ = 0.0, dt_ = 0.0;
    Boundaries bc_;
    long n_ = 0;
    int threads_ = 0;

    std::vector<double> eps_, metal_;
    std::vector<double> ez_, hx_, hy_, jd_;
    std::vector<double> ce_;            // dt / (eps0 eps)
    std::vector<double> jk_, jb_coef_;  // Drude current recursion per node
    std::vector<char> row_metal_;
    double ch_ = 0.0;                   // dt / mu0

    // CPML: per-index coefficients for E and H positions
    std::vector<double> kex_, aex_, bex_, khx_, ahx_, bhx_;
    std::vector<double> key_, aey_, bey_, khy_, ahy_, bhy_;
    std::vector<double> psi_ezx_, psi_ezy_, psi_hx_, psi_hy_;
    std::vector<int> pml_cols_e_, pml_cols_h_;
    std::vector<char> pml_row_e_, pml_row_h_;

    struct PointSource {
        std::size_t node;
        double amplitude;
        Pulse pulse;
    };
    std::vector<PointSource> sources_;
    double source_end_ = 0.0;

    struct Group {
        Component c;
        std::vector<std::size_t> nodes;
        std::vector<std::complex<double>> acc;
    };
    std::vector<double> omega_;
    int stride_ = 1;
    std::vector<Group> groups_;
    struct Probe {
        Component c;
        std::size_t node;
        std::vector<double> values;
    };
    std::vector<Probe> probes_;

    bool track_ = false;
    std::vector<double> ez_prev_;
};

}  // namespace cbr::fdtd
