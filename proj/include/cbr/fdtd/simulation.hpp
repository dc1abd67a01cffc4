#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbr/fdtd/geometry.hpp"
#include "cbr/fdtd/solver.hpp"
#include "cbr/lineshapes.hpp"
#include "cbr/spectra.hpp"

namespace cbr::fdtd {

enum class Polarization { tm, te };

struct SimulationConfig {
    double resolution = 20.0;  // cells per shortest wavelength in the densest medium
    double courant = 0.95;     // fraction of the 2D limit
    double runtime_periods = 600.0;  // cap, in periods at the band centre
    double decay_threshold = 1e-5;
    PmlSpec pml;
    std::vector<double> frequencies_ev = default_frequencies_ev();
    int dft_stride = 0;  // 0 picks about 20 samples per period at the top frequency
    Polarization polarization = Polarization::tm;
    SceneLayout layout;
    double monitor_gap_nm = 150.0;  // flux and far-field line above the membrane top
    double na = 0.65;
    int box_half_cells = 2;
    int threads = 0;  // per solver; 0 = OpenMP default

    static std::vector<double> default_frequencies_ev();
    void validate() const;
    double dx_nm(double max_index) const;
    int stride_for(double dt_s) const;
};

nlohmann::json to_json(const SimulationConfig& c);
SimulationConfig config_from_json(const nlohmann::json& j);

struct DipoleSpec {
    double x_nm = 0.0;                // distance from the axis
    std::optional<double> y_nm;       // default: the geometry emitter height
    double center_nm = 780.0;
    double range_nm = 160.0;
};

struct BeamSpec {
    double center_nm = 800.0;
    double range_nm = 200.0;
    double waist_nm = 750.0;
    double height_nm = 400.0;  // above the membrane top
};

nlohmann::json to_json(const DipoleSpec& d);
DipoleSpec dipole_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BeamSpec& b);
BeamSpec beam_from_json(const nlohmann::json& j);

struct SpectrumResult {
    spectra::Spectrum spectrum;
    std::string reference;  // identifier of the normalization run
    nlohmann::json provenance;
};

// Raw dipole run: box power, flux through the top line and the upward
// far-field angular ratio per frequency.
struct DipoleRun {
    std::vector<double> energies_ev;
    std::vector<double> box_power;
    std::vector<double> top_power;
    std::vector<double> angular_ratio;
    // flux balance terms, filled when requested
    std::vector<double> side_power;
    std::vector<double> absorbed_power;
    RunStats stats;
    int nx = 0, ny = 0;
    double dx_nm = 0.0;
};

struct DipoleRunOptions {
    bool far_field = true;
    bool flux_balance = false;
};

DipoleRun run_dipole(const Scene& scene, const Boundaries& bc, double dx_nm, const SimulationConfig& cfg,
                     const DipoleSpec& dipole, const DipoleRunOptions& options = {});

// Bulk reference: the same dipole in unbounded membrane material.
DipoleRun bulk_reference(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg);

// Ratio of two box-power spectra; NormalizationError where the reference
// vanishes.
std::vector<double> purcell_ratio(const DipoleRun& run, const DipoleRun& reference);

SpectrumResult compute_purcell_spectrum(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg,
                                        Scene::Kind kind = Scene::Kind::cbr,
                                        const DipoleRun* reference = nullptr);

// NA-limited upward reflected power collected above the structure.
struct BeamRun {
    std::vector<double> energies_ev;
    std::vector<double> collected;
    RunStats stats;
};

BeamRun run_beam(const Scene& scene, const Boundaries& bc, double dx_nm, const SimulationConfig& cfg,
                 const BeamSpec& beam);

SpectrumResult compute_reflectance_spectrum(const CbrGeometry& g, const BeamSpec& beam, const SimulationConfig& cfg,
                                            Scene::Kind kind = Scene::Kind::cbr);

// eta = angular ratio * T / F_P with T = P_top / P_bulk.
SpectrumResult compute_extraction_efficiency(const CbrGeometry& g, const DipoleSpec& dipole,
                                             const SimulationConfig& cfg, const DipoleRun* reference = nullptr);

// Purcell and extraction from one cavity run.
struct DipoleObservables {
    SpectrumResult purcell;
    SpectrumResult extraction;
    DipoleRun run;
};
DipoleObservables simulate_dipole(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg,
                                  const DipoleRun& reference);

// Fraction of a far-field intensity pattern inside |theta| <= asin(na).
// theta ascending in radians, covering [0, pi/2] or [-pi/2, pi/2].
double angular_ratio(const std::vector<double>& theta, const std::vector<double>& intensity, double na);

struct Peak {
    double energy_ev = 0.0;
    double value = 0.0;
};
// Largest sample refined by a parabola through its neighbours.
Peak spectrum_peak(const spectra::Spectrum& s);

// Fano fit of the reflectance dip belonging to the mode near near_ev: a
// first fit over +-search_ev, then a refit over E_c +- 5 Gamma_c.
lineshapes::FanoFit fit_mode_dip(const spectra::Spectrum& reflectance, double near_ev, double search_ev = 0.04);

struct SweepRow {
    double delta_nm = 0.0;
    double ec_ev = 0.0;
    double gamma_ev = 0.0;
    double q = 0.0;
    double fano_q = 0.0;
    double fp_peak = 0.0;
    double fp_peak_ev = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double sensitivity = 0.0;  // -d lambda_c / d delta, nm per nm
    double sensitivity_err = 0.0;
    std::vector<SpectrumResult> reflectance;
    std::vector<SpectrumResult> purcell;
    std::vector<SpectrumResult> extraction;
};

std::vector<double> sweep_deltas(int steps, double step_nm = 1.5);
SweepResult etch_sweep(const CbrGeometry& base, const std::vector<double>& deltas, const SimulationConfig& cfg,
                       const DipoleSpec& dipole = {}, const BeamSpec& beam = {}, int jobs = 1);
// sweep CSV: delta_nm,Ec_eV,Gamma_eV,Q,Fp_peak
void write_sweep_csv(std::ostream& out, const SweepResult& r);
nlohmann::json sweep_report(const SweepResult& r);

// Flat little-endian float64 grid (row-major, x fastest) plus a JSON sidecar.
void write_field_dump(const std::string& path_stem, const Solver& s, Component c);

// Ez, Hx and Hy of a dipole run stopped at time_s (default: end of the pulse),
// written as stem_prefix_{ez,hx,hy}. Returns the stems.
std::vector<std::string> dump_dipole_fields(const CbrGeometry& g, const DipoleSpec& dipole, const SimulationConfig& cfg,
                                            Scene::Kind kind, const std::string& stem_prefix,
                                            std::optional<double> time_s = std::nullopt);

}  // namespace cbr::fdtd
