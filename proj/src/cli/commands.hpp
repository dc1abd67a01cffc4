#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbr/cli.hpp"
#include "cbr/svg.hpp"

namespace cbr::cli {

// Every artifact goes through here so it lands under the output directory
// and carries the seed.
class Outputs {
public:
    explicit Outputs(const RunConfig& rc);

    void json(const std::string& name, nlohmann::json j);
    // header line plus rows; a `# seed=N` comment line is prepended
    void csv(const std::string& name, const std::string& body);
    void svg(const std::string& name, const io::Plot& plot);
    // path for a file written by library code; the name is recorded
    std::string reserve(const std::string& name);

    const std::vector<std::string>& written() const { return written_; }

private:
    std::filesystem::path path_for(const std::string& name);

    const RunConfig& rc_;
    std::vector<std::string> written_;
};

// Column-major table to CSV text with shortest round-trip numbers.
std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns);

struct FanoOptions {
    std::vector<double> window;  // lo, hi in eV
    std::string axis;            // nm | ev, overrides the file
};

struct LifetimeOptions {
    std::string irf_path;
    double irf_fwhm_ps = 0.0;  // Gaussian IRF when no file is given; 0 = delta
    std::string model = "x";   // x | xx | single | bi
    std::optional<double> tau_ref_ps;
    double tau_ref_err_ps = 0.0;
    std::string ref_path;  // reference histogram fitted for tau_ref
};

struct G2Options {
    double window_ns = 2.0;
    double rep_ns = 12.5;
};

struct MichelsonOptions {
    std::optional<double> wavelength_nm;  // inputs are fringe scans when given
    std::optional<double> tau_ps;
};

struct EtchOptions {
    std::vector<int> exclude;
    std::string source = "rt";
    std::optional<double> sensitivity;
    double sensitivity_err = 0.0;
    std::string sweep_report;  // takes the sensitivity from a sweep report
    std::optional<double> target_ev;
};

struct SimulateOptions {
    std::string observable = "purcell";
    std::string scene = "cbr";
    double delta_nm = 0.0;
    std::optional<double> resolution;
    std::optional<double> near_ev;  // mode to fit in a reflectance spectrum
    bool dump_fields = false;
    std::optional<double> dump_time_fs;
};

struct SweepOptions {
    int steps = 14;
    double step_nm = 1.5;
    std::optional<double> resolution;
};

struct SynthOptions {
    std::string kind;
    std::string name;  // output stem override
    bool noiseless = false;
    // fano
    double ec_ev = 1.548, gamma_ev = 0.0103, q = 0.2, amplitude = 0.6, baseline = 0.3, noise = 0.01;
    int points = 401;
    // decay
    double tau_ps = 53.0;
    std::optional<double> tau2_ps;
    double counts = 1e5, irf_fwhm_ps = 100.0, bin_ps = 4.0, background = 0.0;
    int bins = 1000;
    // g2
    double ratio = 0.03, side_area = 1e4;
    // michelson
    double t_g_ps = 80.0, t_l_ps = 150.0, vis_noise = 0.02, wavelength_nm = 784.0;
    bool fringes = false;
    // etch
    double shift_mev = 5.1, first_extra_mev = 0.0;
    int devices = 10, cycles = 6;
};

void cmd_fit_fano(const RunConfig& rc, const FanoOptions& o, Outputs& out);
void cmd_lifetime(const RunConfig& rc, const LifetimeOptions& o, Outputs& out);
void cmd_g2(const RunConfig& rc, const G2Options& o, Outputs& out);
void cmd_michelson(const RunConfig& rc, const MichelsonOptions& o, Outputs& out);
void cmd_etch(const RunConfig& rc, const EtchOptions& o, Outputs& out);
void cmd_simulate(const RunConfig& rc, const SimulateOptions& o, Outputs& out);
void cmd_sweep(const RunConfig& rc, const SweepOptions& o, Outputs& out);
void cmd_synth(const RunConfig& rc, const SynthOptions& o, Outputs& out);

}  // namespace cbr::cli
