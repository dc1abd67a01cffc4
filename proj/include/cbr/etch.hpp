#pragma once

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbr/fit.hpp"

namespace cbr::etch {

enum class Design { d1, d2, d3, other };
std::string to_string(Design d);
Design design_from_string(const std::string& s);

struct EtchRecord {
    std::string device_id;
    Design design = Design::other;
    int cycle = 0;
    std::optional<double> ec_rt_ev;
    std::optional<double> ec_lt_ev;
    std::optional<double> q;
    std::string flag;           // empty or "ok" is a good record
    std::string exposure_note;

    bool flagged() const { return !flag.empty() && flag != "ok"; }
};

// Records of any number of devices; cycles must increase per device.
struct EtchSeries {
    std::vector<EtchRecord> records;

    void validate() const;
    std::vector<std::string> devices() const;  // first-appearance order
};

enum class EnergySource { room_temperature, low_temperature };

struct Estimate {
    double value = 0.0;
    double uncertainty = 0.0;  // NaN when undefined
};

struct ShiftFit {
    Estimate slope_ev;  // per cycle, blue shift positive
    Estimate slope_nm;  // wavelength decrease per cycle at the mean E_c
    double mean_energy_ev = 0.0;
    std::vector<int> excluded_cycles;
    std::size_t n_points = 0;
    fit::FitResult fit;  // params: slope, one step per excluded cycle, one intercept per device
};

// Linear E_c(cycle) with a free intercept per device. Each excluded cycle c
// adds a step 1[cycle >= c], so the anomalous shift into cycle c does not
// enter the slope.
ShiftFit fit_shift_per_cycle(const EtchSeries& series, const std::set<int>& exclude_cycles = {},
                             EnergySource source = EnergySource::room_temperature);

// Average of (last - first) / (cycle span) over devices with two or more
// energies; the plain "total shift over cycles" figure.
double mean_shift_per_cycle(const EtchSeries& series, EnergySource source = EnergySource::room_temperature);

// measured_slope / sensitivity with relative errors in quadrature.
Estimate estimate_removal_depth(double measured_slope_nm, double sensitivity_nm_per_nm,
                                double measured_err_nm = 0.0, double sensitivity_err = 0.0);

// Mean of E_LT - E_RT over paired, unflagged records; standard error of the
// mean, NaN for a single pair.
Estimate temperature_offset(const EtchSeries& series);

struct QTrend {
    Estimate slope;  // per cycle
    std::size_t n_points = 0;
    fit::FitResult fit;
};

QTrend fit_q_trend(const EtchSeries& series);

struct CyclePlan {
    int cycles = 0;
    double residual_ev = 0.0;  // target minus predicted energy after the cycles
};

CyclePlan predict_cycles_to_target(double ec_now_ev, double target_ev, double slope_ev_per_cycle);

nlohmann::json tuning_report(const ShiftFit& excluded, const ShiftFit& raw, double mean_raw,
                             const std::optional<Estimate>& temperature, const std::optional<QTrend>& q,
                             const std::optional<Estimate>& removal);

struct EtchSynthSpec {
    int n_devices = 10;
    int n_cycles = 6;                 // cycles 0 .. n_cycles-1
    double start_ev = 1.52;
    double device_spread_ev = 0.01;  // uniform spread of starting energies
    double shift_ev = 5.1e-3;
    double first_cycle_extra_ev = 0.0;  // extra shift into cycle 1
    double noise_ev = 0.5e-3;
    double lt_offset_ev = 16.4e-3;
    double lt_noise_ev = 0.5e-3;
    double q0 = 160.0;
    double q_slope = -2.6;
    double q_noise = 1.0;
};

EtchSeries synthesize_etch_series(const EtchSynthSpec& spec, std::mt19937_64& rng);

EtchSeries load_etch_series(const std::string& path);
void write_etch_series(std::ostream& out, const EtchSeries& s);

}  // namespace cbr::etch
