#include "cbr/etch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "cbr/constants.hpp"
#include "cbr/csv.hpp"
#include "cbr/errors.hpp"

namespace cbr::etch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Point {
    std::size_t device = 0;
    int cycle = 0;
    double y = 0.0;
};

struct LinearFe {
    fit::FitResult fit;
    std::vector<double> errors;
};

// y = slope * cycle + sum_k step_k 1[cycle >= c_k] + intercept_device
LinearFe fixed_effect_fit(const std::vector<Point>& pts, std::size_t n_devices, const std::vector<int>& steps) {
    const std::size_t ns = steps.size();
    const std::size_t np = 1 + ns + n_devices;
    if (pts.size() <= np)
        throw DataError("too few records for the regression",
                        std::to_string(pts.size()) + " points, " + std::to_string(np) + " parameters");

    fit::FitData data;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        data.x.push_back(static_cast<double>(i));
        data.y.push_back(pts[i].y);
    }
    auto design_row = [&pts, &steps, ns](std::size_t i, auto&& put) {
        put(0, static_cast<double>(pts[i].cycle));
        for (std::size_t k = 0; k < ns; ++k) put(1 + k, pts[i].cycle >= steps[k] ? 1.0 : 0.0);
        put(1 + ns + pts[i].device, 1.0);
    };

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(np));
    Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        design_row(i, [&](std::size_t j, double v) { A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v; });
        y(static_cast<Eigen::Index>(i)) = pts[i].y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < static_cast<Eigen::Index>(np))
        throw DataError("regression is underdetermined",
                        "each device needs two cycles and every excluded cycle must be bracketed by records");
    const Eigen::VectorXd p0 = qr.solve(y);

    fit::FitModel model;
    model.n_params = np;
    model.names.push_back("slope");
    for (int c : steps) model.names.push_back("step_" + std::to_string(c));
    for (std::size_t d = 0; d < n_devices; ++d) model.names.push_back("intercept_" + std::to_string(d));
    model.residual = [design_row, &pts](std::span<const double> p, const fit::FitData& d, std::span<double> r) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            double v = 0.0;
            design_row(i, [&](std::size_t j, double a) { v += a * p[j]; });
            r[i] = v - pts[i].y;
        }
    };
    model.jacobian = [design_row](std::span<const double>, const fit::FitData& d, Eigen::MatrixXd& J) {
        J.setZero();
        for (std::size_t i = 0; i < d.size(); ++i)
            design_row(i, [&](std::size_t j, double a) { J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a; });
    };
    LinearFe out;
    try {
        out.fit = fit::least_squares_fit(model, data, std::vector<double>(p0.data(), p0.data() + p0.size()));
    } catch (const RankDeficientError& e) {
        throw DataError(std::string("regression is underdetermined: ") + e.what());
    }
    if (!out.fit.converged) throw FitError("linear regression did not converge");
    out.errors = fit::parameter_uncertainties(out.fit);
    return out;
}

std::optional<double> energy_of(const EtchRecord& r, EnergySource s) {
    return s == EnergySource::room_temperature ? r.ec_rt_ev : r.ec_lt_ev;
}

std::map<std::string, std::size_t> device_index(const EtchSeries& s) {
    std::map<std::string, std::size_t> idx;
    for (const auto& d : s.devices()) idx.emplace(d, idx.size());
    return idx;
}

}  // namespace

std::string to_string(Design d) {
    switch (d) {
        case Design::d1: return "d1";
        case Design::d2: return "d2";
        case Design::d3: return "d3";
        case Design::other: return "other";
    }
    return "other";
}

Design design_from_string(const std::string& s) {
    if (s == "d1") return Design::d1;
    if (s == "d2") return Design::d2;
    if (s == "d3") return Design::d3;
    if (s == "other" || s.empty()) return Design::other;
    throw ValidationError("unknown design label", s);
}

std::vector<std::string> EtchSeries::devices() const {
    std::vector<std::string> out;
    for (const auto& r : records)
        if (std::find(out.begin(), out.end(), r.device_id) == out.end()) out.push_back(r.device_id);
    return out;
}

void EtchSeries::validate() const {
    std::map<std::string, int> last;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::string where = "record " + std::to_string(i) + " (" + r.device_id + ")";
        if (r.cycle < 0) throw ValidationError("cycle must be non-negative", where);
        if (!r.ec_rt_ev && !r.ec_lt_ev) throw ValidationError("record has no cavity-mode energy", where);
        for (const auto& e : {r.ec_rt_ev, r.ec_lt_ev})
            if (e && (!std::isfinite(*e) || *e <= 0.0)) throw ValidationError("energy must be positive", where);
        if (r.q && (!std::isfinite(*r.q) || *r.q <= 0.0)) throw ValidationError("Q must be positive", where);
        auto it = last.find(r.device_id);
        if (it != last.end() && r.cycle <= it->second)
            throw ValidationError("cycles must increase strictly per device", where);
        last[r.device_id] = r.cycle;
    }
}

ShiftFit fit_shift_per_cycle(const EtchSeries& series, const std::set<int>& exclude, EnergySource source) {
    series.validate();
    const auto idx = device_index(series);
    std::vector<Point> pts;
    double esum = 0.0;
    for (const auto& r : series.records) {
        if (const auto e = energy_of(r, source)) {
            pts.push_back({idx.at(r.device_id), r.cycle, *e});
            esum += *e;
        }
    }
    if (pts.size() < 3) throw DataError("shift regression needs at least 3 records", std::to_string(pts.size()));
    // only devices that contribute points get an intercept
    std::map<std::size_t, std::size_t> used;
    for (auto& p : pts) p.device = used.emplace(p.device, used.size()).first->second;
    const std::vector<int> steps(exclude.begin(), exclude.end());
    const LinearFe lf = fixed_effect_fit(pts, used.size(), steps);

    ShiftFit out;
    out.n_points = pts.size();
    out.excluded_cycles = steps;
    out.mean_energy_ev = esum / static_cast<double>(pts.size());
    out.slope_ev = {lf.fit.params[0], lf.errors[0]};
    const double dl_de = PhysicalConstants::hc_ev_nm / (out.mean_energy_ev * out.mean_energy_ev);
    out.slope_nm = {out.slope_ev.value * dl_de, out.slope_ev.uncertainty * dl_de};
    out.fit = lf.fit;
    return out;
}

double mean_shift_per_cycle(const EtchSeries& series, EnergySource source) {
    series.validate();
    std::map<std::string, std::pair<const EtchRecord*, const EtchRecord*>> ends;
    for (const auto& r : series.records) {
        if (!energy_of(r, source)) continue;
        auto [it, fresh] = ends.emplace(r.device_id, std::pair{&r, &r});
        if (!fresh) it->second.second = &r;
    }
    double sum = 0.0;
    int n = 0;
    for (const auto& [id, fl] : ends) {
        if (fl.first == fl.second) continue;
        sum += (*energy_of(*fl.second, source) - *energy_of(*fl.first, source)) /
               static_cast<double>(fl.second->cycle - fl.first->cycle);
        ++n;
    }
    if (n == 0) throw DataError("no device has two energies");
    return sum / n;
}

Estimate estimate_removal_depth(double slope, double sensitivity, double slope_err, double sens_err) {
    if (!(sensitivity > 0.0) || !std::isfinite(sensitivity))
        throw DomainError("solver sensitivity must be positive", std::to_string(sensitivity));
    if (!std::isfinite(slope)) throw DomainError("measured slope must be finite");
    Estimate e;
    e.value = slope / sensitivity;
    e.uncertainty = std::hypot(slope_err / sensitivity, slope * sens_err / (sensitivity * sensitivity));
    return e;
}

Estimate temperature_offset(const EtchSeries& series) {
    series.validate();
    std::vector<double> d;
    for (const auto& r : series.records)
        if (r.ec_rt_ev && r.ec_lt_ev && !r.flagged()) d.push_back(*r.ec_lt_ev - *r.ec_rt_ev);
    if (d.empty()) throw DataError("no unflagged records with both RT and LT energies");
    const double n = static_cast<double>(d.size());
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= n;
    if (d.size() == 1) return {mean, kNaN};
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

QTrend fit_q_trend(const EtchSeries& series) {
    series.validate();
    const auto idx = device_index(series);
    std::vector<Point> pts;
    for (const auto& r : series.records)
        if (r.q) pts.push_back({idx.at(r.device_id), r.cycle, *r.q});
    if (pts.size() < 3) throw DataError("Q trend needs at least 3 records", std::to_string(pts.size()));
    std::map<std::size_t, std::size_t> used;
    for (auto& p : pts) p.device = used.emplace(p.device, used.size()).first->second;
    const LinearFe lf = fixed_effect_fit(pts, used.size(), {});
    QTrend q;
    q.slope = {lf.fit.params[0], lf.errors[0]};
    q.n_points = pts.size();
    q.fit = lf.fit;
    return q;
}

CyclePlan predict_cycles_to_target(double ec_now, double target, double slope) {
    if (!std::isfinite(ec_now) || !std::isfinite(target) || !std::isfinite(slope))
        throw DomainError("planning inputs must be finite");
    const double det = target - ec_now;
    if (std::abs(det) < 0.5 * std::abs(slope)) return {0, det};
    if (slope == 0.0) throw PlanningError("zero shift per cycle cannot reach the target");
    if (det / slope < 0.0)
        throw PlanningError("target lies on the wrong side of the current mode",
                            "detuning " + std::to_string(det) + " eV, slope " + std::to_string(slope) + " eV/cycle");
    const int n = static_cast<int>(std::lround(det / slope));
    return {n, det - n * slope};
}

nlohmann::json tuning_report(const ShiftFit& excluded, const ShiftFit& raw, double mean_raw,
                             const std::optional<Estimate>& temperature, const std::optional<QTrend>& q,
                             const std::optional<Estimate>& removal) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["shift_per_cycle_eV"] = excluded.slope_ev.value;
    j["shift_per_cycle_err_eV"] = excluded.slope_ev.uncertainty;
    j["shift_per_cycle_nm"] = excluded.slope_nm.value;
    j["shift_per_cycle_err_nm"] = excluded.slope_nm.uncertainty;
    j["excluded_cycles"] = excluded.excluded_cycles;
    j["raw_shift_per_cycle_eV"] = raw.slope_ev.value;
    j["raw_shift_per_cycle_err_eV"] = raw.slope_ev.uncertainty;
    j["raw_mean_shift_per_cycle_eV"] = mean_raw;
    j["n_points"] = excluded.n_points;
    if (removal) {
        j["removal_per_cycle_nm"] = removal->value;
        j["removal_per_cycle_err_nm"] = num(removal->uncertainty);
    }
    if (temperature) {
        j["temperature_offset_eV"] = temperature->value;
        j["temperature_offset_err_eV"] = num(temperature->uncertainty);
    }
    if (q) {
        j["q_slope"] = q->slope.value;
        j["q_slope_err"] = q->slope.uncertainty;
    }
    return j;
}

EtchSeries synthesize_etch_series(const EtchSynthSpec& s, std::mt19937_64& rng) {
    if (s.n_devices < 1 || s.n_cycles < 1) throw DomainError("need at least one device and one cycle");
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    EtchSeries out;
    for (int d = 0; d < s.n_devices; ++d) {
        const double e0 = s.start_ev + s.device_spread_ev * u(rng);
        const double q0 = s.q0 + 10.0 * u(rng);
        for (int c = 0; c < s.n_cycles; ++c) {
            EtchRecord r;
            r.device_id = "cbr" + std::to_string(d + 1);
            r.design = static_cast<Design>(d % 3);
            r.cycle = c;
            const double e = e0 + s.shift_ev * c + (c >= 1 ? s.first_cycle_extra_ev : 0.0) + s.noise_ev * g(rng);
            r.ec_rt_ev = e;
            r.ec_lt_ev = e + s.lt_offset_ev + s.lt_noise_ev * g(rng);
            r.q = q0 + s.q_slope * c + s.q_noise * g(rng);
            out.records.push_back(r);
        }
    }
    return out;
}

EtchSeries load_etch_series(const std::string& path) {
    const io::CsvTable t = io::read_csv_file(path);
    const auto col = [&](const char* name) {
        const auto c = t.column(name);
        if (!c) throw ParseError(std::string("missing column ") + name, path);
        return *c;
    };
    const std::size_t c_dev = col("device_id"), c_design = col("design"), c_cycle = col("cycle"),
                      c_rt = col("Ec_RT_eV"), c_lt = col("Ec_LT_eV"), c_q = col("Q"), c_flag = col("flag");
    std::optional<std::size_t> c_note;
    for (std::size_t k = 0; k < t.header.size(); ++k)
        if (t.header[k] == "exposure_note" || t.header[k] == "note") c_note = k;
    EtchSeries s;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
        EtchRecord rec;
        rec.device_id = io::trim(row.at(c_dev));
        if (rec.device_id.empty()) throw ParseError("empty device_id", where);
        rec.design = design_from_string(io::trim(row.at(c_design)));
        const double cyc = t.number(r, c_cycle);
        if (cyc != std::floor(cyc)) throw ParseError("cycle must be an integer", where);
        rec.cycle = static_cast<int>(cyc);
        rec.ec_rt_ev = t.optional_number(r, c_rt);
        rec.ec_lt_ev = t.optional_number(r, c_lt);
        rec.q = t.optional_number(r, c_q);
        rec.flag = c_flag < row.size() ? io::trim(row[c_flag]) : "";
        if (c_note && *c_note < row.size()) rec.exposure_note = io::trim(row[*c_note]);
        s.records.push_back(rec);
    }
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), path);
    }
    return s;
}

void write_etch_series(std::ostream& out, const EtchSeries& s) {
    auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
    out << "device_id,design,cycle,Ec_RT_eV,Ec_LT_eV,Q,flag\n";
    for (const auto& r : s.records)
        out << r.device_id << "," << to_string(r.design) << "," << r.cycle << "," << opt(r.ec_rt_ev) << ","
            << opt(r.ec_lt_ev) << "," << opt(r.q) << "," << r.flag << "\n";
}

}  // namespace cbr::etch
