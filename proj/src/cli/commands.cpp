#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cbr/coherence.hpp"
#include "cbr/correlation.hpp"
#include "cbr/csv.hpp"
#include "cbr/decay.hpp"
#include "cbr/etch.hpp"
#include "cbr/fdtd/simulation.hpp"
#include "cbr/lineshapes.hpp"
#include "cbr/spectra.hpp"

namespace cbr::cli {

namespace fs = std::filesystem;

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const std::string& input_at(const RunConfig& rc, std::size_t k, const char* what) {
    if (rc.inputs.size() <= k) throw ValidationError(std::string("missing input: ") + what, rc.command);
    return rc.inputs[k];
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

template <class Write, class T>
std::string to_text(Write w, const T& value) {
    std::ostringstream os;
    w(os, value);
    return os.str();
}

struct FdtdSetup {
    fdtd::CbrGeometry geometry;
    fdtd::SimulationConfig config;
    fdtd::DipoleSpec dipole;
    fdtd::BeamSpec beam;
};

FdtdSetup fdtd_setup(const RunConfig& rc, std::optional<double> resolution) {
    const auto& j = rc.overrides;
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k != "geometry" && k != "simulation" && k != "dipole" && k != "beam")
            throw ValidationError("unknown config section", k);
    }
    FdtdSetup s;
    if (j.contains("geometry")) s.geometry = fdtd::geometry_from_json(j.at("geometry"));
    if (j.contains("simulation")) s.config = fdtd::config_from_json(j.at("simulation"));
    if (j.contains("dipole")) s.dipole = fdtd::dipole_from_json(j.at("dipole"));
    if (j.contains("beam")) s.beam = fdtd::beam_from_json(j.at("beam"));
    if (resolution) s.config.resolution = *resolution;
    s.config.threads = rc.jobs;
    s.geometry.validate();
    s.config.validate();
    return s;
}

nlohmann::json setup_json(const FdtdSetup& s) {
    nlohmann::json cfg = fdtd::to_json(s.config);
    cfg.erase("threads");  // results do not depend on it
    return {{"geometry", fdtd::to_json(s.geometry)},
            {"simulation", cfg},
            {"dipole", fdtd::to_json(s.dipole)},
            {"beam", fdtd::to_json(s.beam)}};
}

fdtd::Scene::Kind scene_kind(const std::string& s) {
    if (s == "cbr") return fdtd::Scene::Kind::cbr;
    if (s == "planar") return fdtd::Scene::Kind::planar;
    if (s == "homogeneous") return fdtd::Scene::Kind::homogeneous;
    throw ValidationError("unknown scene", s);
}

std::string spectrum_csv(const spectra::Spectrum& s, const std::string& value_name) {
    std::vector<double> e(s.axis().begin(), s.axis().end()), nm, v(s.intensity().begin(), s.intensity().end());
    for (double x : e) nm.push_back(PhysicalConstants::hc_ev_nm / x);
    return csv_text({"energy_eV", "wavelength_nm", value_name}, {e, nm, v});
}

io::PlotSeries series_of(const spectra::Spectrum& s, std::string label, std::string color) {
    io::PlotSeries ps;
    ps.x.assign(s.axis().begin(), s.axis().end());
    ps.y.assign(s.intensity().begin(), s.intensity().end());
    ps.label = std::move(label);
    ps.color = std::move(color);
    return ps;
}

}  // namespace

Outputs::Outputs(const RunConfig& rc) : rc_(rc) {}

fs::path Outputs::path_for(const std::string& name) {
    if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos || name == "." ||
        name == "..")
        throw ValidationError("output names must be plain file names", name);
    std::error_code ec;
    fs::create_directories(rc_.output_dir, ec);
    if (ec) throw DataError("cannot create output directory", rc_.output_dir.string() + ": " + ec.message());
    written_.push_back(name);
    return rc_.output_dir / name;
}

void Outputs::json(const std::string& name, nlohmann::json j) {
    j["command"] = rc_.command;
    j["seed"] = rc_.seed;
    const auto p = path_for(name);
    std::ofstream f(p);
    if (!f) throw DataError("cannot write output", p.string());
    f << j.dump(2) << '\n';
}

void Outputs::csv(const std::string& name, const std::string& body) {
    const auto p = path_for(name);
    std::ofstream f(p);
    if (!f) throw DataError("cannot write output", p.string());
    f << "# seed=" << rc_.seed << '\n' << body;
}

void Outputs::svg(const std::string& name, const io::Plot& plot) {
    const auto p = path_for(name);
    std::ofstream f(p);
    if (!f) throw DataError("cannot write output", p.string());
    f << "<!-- seed=" << rc_.seed << " -->\n" << io::render_svg(plot);
}

std::string Outputs::reserve(const std::string& name) { return path_for(name).string(); }

std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
    std::ostringstream os;
    for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
    os << '\n';
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << io::format_double(columns[k].at(i));
        os << '\n';
    }
    return os.str();
}

void cmd_fit_fano(const RunConfig& rc, const FanoOptions& o, Outputs& out) {
    const std::string& path = input_at(rc, 0, "spectrum");
    spectra::SpectrumFormat format;
    if (!o.axis.empty()) format.axis_kind = spectra::axis_kind_from_string(o.axis);
    const spectra::Spectrum s = spectra::load_spectrum(path, format).to_energy();
    std::optional<lineshapes::EnergyWindow> window;
    if (!o.window.empty()) {
        if (o.window.size() != 2) throw ValidationError("--window takes lo,hi");
        window = lineshapes::EnergyWindow{o.window[0], o.window[1]};
    }
    const auto f = lineshapes::fit_fano(s, window);

    nlohmann::json rep = lineshapes::fano_report(f);
    rep["input"] = path;
    out.json("fano_report.json", rep);

    std::vector<double> e, data, model, inside;
    for (std::size_t i = 0; i < s.size(); ++i) {
        e.push_back(s.axis()[i]);
        data.push_back(s.intensity()[i]);
        model.push_back(lineshapes::fano_value(s.axis()[i], f.params));
        inside.push_back(s.axis()[i] >= f.window.lo && s.axis()[i] <= f.window.hi ? 1.0 : 0.0);
    }
    out.csv("fano_fit.csv", csv_text({"energy_eV", "intensity", "fit", "in_window"}, {e, data, model, inside}));

    io::Plot plot;
    plot.title = "Fano fit";
    plot.x_label = "energy (eV)";
    plot.y_label = "intensity";
    plot.series.push_back(io::PlotSeries{e, data, "data", kPalette[0], true});
    io::PlotSeries curve;
    curve.x = linspace(f.window.lo, f.window.hi, 400);
    for (double x : curve.x) curve.y.push_back(lineshapes::fano_value(x, f.params));
    curve.label = "fit";
    curve.color = kPalette[3];
    plot.series.push_back(curve);
    plot.markers.push_back({f.params.center_ev, "E_c"});
    out.svg("fano_fit.svg", plot);
}

void cmd_lifetime(const RunConfig& rc, const LifetimeOptions& o, Outputs& out) {
    const std::string& path = input_at(rc, 0, "decay histogram");
    const auto hist = decay::load_decay_histogram(path);
    std::optional<decay::Irf> irf;
    if (!o.irf_path.empty()) {
        irf.emplace(decay::load_decay_histogram(o.irf_path));
    } else if (o.irf_fwhm_ps > 0.0) {
        irf = decay::Irf::gaussian(hist.bin_width(), o.irf_fwhm_ps);
    } else {
        irf = decay::Irf::delta(hist.bin_width());
    }
    decay::DecayKind kind;
    if (o.model == "x" || o.model == "single")
        kind = decay::DecayKind::single_exp;
    else if (o.model == "xx" || o.model == "bi")
        kind = decay::DecayKind::bi_exp;
    else
        throw ValidationError("unknown decay model", o.model);
    if (o.tau_ref_ps && !o.ref_path.empty()) throw ValidationError("--tau-ref and --ref are exclusive");

    const auto f = decay::fit_lifetime(hist, *irf, kind);
    nlohmann::json rep = decay::lifetime_report(f);
    rep["input"] = path;
    rep["model_flag"] = o.model;
    rep["irf"] = !o.irf_path.empty() ? nlohmann::json(o.irf_path)
                                     : nlohmann::json({{"gaussian_fwhm_ps", o.irf_fwhm_ps}});

    std::optional<std::pair<double, double>> ref;
    if (o.tau_ref_ps) ref = {{*o.tau_ref_ps, o.tau_ref_err_ps}};
    if (!o.ref_path.empty()) {
        const auto rh = decay::load_decay_histogram(o.ref_path);
        const auto rf = decay::fit_lifetime(rh, *irf, decay::DecayKind::single_exp);
        ref = {{rf.model.tau1, rf.tau_error(0)}};
        rep["reference"] = decay::lifetime_report(rf);
        rep["reference"]["input"] = o.ref_path;
    }
    if (ref) {
        // the biexciton is the faster component of the cascade
        int which = 0;
        if (o.model == "xx" && f.model.tau2 < f.model.tau1) which = 1;
        const double tau = which == 0 ? f.model.tau1 : f.model.tau2;
        const auto fp = decay::purcell_factor(ref->first, tau, ref->second, f.tau_error(which));
        rep["purcell"] = {{"F_P", fp.value},
                          {"err", finite_or_null(fp.uncertainty)},
                          {"tau_ref_ps", ref->first},
                          {"tau_ref_err_ps", ref->second},
                          {"tau_cav_ps", tau}};
    }
    out.json("lifetime_report.json", rep);

    const auto model = decay::convolve_model_with_irf(f.model, *irf, hist.bin_centers());
    out.csv("lifetime_fit.csv", csv_text({"time_ps", "counts", "model"}, {hist.bin_centers(), hist.counts(), model}));

    io::Plot plot;
    plot.title = "Lifetime fit";
    plot.x_label = "time (ps)";
    plot.y_label = "counts";
    plot.log_y = true;
    plot.series.push_back(io::PlotSeries{hist.bin_centers(), hist.counts(), "data", kPalette[0], true});
    plot.series.push_back(io::PlotSeries{hist.bin_centers(), model, "fit", kPalette[3], false});
    out.svg("lifetime_fit.svg", plot);
}

void cmd_g2(const RunConfig& rc, const G2Options& o, Outputs& out) {
    const std::string& path = input_at(rc, 0, "coincidence histogram");
    const auto h = correlation::load_coincidence_histogram(path, o.rep_ns);
    const auto comb = correlation::locate_peaks(h, o.rep_ns);
    const auto g = correlation::g2_zero(h, o.window_ns, o.rep_ns, comb.offset_ns);
    nlohmann::json rep = correlation::g2_report(g);
    rep["comb"] = correlation::comb_report(comb);
    rep["input"] = path;
    out.json("g2_report.json", rep);

    std::vector<double> order, center, area;
    for (std::size_t i = 0; i < comb.orders.size(); ++i) {
        order.push_back(comb.orders[i]);
        center.push_back(comb.centers_ns[i]);
        area.push_back(comb.areas[i]);
    }
    out.csv("g2_peaks.csv", csv_text({"order", "center_ns", "area"}, {order, center, area}));

    io::Plot plot;
    plot.title = "Second-order autocorrelation";
    plot.x_label = "delay (ns)";
    plot.y_label = "coincidences";
    plot.series.push_back(io::PlotSeries{h.delays(), h.counts(), "", kPalette[0], false});
    plot.markers.push_back({comb.offset_ns, "g2(0) = " + io::format_double(std::round(g.g2_0 * 1e4) / 1e4)});
    out.svg("g2_histogram.svg", plot);
}

void cmd_michelson(const RunConfig& rc, const MichelsonOptions& o, Outputs& out) {
    coherence::VisibilityTrace trace;
    nlohmann::json inputs = rc.inputs;
    if (o.wavelength_nm) {
        if (rc.inputs.empty()) throw ValidationError("missing input: fringe scans");
        std::vector<coherence::FringeScan> scans;
        for (const auto& p : rc.inputs) scans.push_back(coherence::load_fringe_scan(p));
        trace = coherence::trace_from_scans(scans, *o.wavelength_nm);
    } else {
        if (rc.inputs.size() != 1)
            throw ValidationError("expected one visibility trace; fringe scans need --wavelength");
        trace = coherence::load_visibility_trace(rc.inputs[0]);
    }
    const auto f = coherence::fit_coherence(trace, o.tau_ps);
    nlohmann::json rep = coherence::coherence_report(f);
    rep["inputs"] = inputs;
    if (o.wavelength_nm) rep["wavelength_nm"] = *o.wavelength_nm;
    if (o.tau_ps) rep["tau_ps"] = *o.tau_ps;
    out.json("coherence_report.json", rep);

    std::vector<double> model;
    for (double t : trace.delays_ps) model.push_back(coherence::visibility_model(t, f.result.t_g_ps, f.result.t_l_ps));
    out.csv("visibility.csv", csv_text({"delay_ps", "visibility", "err", "model"},
                                       {trace.delays_ps, trace.visibilities, trace.uncertainties, model}));

    io::Plot plot;
    plot.title = "Fringe visibility";
    plot.x_label = "delay (ps)";
    plot.y_label = "visibility";
    plot.series.push_back(io::PlotSeries{trace.delays_ps, trace.visibilities, "data", kPalette[0], true});
    io::PlotSeries curve;
    const double tmax = trace.delays_ps.empty() ? 1.0 : *std::max_element(trace.delays_ps.begin(), trace.delays_ps.end());
    curve.x = linspace(0.0, tmax, 300);
    for (double t : curve.x) curve.y.push_back(coherence::visibility_model(t, f.result.t_g_ps, f.result.t_l_ps));
    curve.label = "Voigt fit";
    curve.color = kPalette[3];
    plot.series.push_back(curve);
    out.svg("visibility.svg", plot);
}

void cmd_etch(const RunConfig& rc, const EtchOptions& o, Outputs& out) {
    const std::string& path = input_at(rc, 0, "etch series");
    const auto series = etch::load_etch_series(path);
    etch::EnergySource src;
    if (o.source == "rt")
        src = etch::EnergySource::room_temperature;
    else if (o.source == "lt")
        src = etch::EnergySource::low_temperature;
    else
        throw ValidationError("unknown energy source", o.source);
    if (o.sensitivity && !o.sweep_report.empty()) throw ValidationError("--sensitivity and --sweep-report are exclusive");

    const std::set<int> exclude(o.exclude.begin(), o.exclude.end());
    const auto fit_ex = etch::fit_shift_per_cycle(series, exclude, src);
    const auto fit_raw = etch::fit_shift_per_cycle(series, {}, src);
    const double mean_raw = etch::mean_shift_per_cycle(series, src);

    std::optional<etch::Estimate> temperature;
    std::size_t pairs = 0, qs = 0;
    for (const auto& r : series.records) {
        if (r.flagged()) continue;
        if (r.ec_rt_ev && r.ec_lt_ev) ++pairs;
        if (r.q) ++qs;
    }
    if (pairs > 0) temperature = etch::temperature_offset(series);
    std::optional<etch::QTrend> qtrend;
    if (qs >= 3) qtrend = etch::fit_q_trend(series);

    std::optional<double> sens = o.sensitivity;
    double sens_err = o.sensitivity_err;
    if (!o.sweep_report.empty()) {
        std::ifstream f(o.sweep_report);
        if (!f) throw ParseError("cannot open sweep report", o.sweep_report);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(f);
            sens = j.at("sensitivity_nm_per_nm").get<double>();
            sens_err = j.value("sensitivity_err", nlohmann::json(0.0)).is_number() ? j.at("sensitivity_err").get<double>()
                                                                                  : 0.0;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid sweep report: ") + e.what(), o.sweep_report);
        }
    }
    std::optional<etch::Estimate> removal;
    if (sens) {
        const double err = std::isfinite(fit_ex.slope_nm.uncertainty) ? fit_ex.slope_nm.uncertainty : 0.0;
        removal = etch::estimate_removal_depth(fit_ex.slope_nm.value, *sens, err, sens_err);
    }

    nlohmann::json rep = etch::tuning_report(fit_ex, fit_raw, mean_raw, temperature, qtrend, removal);
    rep["input"] = path;
    rep["source"] = o.source;
    if (sens) rep["sensitivity_nm_per_nm"] = {*sens, sens_err};

    // last recorded energy per device
    std::map<std::string, std::pair<int, double>> last;
    for (const auto& r : series.records) {
        const auto& e = src == etch::EnergySource::room_temperature ? r.ec_rt_ev : r.ec_lt_ev;
        if (r.flagged() || !e) continue;
        auto it = last.find(r.device_id);
        if (it == last.end() || r.cycle >= it->second.first) last[r.device_id] = {r.cycle, *e};
    }
    if (o.target_ev) {
        nlohmann::json plan = nlohmann::json::array();
        for (const auto& d : series.devices()) {
            auto it = last.find(d);
            if (it == last.end()) continue;
            const auto p = etch::predict_cycles_to_target(it->second.second, *o.target_ev, fit_ex.slope_ev.value);
            plan.push_back({{"device", d}, {"ec_now_eV", it->second.second}, {"cycles", p.cycles},
                            {"residual_eV", p.residual_ev}});
        }
        rep["plan"] = {{"target_eV", *o.target_ev}, {"devices", plan}};
    }
    out.json("etch_report.json", rep);

    std::ostringstream table;
    table << "device,cycle,energy_eV\n";
    io::Plot plot;
    plot.title = "Cavity mode energy per etch cycle";
    plot.x_label = "etch cycle";
    plot.y_label = "E_c (eV)";
    std::size_t k = 0;
    for (const auto& d : series.devices()) {
        io::PlotSeries ps;
        ps.label = d;
        ps.color = kPalette[k++ % 10];
        ps.markers = true;
        for (const auto& r : series.records) {
            const auto& e = src == etch::EnergySource::room_temperature ? r.ec_rt_ev : r.ec_lt_ev;
            if (r.device_id != d || r.flagged() || !e) continue;
            table << d << ',' << r.cycle << ',' << io::format_double(*e) << '\n';
            ps.x.push_back(r.cycle);
            ps.y.push_back(*e);
        }
        plot.series.push_back(ps);
    }
    out.csv("etch_energies.csv", table.str());
    out.svg("etch_energies.svg", plot);
}

void cmd_simulate(const RunConfig& rc, const SimulateOptions& o, Outputs& out) {
    const FdtdSetup s = fdtd_setup(rc, o.resolution);
    const auto kind = scene_kind(o.scene);
    const fdtd::CbrGeometry g = fdtd::build_geometry(s.geometry, o.delta_nm);

    std::optional<fdtd::SpectrumResult> r;
    nlohmann::json rep;
    if (o.observable == "purcell") {
        r = fdtd::compute_purcell_spectrum(g, s.dipole, s.config, kind);
        const auto pk = fdtd::spectrum_peak(r->spectrum);
        rep["peak"] = {{"energy_eV", pk.energy_ev}, {"wavelength_nm", PhysicalConstants::hc_ev_nm / pk.energy_ev},
                       {"F_P", pk.value}};
    } else if (o.observable == "reflectance") {
        r = fdtd::compute_reflectance_spectrum(g, s.beam, s.config, kind);
        if (o.near_ev) {
            const auto f = fdtd::fit_mode_dip(r->spectrum, *o.near_ev);
            rep["mode_fit"] = lineshapes::fano_report(f);
        }
    } else if (o.observable == "extraction") {
        if (kind != fdtd::Scene::Kind::cbr) throw ValidationError("extraction is computed for the cbr scene only");
        r = fdtd::compute_extraction_efficiency(g, s.dipole, s.config);
    } else {
        throw ValidationError("unknown observable", o.observable);
    }
    rep["observable"] = o.observable;
    rep["scene"] = o.scene;
    rep["delta_nm"] = o.delta_nm;
    rep["reference"] = r->reference;
    rep["provenance"] = r->provenance;
    rep["config"] = setup_json(s);
    rep["energies_eV"] = std::vector<double>(r->spectrum.axis().begin(), r->spectrum.axis().end());
    rep["values"] = std::vector<double>(r->spectrum.intensity().begin(), r->spectrum.intensity().end());

    if (o.dump_fields) {
        for (const char* c : {"ez", "hx", "hy"}) {
            out.reserve(std::string("field_") + c + ".bin");
            out.reserve(std::string("field_") + c + ".json");
        }
        std::optional<double> t;
        if (o.dump_time_fs) t = *o.dump_time_fs * 1e-15;
        fdtd::dump_dipole_fields(g, s.dipole, s.config, kind, (rc.output_dir / "field").string(), t);
        rep["field_dumps"] = {"field_ez", "field_hx", "field_hy"};
    }

    const std::string stem = "simulate_" + o.observable;
    out.json(stem + ".json", rep);
    out.csv(stem + ".csv", spectrum_csv(r->spectrum, o.observable));
    io::Plot plot;
    plot.title = o.observable + " (" + o.scene + ", delta = " + io::format_double(o.delta_nm) + " nm)";
    plot.x_label = "energy (eV)";
    plot.y_label = o.observable;
    plot.series.push_back(series_of(r->spectrum, "", kPalette[0]));
    if (rep.contains("mode_fit")) plot.markers.push_back({rep["mode_fit"]["E_c_eV"].get<double>(), "E_c"});
    if (rep.contains("peak")) plot.markers.push_back({rep["peak"]["energy_eV"].get<double>(), "peak"});
    out.svg(stem + ".svg", plot);
}

void cmd_sweep(const RunConfig& rc, const SweepOptions& o, Outputs& out) {
    const FdtdSetup s = fdtd_setup(rc, o.resolution);
    const auto deltas = fdtd::sweep_deltas(o.steps, o.step_nm);
    const auto r = fdtd::etch_sweep(s.geometry, deltas, s.config, s.dipole, s.beam, rc.jobs);

    nlohmann::json rep = fdtd::sweep_report(r);
    rep["steps"] = o.steps;
    rep["step_nm"] = o.step_nm;
    rep["config"] = setup_json(s);
    out.json("sweep_report.json", rep);
    out.csv("sweep.csv", to_text([](std::ostream& os, const fdtd::SweepResult& x) { fdtd::write_sweep_csv(os, x); }, r));

    auto heatmap = [&](const std::vector<fdtd::SpectrumResult>& spectra, const std::string& value) {
        std::ostringstream os;
        os << "delta_nm,energy_eV,wavelength_nm," << value << '\n';
        for (std::size_t m = 0; m < spectra.size(); ++m) {
            const auto& sp = spectra[m].spectrum;
            for (std::size_t i = 0; i < sp.size(); ++i)
                os << io::format_double(r.rows[m].delta_nm) << ',' << io::format_double(sp.axis()[i]) << ','
                   << io::format_double(PhysicalConstants::hc_ev_nm / sp.axis()[i]) << ','
                   << io::format_double(sp.intensity()[i]) << '\n';
        }
        return os.str();
    };
    out.csv("heatmap_reflectance.csv", heatmap(r.reflectance, "reflectance"));
    out.csv("heatmap_purcell.csv", heatmap(r.purcell, "purcell"));
    out.csv("heatmap_extraction.csv", heatmap(r.extraction, "extraction"));

    io::Plot ec;
    ec.title = "Cavity mode versus etch depth";
    ec.x_label = "delta (nm)";
    ec.y_label = "E_c (eV)";
    io::PlotSeries fit{{}, {}, "reflectance dip", kPalette[0], true};
    io::PlotSeries peak{{}, {}, "Purcell peak", kPalette[1], true};
    for (const auto& row : r.rows) {
        fit.x.push_back(row.delta_nm);
        fit.y.push_back(row.ec_ev);
        peak.x.push_back(row.delta_nm);
        peak.y.push_back(row.fp_peak_ev);
    }
    ec.series = {fit, peak};
    out.svg("sweep_ec.svg", ec);

    io::Plot refl;
    refl.title = "Reflectance per etch step";
    refl.x_label = "energy (eV)";
    refl.y_label = "relative reflectance";
    for (std::size_t m = 0; m < r.reflectance.size(); ++m)
        refl.series.push_back(series_of(r.reflectance[m].spectrum, m == 0 || m + 1 == r.reflectance.size()
                                                                       ? "delta " + io::format_double(r.rows[m].delta_nm)
                                                                       : "",
                                        kPalette[m % 10]));
    out.svg("sweep_reflectance.svg", refl);
}

void cmd_synth(const RunConfig& rc, const SynthOptions& o, Outputs& out) {
    std::mt19937_64 rng(rc.seed);
    nlohmann::json truth{{"kind", o.kind}, {"noiseless", o.noiseless}};
    auto stem = [&](const char* def) { return o.name.empty() ? std::string(def) : o.name; };

    if (o.kind == "fano") {
        const lineshapes::FanoParams p{o.amplitude, o.baseline, o.q, o.ec_ev, o.gamma_ev};
        p.validate();
        if (o.points < 8) throw ParameterError("--points must be at least 8");
        const double noise = o.noiseless ? 0.0 : o.noise;
        std::normal_distribution<double> n01(0.0, 1.0);
        std::vector<double> e = linspace(o.ec_ev - 10.0 * o.gamma_ev, o.ec_ev + 10.0 * o.gamma_ev, o.points), y;
        for (double x : e) y.push_back(std::max(0.0, lineshapes::fano_value(x, p) + noise * o.amplitude * n01(rng)));
        const spectra::Spectrum s(e, y, spectra::AxisKind::energy_ev, "synthetic fano");
        out.csv(stem("fano_spectrum") + ".csv", to_text(spectra::write_spectrum, s));
        truth["params"] = {{"A", p.amplitude}, {"B", p.baseline}, {"q", p.q}, {"E_c", p.center_ev},
                           {"Gamma_c", p.width_ev}};
        truth["noise"] = noise;
    } else if (o.kind == "decay") {
        if (o.bins < 16) throw ParameterError("--bins must be at least 16");
        decay::DecayModel m;
        m.t0 = 0.1 * o.bins * o.bin_ps;
        m.background = o.background;
        m.tau1 = o.tau_ps;
        if (o.tau2_ps) {
            m.kind = decay::DecayKind::bi_exp;
            m.tau2 = *o.tau2_ps;
            m.amp1 = 0.5 * o.counts / m.tau1;
            m.amp2 = 0.5 * o.counts / m.tau2;
        } else {
            m.amp1 = o.counts / m.tau1;
        }
        m.validate();
        const auto irf = decay::Irf::gaussian(o.bin_ps, o.irf_fwhm_ps);
        const auto h = decay::synthesize_histogram(m, irf, 0.5 * o.bin_ps, static_cast<std::size_t>(o.bins), rng,
                                                   !o.noiseless);
        out.csv(stem("decay") + ".csv", to_text(decay::write_decay_histogram, h));
        std::vector<double> w;
        for (double v : irf.weights()) w.push_back(1e4 * v);
        const decay::DecayHistogram ih(irf.offsets(), w);
        out.csv(stem("decay") + "_irf.csv", to_text(decay::write_decay_histogram, ih));
        truth["params"] = {{"tau_ps", o.tau_ps}, {"t0_ps", m.t0}, {"counts", o.counts}, {"background", o.background},
                           {"irf_fwhm_ps", o.irf_fwhm_ps}, {"bin_ps", o.bin_ps}};
        if (o.tau2_ps) truth["params"]["tau2_ps"] = *o.tau2_ps;
    } else if (o.kind == "g2") {
        correlation::CombSpec spec;
        spec.center_ratio = o.ratio;
        spec.side_area = o.side_area;
        const auto h = correlation::synthesize_comb(spec, rng, !o.noiseless);
        out.csv(stem("g2") + ".csv", to_text(correlation::write_coincidence_histogram, h));
        truth["params"] = {{"center_ratio", o.ratio}, {"side_area", o.side_area},
                           {"rep_period_ns", spec.rep_period_ns}};
    } else if (o.kind == "michelson") {
        std::vector<double> d;
        for (int i = 0; i <= 40; ++i) d.push_back(10.0 * i);
        if (o.fringes) {
            int k = 0;
            for (double t : d) {
                const auto scan = coherence::synthesize_fringe_scan(coherence::visibility_model(t, o.t_g_ps, o.t_l_ps),
                                                                    o.wavelength_nm, 2000.0, 39, 20.0, 0.1 * k, t, rng,
                                                                    !o.noiseless);
                char name[32];
                std::snprintf(name, sizeof name, "_%03d.csv", k++);
                out.csv(stem("fringe") + name, to_text(coherence::write_fringe_scan, scan));
            }
        } else {
            const auto tr =
                coherence::synthesize_visibility_trace(o.t_g_ps, o.t_l_ps, d, o.noiseless ? 0.0 : o.vis_noise, rng);
            out.csv(stem("visibility") + ".csv", to_text(coherence::write_visibility_trace, tr));
        }
        truth["params"] = {{"t_G_ps", o.t_g_ps}, {"t_L_ps", o.t_l_ps}, {"noise", o.noiseless ? 0.0 : o.vis_noise},
                           {"wavelength_nm", o.wavelength_nm}};
    } else if (o.kind == "etch") {
        etch::EtchSynthSpec spec;
        spec.n_devices = o.devices;
        spec.n_cycles = o.cycles;
        spec.shift_ev = o.shift_mev * 1e-3;
        spec.first_cycle_extra_ev = o.first_extra_mev * 1e-3;
        if (o.noiseless) spec.noise_ev = spec.lt_noise_ev = spec.q_noise = 0.0;
        const auto series = etch::synthesize_etch_series(spec, rng);
        out.csv(stem("etch_series") + ".csv", to_text(etch::write_etch_series, series));
        truth["params"] = {{"shift_meV", o.shift_mev}, {"first_cycle_extra_meV", o.first_extra_mev},
                           {"devices", o.devices}, {"cycles", o.cycles}, {"q_slope", spec.q_slope},
                           {"lt_offset_eV", spec.lt_offset_ev}};
    } else {
        throw ValidationError("unknown synth kind", o.kind);
    }
    out.json((o.name.empty() ? "synth_" + o.kind : o.name + "_truth") + ".json", truth);
}

}  // namespace cbr::cli
