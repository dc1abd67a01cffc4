#include "cbr/cli.hpp"

#include <fstream>
#include <ostream>

#include "CLI11.hpp"

#include "commands.hpp"

namespace cbr::cli {

int exit_code(ErrorClass c) {
    switch (c) {
        case ErrorClass::input: return 2;
        case ErrorClass::computation: return 3;
        case ErrorClass::internal: return 4;
    }
    return 4;
}

std::string error_line(const std::string& code, const std::string& message, const std::string& context) {
    nlohmann::json j{{"code", code}, {"message", message}, {"context", context}};
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace {

nlohmann::json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open config", path);
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid config JSON: ") + e.what(), path);
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    std::string output_dir = ".";
    std::string config_path;

    CLI::App app{"Cavity tuning toolkit: spectra, lifetimes, correlations, etch statistics and FDTD.", "cbr"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", rc.seed, "random seed, recorded in every output")->capture_default_str();
    app.add_option("--output-dir,-o", output_dir, "directory for all outputs")->capture_default_str();
    app.add_option("--jobs,-j", rc.jobs, "parallel members (sweep) or solver threads (simulate)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--config", config_path, "JSON with geometry, simulation, dipole and beam sections");

    FanoOptions fano;
    auto* c_fano = app.add_subcommand("fit-fano", "Fano fit of a cavity-mode reflectance spectrum");
    c_fano->add_option("spectrum", rc.inputs, "spectrum CSV")->required()->expected(1);
    c_fano->add_option("--window", fano.window, "fit window lo,hi in eV")->delimiter(',')->expected(2);
    c_fano->add_option("--axis", fano.axis, "axis of the file when not declared")->check(CLI::IsMember({"nm", "ev"}));

    LifetimeOptions life;
    auto* c_life = app.add_subcommand("lifetime", "IRF-reconvolution lifetime fit and Purcell factor");
    c_life->add_option("histogram", rc.inputs, "decay histogram CSV")->required()->expected(1);
    c_life->add_option("--irf", life.irf_path, "measured IRF histogram (same bin width)");
    c_life->add_option("--irf-fwhm", life.irf_fwhm_ps, "Gaussian IRF FWHM in ps when no IRF file is given");
    c_life->add_option("--model", life.model, "x | xx | single | bi")
        ->check(CLI::IsMember({"x", "xx", "single", "bi"}))
        ->capture_default_str();
    c_life->add_option("--tau-ref", life.tau_ref_ps, "reference (bulk) lifetime in ps");
    c_life->add_option("--tau-ref-err", life.tau_ref_err_ps, "uncertainty of --tau-ref in ps");
    c_life->add_option("--ref", life.ref_path, "reference histogram fitted for tau_ref");

    G2Options g2;
    auto* c_g2 = app.add_subcommand("g2", "g2(0) from a pulsed coincidence histogram");
    c_g2->add_option("histogram", rc.inputs, "coincidence histogram CSV")->required()->expected(1);
    c_g2->add_option("--window", g2.window_ns, "integration window in ns")->capture_default_str();
    c_g2->add_option("--rep", g2.rep_ns, "laser repetition period in ns")->capture_default_str();

    MichelsonOptions mich;
    auto* c_mich = app.add_subcommand("michelson", "coherence times from fringe visibility");
    c_mich->add_option("inputs", rc.inputs, "visibility trace CSV, or fringe scans with --wavelength")->required();
    c_mich->add_option("--wavelength", mich.wavelength_nm, "emission wavelength in nm (fringe scan input)");
    c_mich->add_option("--tau", mich.tau_ps, "lifetime in ps for the Fourier-limit ratio");

    EtchOptions et;
    auto* c_etch = app.add_subcommand("etch", "shift per etch cycle and removal depth");
    c_etch->add_option("series", rc.inputs, "etch series CSV")->required()->expected(1);
    c_etch->add_option("--exclude", et.exclude, "cycles whose incoming shift is stepped out")->delimiter(',');
    c_etch->add_option("--source", et.source, "rt | lt")->check(CLI::IsMember({"rt", "lt"}))->capture_default_str();
    c_etch->add_option("--sensitivity", et.sensitivity, "mode shift per removed nm (nm/nm)");
    c_etch->add_option("--sensitivity-err", et.sensitivity_err, "uncertainty of --sensitivity");
    c_etch->add_option("--sweep-report", et.sweep_report, "take the sensitivity from a sweep report");
    c_etch->add_option("--target", et.target_ev, "target energy in eV for the cycle plan");

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "2D FDTD spectrum of one geometry");
    c_sim->add_option("--observable", sim.observable, "purcell | reflectance | extraction")
        ->check(CLI::IsMember({"purcell", "reflectance", "extraction"}))
        ->capture_default_str();
    c_sim->add_option("--scene", sim.scene, "cbr | planar | homogeneous")
        ->check(CLI::IsMember({"cbr", "planar", "homogeneous"}))
        ->capture_default_str();
    c_sim->add_option("--delta", sim.delta_nm, "etch depth in nm")->capture_default_str();
    c_sim->add_option("--resolution", sim.resolution, "cells per wavelength (overrides the config)");
    c_sim->add_option("--near", sim.near_ev, "fit the reflectance dip near this energy (eV)");
    c_sim->add_flag("--dump-fields", sim.dump_fields, "write Ez, Hx, Hy snapshots of the dipole run");
    c_sim->add_option("--dump-time", sim.dump_time_fs, "snapshot time in fs (default: end of the pulse)");

    SweepOptions sw;
    auto* c_sweep = app.add_subcommand("sweep", "etch-depth sweep of the resonator");
    c_sweep->add_option("--steps", sw.steps, "number of etch steps")->capture_default_str();
    c_sweep->add_option("--step-nm", sw.step_nm, "depth per step in nm")->capture_default_str();
    c_sweep->add_option("--resolution", sw.resolution, "cells per wavelength (overrides the config)");

    SynthOptions sy;
    auto* c_synth = app.add_subcommand("synth", "synthetic input data");
    c_synth->add_option("kind", sy.kind, "fano | decay | g2 | michelson | etch")
        ->required()
        ->check(CLI::IsMember({"fano", "decay", "g2", "michelson", "etch"}));
    c_synth->add_option("--name", sy.name, "output file stem");
    c_synth->add_flag("--noiseless", sy.noiseless, "expected values instead of a noisy realisation");
    c_synth->add_option("--ec", sy.ec_ev, "fano: E_c in eV")->capture_default_str();
    c_synth->add_option("--gamma", sy.gamma_ev, "fano: Gamma_c in eV")->capture_default_str();
    c_synth->add_option("--q", sy.q, "fano: asymmetry")->capture_default_str();
    c_synth->add_option("--amplitude", sy.amplitude, "fano: A")->capture_default_str();
    c_synth->add_option("--baseline", sy.baseline, "fano: B")->capture_default_str();
    c_synth->add_option("--noise", sy.noise, "fano: noise relative to A")->capture_default_str();
    c_synth->add_option("--points", sy.points, "fano: samples")->capture_default_str();
    c_synth->add_option("--tau", sy.tau_ps, "decay: lifetime in ps")->capture_default_str();
    c_synth->add_option("--tau2", sy.tau2_ps, "decay: second lifetime in ps (bi-exponential)");
    c_synth->add_option("--counts", sy.counts, "decay: expected counts")->capture_default_str();
    c_synth->add_option("--irf-fwhm", sy.irf_fwhm_ps, "decay: Gaussian IRF FWHM in ps")->capture_default_str();
    c_synth->add_option("--bin", sy.bin_ps, "decay: bin width in ps")->capture_default_str();
    c_synth->add_option("--bins", sy.bins, "decay: number of bins")->capture_default_str();
    c_synth->add_option("--background", sy.background, "decay: counts per bin")->capture_default_str();
    c_synth->add_option("--ratio", sy.ratio, "g2: central to side peak area")->capture_default_str();
    c_synth->add_option("--side-area", sy.side_area, "g2: counts per side peak")->capture_default_str();
    c_synth->add_option("--t-g", sy.t_g_ps, "michelson: Gaussian coherence time in ps")->capture_default_str();
    c_synth->add_option("--t-l", sy.t_l_ps, "michelson: Lorentzian coherence time in ps")->capture_default_str();
    c_synth->add_option("--vis-noise", sy.vis_noise, "michelson: relative visibility noise")->capture_default_str();
    c_synth->add_option("--wavelength", sy.wavelength_nm, "michelson: wavelength in nm")->capture_default_str();
    c_synth->add_flag("--fringes", sy.fringes, "michelson: write fringe scans instead of a trace");
    c_synth->add_option("--shift", sy.shift_mev, "etch: shift per cycle in meV")->capture_default_str();
    c_synth->add_option("--first-extra", sy.first_extra_mev, "etch: extra shift into cycle 1 in meV")
        ->capture_default_str();
    c_synth->add_option("--devices", sy.devices, "etch: devices")->capture_default_str();
    c_synth->add_option("--cycles", sy.cycles, "etch: cycles including the unetched one")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << "cbr 1.0\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << error_line("usage_error", e.what(), e.get_name()) << '\n';
        return 2;
    }

    try {
        rc.output_dir = output_dir;
        if (!config_path.empty()) rc.overrides = load_config(config_path);
        Outputs outputs(rc);
        if (c_fano->parsed()) {
            rc.command = "fit-fano";
            cmd_fit_fano(rc, fano, outputs);
        } else if (c_life->parsed()) {
            rc.command = "lifetime";
            cmd_lifetime(rc, life, outputs);
        } else if (c_g2->parsed()) {
            rc.command = "g2";
            cmd_g2(rc, g2, outputs);
        } else if (c_mich->parsed()) {
            rc.command = "michelson";
            cmd_michelson(rc, mich, outputs);
        } else if (c_etch->parsed()) {
            rc.command = "etch";
            cmd_etch(rc, et, outputs);
        } else if (c_sim->parsed()) {
            rc.command = "simulate";
            cmd_simulate(rc, sim, outputs);
        } else if (c_sweep->parsed()) {
            rc.command = "sweep";
            cmd_sweep(rc, sw, outputs);
        } else if (c_synth->parsed()) {
            rc.command = "synth " + sy.kind;
            cmd_synth(rc, sy, outputs);
        } else {
            throw ValidationError("no command given");
        }
        nlohmann::json summary{{"status", "ok"}, {"command", rc.command}, {"seed", rc.seed},
                               {"output_dir", rc.output_dir.string()}, {"outputs", outputs.written()}};
        out << summary.dump() << '\n';
        return 0;
    } catch (const Error& e) {
        err << error_line(e.code(), e.what(), e.context()) << '\n';
        return exit_code(e.error_class());
    } catch (const nlohmann::json::exception& e) {
        err << error_line("parse_error", e.what(), rc.command) << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << error_line("internal_error", e.what(), rc.command) << '\n';
        return 4;
    }
}

}  // namespace cbr::cli
