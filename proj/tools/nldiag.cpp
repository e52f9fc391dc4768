#include "nldiag/homotopy.hpp"
#include "nldiag/netlist_io.hpp"
#include "nldiag/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace nldiag;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSolverFailure = 3;

struct CommonOptions {
    std::string netlist;
    std::string faults;
    double dt = 2e-7;
    double t_end = 20e-3;
    int order = 1;
    double tol = 1e-8;
    int max_iter = 20;
    double alpha = 1.0;
    std::string diag = "probe,dmd";
    double localize_threshold = 0.5;
    std::optional<double> gmin;
    std::string out_dir = "out";
};

struct SweepOptions {
    std::string mode = "gmin";
    std::string values;
    std::string orders = "1,2";
    long stride = 1;
};

struct RosenbrockOptions {
    std::string jacobian = "analytic";
    double fd_h = 0.01;
    double alpha = 1.0;
    long dimension = 100;
    std::string probe_scheme = "central";
    std::string out_dir = "out";
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ParseError("bad number '" + text + "' in " + what);
}

std::set<EigenMethod> parse_diag(const std::string& text) {
    std::set<EigenMethod> out;
    for (const std::string& item : split(text, ',')) {
        if (item == "probe") {
            out.insert(EigenMethod::probe);
        } else if (item == "dmd") {
            out.insert(EigenMethod::dmd);
        } else if (item != "none" && !item.empty()) {
            throw ParseError("unknown diagnostic '" + item + "' (expected probe, dmd or none)");
        }
    }
    return out;
}

/// START:STOP:log|lin[:COUNT] or a single value.
std::vector<double> parse_values(const std::string& text, int default_count) {
    const auto parts = split(text, ':');
    if (parts.size() == 1) return {parse_double(parts[0], "--values")};
    if (parts.size() != 3 && parts.size() != 4) throw ParseError("--values expects START:STOP:log|lin[:COUNT]");
    const double start = parse_double(parts[0], "--values");
    const double stop = parse_double(parts[1], "--values");
    if (parts[2] != "log" && parts[2] != "lin") throw ParseError("--values spacing must be log or lin");
    int count = default_count;
    if (parts.size() == 4) count = static_cast<int>(parse_double(parts[3], "--values"));
    if (count < 1) throw ValidationError("--values count must be positive");
    if (parts[2] == "log" && (start <= 0.0 || stop <= 0.0)) throw ValidationError("log spacing needs positive bounds");
    return spaced_values(start, stop, count, parts[2] == "log");
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct LoadedInput {
    NetlistDocument doc;
    std::map<std::string, std::string> digests;
};

LoadedInput load_input(const CommonOptions& opt) {
    if (opt.netlist.empty()) throw ParseError("--netlist is required");
    LoadedInput in;
    in.doc = load_netlist(opt.netlist);
    if (fixture(opt.netlist)) {
        in.digests["fixture:" + opt.netlist] = sha256_hex(serialize_netlist(in.doc));
    } else {
        in.digests[opt.netlist] = sha256_hex(read_bytes(opt.netlist));
    }
    if (!opt.faults.empty()) {
        in.doc.faults = parse_fault_list(opt.faults);
        if (fs::is_regular_file(opt.faults)) in.digests[opt.faults] = sha256_hex(read_bytes(opt.faults));
    }
    if (opt.gmin) in.doc.netlist = with_gmin(in.doc.netlist, *opt.gmin);
    in.doc.netlist.validate();
    return in;
}

StepperConfig stepper_from(const CommonOptions& opt) {
    StepperConfig cfg;
    cfg.order = opt.order;
    cfg.dt = opt.dt;
    cfg.t_end = opt.t_end;
    cfg.solver.tol = opt.tol;
    cfg.solver.max_iter = opt.max_iter;
    cfg.solver.alpha = opt.alpha;
    cfg.diag_mode = parse_diag(opt.diag);
    cfg.localize_threshold = opt.localize_threshold;
    cfg.validate();
    return cfg;
}

nlohmann::json faults_json(const std::vector<FaultSpec>& faults) {
    nlohmann::json out = nlohmann::json::array();
    for (const FaultSpec& f : faults) {
        nlohmann::json item = {{"component", f.component_id}, {"kind", to_string(f.kind)}};
        if (f.kind == FaultKind::jacobian_scale) item["factor"] = f.factor;
        out.push_back(item);
    }
    return out;
}

int cmd_simulate(const CommonOptions& opt, const std::vector<std::string>& argv) {
    const LoadedInput in = load_input(opt);
    const StepperConfig cfg = stepper_from(opt);
    const RunReport report = run(in.doc.netlist, in.doc.faults, cfg);
    write_run_reports(opt.out_dir, report);
    RunManifest manifest{"simulate", argv, to_json(cfg), in.digests};
    manifest.config["netlist"] = opt.netlist;
    manifest.config["faults"] = faults_json(in.doc.faults);
    if (opt.gmin) manifest.config["gmin"] = *opt.gmin;
    write_manifest(opt.out_dir, manifest);
    std::cout << "steps " << report.steps.size() << ", crossings " << report.crossings.size() << '\n';
    if (report.terminated_early) {
        std::cerr << report.reason << '\n';
        return kExitSolverFailure;
    }
    return kExitOk;
}

void write_eigvec_dump(const fs::path& file, const SweepValueSummary& s, const std::vector<std::string>& names) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << "which,step,unknown,re,im\n";
    auto dump = [&](const char* which, const std::optional<std::pair<long, ComplexVector>>& v) {
        if (!v) return;
        for (Index i = 0; i < v->second.size(); ++i) {
            out << which << ',' << v->first << ',' << names[static_cast<std::size_t>(i)] << ','
                << format_number(v->second(i).real()) << ',' << format_number(v->second(i).imag()) << '\n';
        }
    };
    dump("first", s.first_flagged);
    dump("last", s.last_flagged);
}

int cmd_sweep(const CommonOptions& opt, const SweepOptions& sw, const std::vector<std::string>& argv) {
    const LoadedInput in = load_input(opt);
    const StepperConfig cfg = stepper_from(opt);
    RunManifest manifest{"sweep", argv, to_json(cfg), in.digests};
    manifest.config["netlist"] = opt.netlist;
    manifest.config["faults"] = faults_json(in.doc.faults);
    manifest.config["mode"] = sw.mode;
    fs::create_directories(opt.out_dir);
    if (sw.mode == "gmin") {
        const std::vector<double> values =
            sw.values.empty() ? std::vector<double>{opt.gmin.value_or(1e12)} : parse_values(sw.values, 8);
        for (double v : values) {
            if (!(v > 0.0)) throw ValidationError("gmin values must be positive");
        }
        manifest.config["values"] = values;
        const Netlist base = in.doc.netlist;
        std::vector<std::string> names;
        const ParameterSweep result = sweep_parameter(
            [&](double r) { return with_gmin(base, r); }, values, in.doc.faults, cfg,
            [&](double, const RunReport& rep) { names = rep.unknown_names; });
        write_grid(opt.out_dir, result.cells);
        std::ofstream summary(fs::path(opt.out_dir) / "summary.csv", std::ios::binary | std::ios::trunc);
        summary << "value,steps_completed,terminated_early,flagged_steps,flagged_time,no_peak_steps,localized_steps\n";
        for (std::size_t k = 0; k < result.summaries.size(); ++k) {
            const SweepValueSummary& s = result.summaries[k];
            summary << format_number(s.value) << ',' << s.steps_completed << ','
                    << (s.terminated_early ? "true" : "false") << ',' << s.flagged_steps << ','
                    << format_number(s.flagged_time) << ',' << s.no_peak_steps << ',' << s.localized_steps << '\n';
            write_eigvec_dump(fs::path(opt.out_dir) / ("eigvecs_" + std::to_string(k) + ".csv"), s, names);
        }
    } else if (sw.mode == "dt") {
        if (sw.values.empty()) throw ParseError("--values is required for --mode dt");
        const std::vector<double> dts = parse_values(sw.values, 20);
        std::vector<int> orders;
        for (const std::string& o : split(sw.orders, ',')) {
            const double v = parse_double(o, "--orders");
            if (v != 1.0 && v != 2.0) throw ValidationError("--orders entries must be 1 or 2");
            orders.push_back(static_cast<int>(v));
        }
        if (sw.stride < 1) throw ValidationError("--stride must be positive");
        manifest.config["values"] = dts;
        manifest.config["orders"] = orders;
        manifest.config["stride"] = sw.stride;
        const StepSizeSweep result = stepsize_sweep(in.doc.netlist, in.doc.faults, cfg, dts, orders, sw.stride);
        write_grid(opt.out_dir, result.cells);
    } else {
        throw ParseError("--mode must be dt or gmin");
    }
    write_manifest(opt.out_dir, manifest);
    return kExitOk;
}

int cmd_rosenbrock(const RosenbrockOptions& opt, const std::vector<std::string>& argv) {
    if (opt.dimension < 2) throw ValidationError("--dimension must be at least 2");
    FdScheme scheme;
    if (opt.probe_scheme == "forward") {
        scheme = FdScheme::forward;
    } else if (opt.probe_scheme == "central") {
        scheme = FdScheme::central;
    } else {
        throw ParseError("--probe-scheme must be forward or central");
    }
    SolverConfig solver;
    solver.alpha = opt.alpha;
    if (opt.jacobian == "fd") {
        solver.jacobian_mode = JacobianMode::forward(opt.fd_h);
    } else if (opt.jacobian != "analytic") {
        throw ParseError("--jacobian must be analytic or fd");
    }
    solver.validate();
    const RosenbrockSystem system(opt.dimension);
    const Vector ones = Vector::Ones(opt.dimension);
    const SolverMap map(system, solver);
    const Matrix m = linearize_map_probe(map, ones, default_probe_step(ones), scheme);
    const EigenReport spectrum = eigs(m, opt.dimension);
    const EigenReport hessian = eigs(system.jacobian(ones), opt.dimension);
    write_spectrum(fs::path(opt.out_dir) / "spectrum.csv", spectrum.eigenvalues);
    write_spectrum(fs::path(opt.out_dir) / "hessian_spectrum.csv", hessian.eigenvalues);
    RunManifest manifest{"rosenbrock", argv,
                         {{"jacobian", opt.jacobian},
                          {"fd_h", opt.fd_h},
                          {"alpha", opt.alpha},
                          {"dimension", opt.dimension},
                          {"probe_scheme", opt.probe_scheme}},
                         {}};
    write_manifest(opt.out_dir, manifest);
    std::cout << "leading |lambda| " << format_number(spectrum.leading_magnitude()) << '\n';
    return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--netlist", opt.netlist, "Netlist JSON file or fixture name")->required();
    cmd->add_option("--faults", opt.faults, "Fault list file or ID:sign_flip,ID:scale:F");
    cmd->add_option("--dt", opt.dt, "Time step in seconds");
    cmd->add_option("--t-end", opt.t_end, "End time in seconds");
    cmd->add_option("--order", opt.order, "BDF order (1 or 2)");
    cmd->add_option("--tol", opt.tol, "Residual 2-norm tolerance");
    cmd->add_option("--max-iter", opt.max_iter, "Newton iteration cap");
    cmd->add_option("--alpha", opt.alpha, "Damping factor");
    cmd->add_option("--diag", opt.diag, "Diagnostics: probe,dmd or none");
    cmd->add_option("--localize-threshold", opt.localize_threshold, "Relative localization cut");
    cmd->add_option("--gmin", opt.gmin, "Diode shunt resistance in ohms");
    cmd->add_option("--out-dir", opt.out_dir, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Solver convergence diagnostics for nonlinear systems and circuits"};
    app.require_subcommand(1);
    std::vector<std::string> args(argv, argv + argc);

    CommonOptions sim_opt;
    auto* sim = app.add_subcommand("simulate", "Transient run with per-step diagnostics");
    add_common(sim, sim_opt);

    CommonOptions sweep_opt;
    SweepOptions sweep_extra;
    auto* sweep = app.add_subcommand("sweep", "Time step or gmin sweep");
    add_common(sweep, sweep_opt);
    sweep->add_option("--mode", sweep_extra.mode, "dt or gmin");
    sweep->add_option("--values", sweep_extra.values, "START:STOP:log|lin[:COUNT]");
    sweep->add_option("--orders", sweep_extra.orders, "BDF orders for dt mode");
    sweep->add_option("--stride", sweep_extra.stride, "Base steps between dt sweep columns");

    RosenbrockOptions ros_opt;
    auto* ros = app.add_subcommand("rosenbrock", "Solver map spectrum on the Rosenbrock gradient");
    ros->add_option("--jacobian", ros_opt.jacobian, "analytic or fd");
    ros->add_option("--fd-h", ros_opt.fd_h, "Finite-difference Jacobian step");
    ros->add_option("--alpha", ros_opt.alpha, "Damping factor");
    ros->add_option("--dimension", ros_opt.dimension, "Problem dimension");
    ros->add_option("--probe-scheme", ros_opt.probe_scheme, "forward or central");
    ros->add_option("--out-dir", ros_opt.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        app.exit(e);
        return kExitParse;
    }

    try {
        if (*sim) return cmd_simulate(sim_opt, args);
        if (*sweep) return cmd_sweep(sweep_opt, sweep_extra, args);
        if (*ros) return cmd_rosenbrock(ros_opt, args);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitParse;
    }
    return kExitParse;
}
