#include "nldiag/homotopy.hpp"

#include <cmath>

namespace nldiag {

BdfCoefficients bdf_coefficients(int order, double dt, std::optional<double> dt_previous,
                                 const std::vector<Vector>& history) {
    if (!(dt > 0.0)) {
        throw ValidationError("bdf_coefficients: dt must be positive");
    }
    if (order != 1 && order != 2) {
        throw ValidationError("bdf_coefficients: order must be 1 or 2");
    }
    if (history.size() < static_cast<std::size_t>(order)) {
        throw ValidationError("bdf_coefficients: insufficient history");
    }
    BdfCoefficients c;
    if (order == 1) {
        c.alpha = 1.0 / dt;
        c.beta = history[0] / dt;
        return c;
    }
    const double h = dt;
    const double hp = dt_previous.value_or(dt);
    if (!(hp > 0.0)) {
        throw ValidationError("bdf_coefficients: previous dt must be positive");
    }
    c.alpha = 1.0 / h + 1.0 / (h + hp);
    c.beta = history[0] * ((h + hp) / (h * hp)) - history[1] * (h / (hp * (h + hp)));
    return c;
}

void StepperConfig::validate() const {
    if (order != 1 && order != 2) {
        throw ValidationError("stepper order must be 1 or 2");
    }
    if (!(dt > 0.0)) {
        throw ValidationError("stepper dt must be positive");
    }
    if (!(t_end >= dt)) {
        throw ValidationError("stepper t_end must be at least dt");
    }
    if (!(localize_threshold > 0.0 && localize_threshold < 1.0)) {
        throw ValidationError("localize threshold must lie in (0, 1)");
    }
    solver.validate();
    anomaly.validate();
}

long StepperConfig::step_count() const { return std::lround(t_end / dt); }

std::string to_string(StepStatus status) { return status == StepStatus::ok ? "ok" : "solver_failed"; }

std::optional<double> StepRecord::leading_magnitude() const {
    for (EigenMethod method : {EigenMethod::probe, EigenMethod::dmd}) {
        auto it = eigen.find(method);
        if (it != eigen.end() && it->second.usable) return it->second.leading_magnitude();
    }
    return std::nullopt;
}

Complex baseline_center(const SolverConfig& solver) { return {1.0 - solver.alpha, 0.0}; }

void diagnose_step(const CircuitSystem& system, StepRecord& record, const StepperConfig& config) {
    const Index k = system.dim();
    for (EigenMethod method : config.diag_mode) {
        EigenReport report;
        if (method == EigenMethod::probe) {
            try {
                const SolverMap map(system, config.solver);
                const Matrix m = linearize_map_probe(map, record.x, default_probe_step(record.x));
                report = eigs(m, k, EigenMethod::probe);
            } catch (const ProbeError& e) {
                report.method = EigenMethod::probe;
                report.usable = false;
                report.reason = e.what();
            }
        } else {
            report = dmd_eigs(record.trace, k);
        }
        report.step_index = record.index;
        if (report.usable) {
            AnomalyReport anomaly = detect_anomalies(report, config.anomaly, baseline_center(config.solver));
            if (config.localize_on_flags) {
                for (Index i : anomaly.outlier_indices) {
                    OutlierLocalization loc;
                    loc.method = method;
                    loc.outlier_index = i;
                    try {
                        loc.result = localize_eigenvector(system, record.x, report.eigenvectors[i],
                                                          config.localize_threshold);
                    } catch (const std::runtime_error&) {
                        loc.result.no_dominant_peak = true;
                        loc.result.threshold_used = config.localize_threshold;
                    }
                    record.localization.push_back(std::move(loc));
                }
            }
            record.anomalies.emplace(method, std::move(anomaly));
        }
        record.eigen.emplace(method, std::move(report));
    }
}

StepRecord step(const ComposedCircuit& circuit, const FaultSet& faults, double t_next, const BdfCoefficients& coeffs,
                const Vector& x_guess, const StepperConfig& config) {
    const CircuitSystem system(circuit, faults, EvalContext{t_next, coeffs.alpha, coeffs.beta});
    SolveResult solved = solve(system, x_guess, config.solver);
    StepRecord record;
    record.t = t_next;
    record.x = std::move(solved.solution);
    record.trace = std::move(solved.trace);
    if (record.trace.status != SolveStatus::converged) {
        record.status = StepStatus::solver_failed;
        record.note = to_string(record.trace.status);
        return record;
    }
    diagnose_step(system, record, config);
    return record;
}

RunReport run(const Netlist& netlist, const std::vector<FaultSpec>& faults, const StepperConfig& config) {
    config.validate();
    const ComposedCircuit circuit(netlist);
    const FaultSet fault_set(circuit, faults);
    RunReport report;
    report.unknown_names = circuit.unknown_names();
    std::vector<Vector> history{Vector::Zero(circuit.dim())};
    const long steps = config.step_count();
    std::vector<IndexedAnomaly> probe_track;
    std::vector<IndexedAnomaly> dmd_track;
    for (long n = 1; n <= steps; ++n) {
        const double t_next = static_cast<double>(n) * config.dt;
        int order = config.order;
        if (order == 2 && history.size() < 2) {
            order = 1;
            ++report.order_fallbacks;
        }
        const BdfCoefficients coeffs = bdf_coefficients(order, config.dt, config.dt, history);
        StepRecord record = step(circuit, fault_set, t_next, coeffs, history.front(), config);
        record.index = n;
        record.order_used = order;
        for (auto& [method, eig] : record.eigen) eig.step_index = n;
        for (EigenMethod method : config.diag_mode) {
            auto it = record.anomalies.find(method);
            IndexedAnomaly entry{n, it == record.anomalies.end() ? std::nullopt
                                                                  : std::optional<AnomalyReport>(it->second)};
            (method == EigenMethod::probe ? probe_track : dmd_track).push_back(std::move(entry));
        }
        const bool failed = record.status == StepStatus::solver_failed;
        if (!failed) {
            history.insert(history.begin(), record.x);
            if (history.size() > 2) history.pop_back();
        }
        report.steps.push_back(std::move(record));
        if (failed) {
            report.terminated_early = true;
            report.reason = "solver failed at step " + std::to_string(n) + " (" + report.steps.back().note + ")";
            break;
        }
    }
    for (const auto& [method, track] : {std::pair{EigenMethod::probe, &probe_track}, std::pair{EigenMethod::dmd, &dmd_track}}) {
        for (const CrossingEvent& e : track_crossings(*track)) {
            report.crossings.push_back({method, e});
        }
    }
    return report;
}

ParameterSweep sweep_parameter(const std::function<Netlist(double)>& family, const std::vector<double>& values,
                               const std::vector<FaultSpec>& faults, const StepperConfig& stepper,
                               const std::function<void(double, const RunReport&)>& observe) {
    ParameterSweep sweep;
    for (double value : values) {
        const RunReport report = run(family(value), faults, stepper);
        SweepValueSummary summary;
        summary.value = value;
        summary.terminated_early = report.terminated_early;
        for (const StepRecord& rec : report.steps) {
            SweepCell cell{rec.index, rec.t, value, rec.order_used, std::nullopt};
            if (rec.status == StepStatus::ok) {
                ++summary.steps_completed;
                cell.leading_magnitude = rec.leading_magnitude();
            }
            sweep.cells.push_back(cell);
            if (!cell.leading_magnitude || *cell.leading_magnitude < stepper.anomaly.unit_circle_threshold) continue;
            ++summary.flagged_steps;
            const EigenReport& eig = rec.eigen.count(EigenMethod::probe) && rec.eigen.at(EigenMethod::probe).usable
                                         ? rec.eigen.at(EigenMethod::probe)
                                         : rec.eigen.at(EigenMethod::dmd);
            auto entry = std::make_pair(rec.index, eig.eigenvectors.front());
            if (!summary.first_flagged) summary.first_flagged = entry;
            summary.last_flagged = entry;
            if (!rec.localization.empty()) {
                ++summary.localized_steps;
                bool all_quiet = true;
                for (const OutlierLocalization& loc : rec.localization) all_quiet = all_quiet && loc.result.no_dominant_peak;
                if (all_quiet) ++summary.no_peak_steps;
            }
        }
        summary.flagged_time = static_cast<double>(summary.flagged_steps) * stepper.dt;
        if (observe) observe(value, report);
        sweep.summaries.push_back(std::move(summary));
    }
    return sweep;
}

StepSizeSweep stepsize_sweep(const Netlist& netlist, const std::vector<FaultSpec>& faults, const StepperConfig& base,
                             const std::vector<double>& candidate_dts, const std::vector<int>& orders, long stride) {
    if (stride < 1) {
        throw ValidationError("stepsize_sweep: stride must be positive");
    }
    for (double dt : candidate_dts) {
        if (!(dt > 0.0)) throw ValidationError("stepsize_sweep: candidate dt must be positive");
    }
    for (int order : orders) {
        if (order != 1 && order != 2) throw ValidationError("stepsize_sweep: order must be 1 or 2");
    }
    StepSizeSweep sweep;
    sweep.base = run(netlist, faults, base);
    const ComposedCircuit circuit(netlist);
    const FaultSet fault_set(circuit, faults);
    StepperConfig cell_config = base;
    cell_config.diag_mode = {EigenMethod::probe};
    cell_config.localize_on_flags = false;
    const Vector zero = Vector::Zero(circuit.dim());
    for (std::size_t k = 0; k < sweep.base.steps.size(); k += static_cast<std::size_t>(stride)) {
        const StepRecord& current = sweep.base.steps[k];
        if (current.status != StepStatus::ok) break;
        const Vector& previous = k == 0 ? zero : sweep.base.steps[k - 1].x;
        const std::vector<Vector> history{current.x, previous};
        for (int order : orders) {
            for (double dt : candidate_dts) {
                const BdfCoefficients coeffs = bdf_coefficients(order, dt, base.dt, history);
                const StepRecord rec = step(circuit, fault_set, current.t + dt, coeffs, current.x, cell_config);
                SweepCell cell{current.index, current.t, dt, order, std::nullopt};
                if (rec.status == StepStatus::ok) cell.leading_magnitude = rec.leading_magnitude();
                sweep.cells.push_back(cell);
            }
        }
    }
    return sweep;
}

std::vector<double> spaced_values(double start, double stop, int count, bool logarithmic) {
    if (count < 1) {
        throw ValidationError("spaced_values: count must be positive");
    }
    if (logarithmic && !(start > 0.0 && stop > 0.0)) {
        throw ValidationError("spaced_values: log spacing needs positive bounds");
    }
    std::vector<double> out;
    if (count == 1) return {start};
    for (int i = 0; i < count; ++i) {
        const double f = static_cast<double>(i) / (count - 1);
        if (logarithmic) {
            out.push_back(std::pow(10.0, std::log10(start) + f * (std::log10(stop) - std::log10(start))));
        } else {
            out.push_back(start + f * (stop - start));
        }
    }
    return out;
}

}  // namespace nldiag
