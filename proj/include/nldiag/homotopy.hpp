#pragma once

#include "nldiag/circuit.hpp"
#include "nldiag/diagnostics.hpp"
#include "nldiag/localize.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nldiag {

struct BdfCoefficients {
    double alpha = 0.0;
    Vector beta;
};

/// dx/dt at t_{n+1} is approximated as alpha * x_{n+1} - beta.
/// history[0] = x_n, history[1] = x_{n-1}. Order 2 uses the derivative of the
/// quadratic through (t_{n-1}, x_{n-1}), (t_n, x_n), (t_{n+1}, x_{n+1}).
BdfCoefficients bdf_coefficients(int order, double dt, std::optional<double> dt_previous,
                                 const std::vector<Vector>& history);

struct StepperConfig {
    int order = 1;
    double dt = 2e-7;
    double t_end = 20e-3;
    SolverConfig solver;
    std::set<EigenMethod> diag_mode{EigenMethod::probe, EigenMethod::dmd};
    bool localize_on_flags = true;
    double localize_threshold = 0.5;
    AnomalyConfig anomaly;

    void validate() const;
    long step_count() const;
};

enum class StepStatus { ok, solver_failed };

std::string to_string(StepStatus status);

struct OutlierLocalization {
    EigenMethod method = EigenMethod::probe;
    Index outlier_index = 0;
    LocalizationResult result;
};

struct StepRecord {
    long index = 0;
    double t = 0.0;
    int order_used = 1;
    Vector x;
    SolverTrace trace;
    std::map<EigenMethod, EigenReport> eigen;
    std::map<EigenMethod, AnomalyReport> anomalies;
    std::vector<OutlierLocalization> localization;
    StepStatus status = StepStatus::ok;
    std::string note;

    /// Leading |lambda| from the probe report when usable, else from dmd.
    std::optional<double> leading_magnitude() const;
};

struct TaggedCrossing {
    EigenMethod method = EigenMethod::probe;
    CrossingEvent event;
};

struct RunReport {
    std::vector<std::string> unknown_names;
    std::vector<StepRecord> steps;
    std::vector<TaggedCrossing> crossings;
    bool terminated_early = false;
    std::string reason;
    long order_fallbacks = 0;
};

/// Baseline eigenvalue cluster center of a solver: 0 for full Newton, 1 - alpha otherwise.
Complex baseline_center(const SolverConfig& solver);

/// Runs the requested diagnostics on a converged step and fills its reports.
void diagnose_step(const CircuitSystem& system, StepRecord& record, const StepperConfig& config);

/// Solves one time step from x_guess and diagnoses it when it converges.
StepRecord step(const ComposedCircuit& circuit, const FaultSet& faults, double t_next, const BdfCoefficients& coeffs,
                const Vector& x_guess, const StepperConfig& config);

/// Integrates from t = 0 with an all-zero state; stops at the first solver failure.
RunReport run(const Netlist& netlist, const std::vector<FaultSpec>& faults, const StepperConfig& config);

struct SweepCell {
    long step_index = 0;
    double t = 0.0;
    double value = 0.0;
    int order = 1;
    std::optional<double> leading_magnitude;  ///< empty marks a failed cell
};

struct SweepValueSummary {
    double value = 0.0;
    long steps_completed = 0;
    bool terminated_early = false;
    long flagged_steps = 0;
    double flagged_time = 0.0;
    /// Leading probe eigenvectors at the first and last flagged steps.
    std::optional<std::pair<long, ComplexVector>> first_flagged;
    std::optional<std::pair<long, ComplexVector>> last_flagged;
    /// Flagged steps at which localization found no dominant peak.
    long no_peak_steps = 0;
    long localized_steps = 0;
};

struct ParameterSweep {
    std::vector<SweepCell> cells;
    std::vector<SweepValueSummary> summaries;
};

/// One full run per parameter value. When summarize is given it is called with each run.
ParameterSweep sweep_parameter(const std::function<Netlist(double)>& family, const std::vector<double>& values,
                               const std::vector<FaultSpec>& faults, const StepperConfig& stepper,
                               const std::function<void(double, const RunReport&)>& observe = {});

struct StepSizeSweep {
    RunReport base;
    std::vector<SweepCell> cells;  ///< value holds the candidate dt
};

/// From every stride-th accepted base step, attempts one step with each candidate dt
/// and order, reusing the base history, and records the leading probe |lambda|.
StepSizeSweep stepsize_sweep(const Netlist& netlist, const std::vector<FaultSpec>& faults,
                             const StepperConfig& base, const std::vector<double>& candidate_dts,
                             const std::vector<int>& orders, long stride = 1);

/// count values from start to stop, log or linearly spaced, both ends included.
std::vector<double> spaced_values(double start, double stop, int count, bool logarithmic);

}  // namespace nldiag
