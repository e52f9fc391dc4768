#pragma once

#include "nldiag/nlsolve.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nldiag {

// ============================================================================
// Netlist description
// ============================================================================

struct ResistorParams {
    double resistance = 1.0;
    bool operator==(const ResistorParams&) const = default;
};

/// V(t) = offset + amplitude * sin(2 pi f t + phase).
struct SineSourceParams {
    double amplitude = 0.0;
    double frequency = 0.0;
    double phase = 0.0;
    double offset = 0.0;
    bool operator==(const SineSourceParams&) const = default;
};

struct CapacitorParams {
    double capacitance = 1.0;
    bool operator==(const CapacitorParams&) const = default;
};

struct DiodeParams {
    double saturation_current = 1e-12;
    double emission = 1.0;
    double thermal_voltage = 0.026;
    bool operator==(const DiodeParams&) const = default;
};

/// Flux lambda(i) = L0 * Isat * i / sqrt(Isat^2 + i^2).
struct InductorParams {
    double l0 = 1e-3;
    double i_sat = 1.0;
    bool operator==(const InductorParams&) const = default;
};

using ComponentParams =
    std::variant<ResistorParams, SineSourceParams, CapacitorParams, DiodeParams, InductorParams>;

enum class ComponentKind { resistor, sin_voltage_source, capacitor, diode, nonlinear_inductor };

std::string to_string(ComponentKind kind);
std::optional<ComponentKind> parse_component_kind(const std::string& text);

struct Component {
    std::string id;
    ComponentParams params;
    std::array<std::string, 2> terminals;

    ComponentKind kind() const;
    int internal_states() const;
    int residual_rows() const { return 2 + internal_states(); }
    bool operator==(const Component&) const = default;
};

Component resistor(std::string id, std::string n0, std::string n1, double ohms);
Component sine_source(std::string id, std::string n0, std::string n1, SineSourceParams p);
Component capacitor(std::string id, std::string n0, std::string n1, double farads);
Component diode(std::string id, std::string anode, std::string cathode, DiodeParams p = {});
Component nonlinear_inductor(std::string id, std::string n0, std::string n1, InductorParams p);

struct Netlist {
    std::vector<std::string> nodes;
    std::string ground;
    std::vector<Component> components;
    std::optional<double> gmin_ohms;

    void validate() const;
    bool operator==(const Netlist&) const = default;
};

enum class FaultKind { jacobian_sign_flip, jacobian_scale };

struct FaultSpec {
    std::string component_id;
    FaultKind kind = FaultKind::jacobian_sign_flip;
    double factor = 1.0;
    bool operator==(const FaultSpec&) const = default;
};

FaultSpec sign_flip(std::string component_id);
FaultSpec scale(std::string component_id, double factor);
std::string to_string(FaultKind kind);

/// Suffix of the parallel resistor appended for each diode when gmin_ohms is set.
inline constexpr const char* kGminSuffix = "_gmin";

// ============================================================================
// Composed circuit
// ============================================================================

struct RowRange {
    Index begin = 0;
    Index end = 0;
    Index size() const { return end - begin; }
    bool contains(Index row) const { return row >= begin && row < end; }
};

/// Evaluation context of one time step: dx/dt is replaced by alpha*x - beta.
/// beta is indexed like the full unknown vector; entries of static unknowns are ignored.
struct EvalContext {
    double t = 0.0;
    double alpha = 0.0;
    Vector beta;
};

class ComposedCircuit;

/// Faults resolved against a composed circuit.
class FaultSet {
public:
    FaultSet() = default;
    FaultSet(const ComposedCircuit& circuit, const std::vector<FaultSpec>& faults);

    const std::vector<FaultSpec>& specs() const { return specs_; }
    bool empty() const { return specs_.empty(); }
    /// Faults keyed by component index.
    const std::multimap<std::size_t, FaultSpec>& by_component() const { return by_component_; }

private:
    std::vector<FaultSpec> specs_;
    std::multimap<std::size_t, FaultSpec> by_component_;
};

struct CircuitEvaluation {
    Vector residual;            ///< F = A r
    Matrix jacobian;            ///< implemented J = A R
    Vector component_residual;  ///< r
    Matrix component_jacobian;  ///< implemented R (faults applied)
};

class ComposedCircuit {
public:
    explicit ComposedCircuit(const Netlist& netlist);

    Index dim() const { return static_cast<Index>(unknown_names_.size()); }
    Index residual_rows() const { return static_cast<Index>(row_target_.size()); }

    /// Components including appended gmin resistors.
    const std::vector<Component>& components() const { return components_; }
    const std::vector<std::string>& unknown_names() const { return unknown_names_; }
    const std::vector<bool>& dynamic_mask() const { return dynamic_mask_; }
    /// Unknown index of a non-ground node voltage.
    Index node_index(const std::string& node) const;

    std::optional<std::size_t> component_index(const std::string& id) const;
    RowRange rows_of(const std::string& id) const;
    RowRange rows_of(std::size_t component) const { return row_ranges_[component]; }
    /// Id of the component owning a residual-stack row.
    const std::string& owner_of_row(Index row) const;

    /// System row receiving a component row, or -1 when the row sits on ground.
    Index row_target(Index row) const { return row_target_[static_cast<std::size_t>(row)]; }
    /// Dense 0/1 stamp matrix A (system rows x residual rows).
    Matrix stamp() const;

    Vector component_residuals(const Vector& x, const EvalContext& ctx) const;
    /// Per-row sum of the magnitudes of the terms forming each component residual.
    Vector component_residual_scales(const Vector& x, const EvalContext& ctx) const;
    /// Implemented component derivative stack R with faults applied.
    Matrix component_jacobian(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const;
    /// F = A r.
    Vector system_residual(const Vector& x, const EvalContext& ctx) const;
    /// J = A R.
    Matrix system_jacobian(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const;
    /// J = A R accumulated in extended precision, so small shunt conductances survive
    /// next to large capacitive stamps on the same row.
    WideMatrix wide_system_jacobian(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const;
    CircuitEvaluation evaluate(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const;

private:
    struct Resolved {
        Index t0 = -1;
        Index t1 = -1;
        Index state = -1;
    };

    void stamp_component(std::size_t c, const Vector& x, const EvalContext& ctx, Vector* r, Matrix* rj,
                         Vector* scales = nullptr) const;

    std::vector<Component> components_;
    std::vector<Resolved> resolved_;
    std::vector<RowRange> row_ranges_;
    std::vector<Index> row_target_;
    std::vector<std::string> unknown_names_;
    std::vector<bool> dynamic_mask_;
    std::map<std::string, Index> node_index_;
    std::map<std::string, std::size_t> component_index_;
};

/// One-step algebraic system of a circuit frozen at (t, alpha, beta) with faults.
class CircuitSystem : public ResidualSystem {
public:
    CircuitSystem(const ComposedCircuit& circuit, const FaultSet& faults, EvalContext ctx);

    Index dim() const override { return circuit_.dim(); }
    Vector residual(const Vector& x) const override { return circuit_.system_residual(x, ctx_); }
    Matrix jacobian(const Vector& x) const override { return circuit_.system_jacobian(x, ctx_, faults_); }
    Vector residual_scale(const Vector& x) const override;
    /// Factors the extended-precision Jacobian.
    Vector solve_jacobian(const Vector& x, const Vector& f) const override;

    const ComposedCircuit& circuit() const { return circuit_; }
    const FaultSet& faults() const { return faults_; }
    const EvalContext& context() const { return ctx_; }
    Vector component_residuals(const Vector& x) const { return circuit_.component_residuals(x, ctx_); }
    Matrix component_jacobian(const Vector& x) const { return circuit_.component_jacobian(x, ctx_, faults_); }
    Vector component_residual_scales(const Vector& x) const { return circuit_.component_residual_scales(x, ctx_); }

private:
    const ComposedCircuit& circuit_;
    const FaultSet& faults_;
    EvalContext ctx_;
};

// ============================================================================
// Fixtures
// ============================================================================

/// Full-wave diode bridge: 12 V 60 Hz source, 20 ohm load, 5 mF filter.
/// Each diode has an explicit shunt "<id>_gmin" declared right after the diodes, so the
/// shunts of the red diode D1 (3->1) and the blue diode D3 (2->1) sit at rows 8-9 and 12-13.
Netlist build_diode_bridge(double gmin_ohms = 1e12);

/// Sets every diode shunt resistance: explicit "<diode>_gmin" resistors when present,
/// otherwise the netlist-wide gmin_ohms.
Netlist with_gmin(Netlist netlist, double ohms);
std::vector<FaultSpec> bridge_two_error_faults();
std::vector<FaultSpec> bridge_one_error_faults();

/// AC source driving six loads; explicit 1e12 ohm diode shunts so the faulted
/// shunt of bridge A sits at rows 17-18 and the inductor constraint at row 83.
Netlist build_power_channel();
std::vector<FaultSpec> power_channel_faults();

}  // namespace nldiag
