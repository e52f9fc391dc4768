#include "nldiag/circuit.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace nldiag {

// ============================================================================
// Components and netlists
// ============================================================================

std::string to_string(ComponentKind kind) {
    switch (kind) {
        case ComponentKind::resistor: return "resistor";
        case ComponentKind::sin_voltage_source: return "sin_voltage_source";
        case ComponentKind::capacitor: return "capacitor";
        case ComponentKind::diode: return "diode";
        case ComponentKind::nonlinear_inductor: return "nonlinear_inductor";
    }
    return "unknown";
}

std::optional<ComponentKind> parse_component_kind(const std::string& text) {
    for (ComponentKind kind : {ComponentKind::resistor, ComponentKind::sin_voltage_source, ComponentKind::capacitor,
                               ComponentKind::diode, ComponentKind::nonlinear_inductor}) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

ComponentKind Component::kind() const { return static_cast<ComponentKind>(params.index()); }

int Component::internal_states() const {
    ComponentKind k = kind();
    return (k == ComponentKind::sin_voltage_source || k == ComponentKind::nonlinear_inductor) ? 1 : 0;
}

Component resistor(std::string id, std::string n0, std::string n1, double ohms) {
    return {std::move(id), ResistorParams{ohms}, {std::move(n0), std::move(n1)}};
}

Component sine_source(std::string id, std::string n0, std::string n1, SineSourceParams p) {
    return {std::move(id), p, {std::move(n0), std::move(n1)}};
}

Component capacitor(std::string id, std::string n0, std::string n1, double farads) {
    return {std::move(id), CapacitorParams{farads}, {std::move(n0), std::move(n1)}};
}

Component diode(std::string id, std::string anode, std::string cathode, DiodeParams p) {
    return {std::move(id), p, {std::move(anode), std::move(cathode)}};
}

Component nonlinear_inductor(std::string id, std::string n0, std::string n1, InductorParams p) {
    return {std::move(id), p, {std::move(n0), std::move(n1)}};
}

namespace {

void require_positive(double value, const std::string& what, const std::string& id) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ValidationError("component '" + id + "': " + what + " must be positive");
    }
}

void validate_params(const Component& c) {
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ResistorParams>) {
                require_positive(p.resistance, "resistance", c.id);
            } else if constexpr (std::is_same_v<P, SineSourceParams>) {
                if (!(p.frequency >= 0.0) || !std::isfinite(p.amplitude) || !std::isfinite(p.phase) ||
                    !std::isfinite(p.offset) || !std::isfinite(p.frequency)) {
                    throw ValidationError("component '" + c.id + "': invalid source parameters");
                }
            } else if constexpr (std::is_same_v<P, CapacitorParams>) {
                require_positive(p.capacitance, "capacitance", c.id);
            } else if constexpr (std::is_same_v<P, DiodeParams>) {
                require_positive(p.saturation_current, "saturation current", c.id);
                require_positive(p.emission, "emission coefficient", c.id);
                require_positive(p.thermal_voltage, "thermal voltage", c.id);
            } else if constexpr (std::is_same_v<P, InductorParams>) {
                require_positive(p.l0, "L0", c.id);
                require_positive(p.i_sat, "Isat", c.id);
            }
        },
        c.params);
}

}  // namespace

void Netlist::validate() const {
    std::set<std::string> declared;
    for (const std::string& node : nodes) {
        if (!declared.insert(node).second) {
            throw ValidationError("duplicate node '" + node + "'");
        }
    }
    if (ground.empty() || !declared.count(ground)) {
        throw ValidationError("missing ground node");
    }
    if (gmin_ohms && !(*gmin_ohms > 0.0 && std::isfinite(*gmin_ohms))) {
        throw ValidationError("gmin_ohms must be positive");
    }
    std::set<std::string> ids;
    std::set<std::string> used;
    for (const Component& c : components) {
        if (c.id.empty()) {
            throw ValidationError("component with empty id");
        }
        if (!ids.insert(c.id).second) {
            throw ValidationError("duplicate component id '" + c.id + "'");
        }
        for (const std::string& t : c.terminals) {
            if (!declared.count(t)) {
                throw ValidationError("component '" + c.id + "' references undeclared node '" + t + "'");
            }
            used.insert(t);
        }
        validate_params(c);
    }
    if (gmin_ohms) {
        for (const Component& c : components) {
            if (c.kind() == ComponentKind::diode && ids.count(c.id + kGminSuffix)) {
                throw ValidationError("gmin resistor id '" + c.id + kGminSuffix + "' collides with a component");
            }
        }
    }
    for (const std::string& node : nodes) {
        if (node != ground && !used.count(node)) {
            throw ValidationError("dangling node '" + node + "'");
        }
    }
}

FaultSpec sign_flip(std::string component_id) {
    return {std::move(component_id), FaultKind::jacobian_sign_flip, 1.0};
}

FaultSpec scale(std::string component_id, double factor) {
    return {std::move(component_id), FaultKind::jacobian_scale, factor};
}

std::string to_string(FaultKind kind) {
    return kind == FaultKind::jacobian_sign_flip ? "jacobian_sign_flip" : "jacobian_scale";
}

// ============================================================================
// Composition
// ============================================================================

ComposedCircuit::ComposedCircuit(const Netlist& netlist) {
    netlist.validate();
    components_ = netlist.components;
    if (netlist.gmin_ohms) {
        for (const Component& c : netlist.components) {
            if (c.kind() == ComponentKind::diode) {
                components_.push_back(resistor(c.id + kGminSuffix, c.terminals[0], c.terminals[1], *netlist.gmin_ohms));
            }
        }
    }
    for (const std::string& node : netlist.nodes) {
        if (node == netlist.ground) continue;
        node_index_[node] = static_cast<Index>(unknown_names_.size());
        unknown_names_.push_back("V(" + node + ")");
    }
    dynamic_mask_.assign(unknown_names_.size(), false);
    auto terminal_index = [&](const std::string& node) -> Index {
        return node == netlist.ground ? -1 : node_index_.at(node);
    };
    Index row = 0;
    for (std::size_t c = 0; c < components_.size(); ++c) {
        const Component& comp = components_[c];
        component_index_[comp.id] = c;
        Resolved res;
        res.t0 = terminal_index(comp.terminals[0]);
        res.t1 = terminal_index(comp.terminals[1]);
        if (comp.internal_states() == 1) {
            res.state = static_cast<Index>(unknown_names_.size());
            unknown_names_.push_back((comp.kind() == ComponentKind::nonlinear_inductor ? "iL(" : "I(") + comp.id + ")");
            dynamic_mask_.push_back(comp.kind() == ComponentKind::nonlinear_inductor);
        }
        if (comp.kind() == ComponentKind::capacitor) {
            if (res.t0 >= 0) dynamic_mask_[res.t0] = true;
            if (res.t1 >= 0) dynamic_mask_[res.t1] = true;
        }
        resolved_.push_back(res);
        row_ranges_.push_back({row, row + comp.residual_rows()});
        row_target_.push_back(res.t0);
        row_target_.push_back(res.t1);
        if (res.state >= 0) row_target_.push_back(res.state);
        row += comp.residual_rows();
    }
}

Index ComposedCircuit::node_index(const std::string& node) const {
    auto it = node_index_.find(node);
    if (it == node_index_.end()) {
        throw ValidationError("unknown or ground node '" + node + "'");
    }
    return it->second;
}

std::optional<std::size_t> ComposedCircuit::component_index(const std::string& id) const {
    auto it = component_index_.find(id);
    if (it == component_index_.end()) return std::nullopt;
    return it->second;
}

RowRange ComposedCircuit::rows_of(const std::string& id) const {
    auto c = component_index(id);
    if (!c) {
        throw ValidationError("unknown component '" + id + "'");
    }
    return row_ranges_[*c];
}

const std::string& ComposedCircuit::owner_of_row(Index row) const {
    for (std::size_t c = 0; c < row_ranges_.size(); ++c) {
        if (row_ranges_[c].contains(row)) return components_[c].id;
    }
    throw std::out_of_range("owner_of_row: row out of range");
}

Matrix ComposedCircuit::stamp() const {
    Matrix a = Matrix::Zero(dim(), residual_rows());
    for (Index k = 0; k < residual_rows(); ++k) {
        if (row_target(k) >= 0) a(row_target(k), k) = 1.0;
    }
    return a;
}

namespace {

constexpr double kDiodeClamp = 200.0;

struct DiodeEval {
    double current;
    double conductance;
};

// exp is continued linearly beyond the clamp so residual and derivative stay consistent.
DiodeEval diode_eval(const DiodeParams& p, double v) {
    const double nvt = p.emission * p.thermal_voltage;
    const double u = v / nvt;
    double e;
    double de;
    if (u > kDiodeClamp) {
        const double ec = std::exp(kDiodeClamp);
        e = ec * (1.0 + (u - kDiodeClamp));
        de = ec;
    } else {
        e = std::exp(u);
        de = e;
    }
    return {p.saturation_current * (e - 1.0), p.saturation_current * de / nvt};
}

}  // namespace

void ComposedCircuit::stamp_component(std::size_t c, const Vector& x, const EvalContext& ctx, Vector* r,
                                      Matrix* rj, Vector* scales) const {
    const Component& comp = components_[c];
    const Resolved& res = resolved_[c];
    const Index row = row_ranges_[c].begin;
    const double v0 = res.t0 >= 0 ? x(res.t0) : 0.0;
    const double v1 = res.t1 >= 0 ? x(res.t1) : 0.0;
    auto beta_at = [&](Index k) { return (k >= 0 && ctx.beta.size() > 0) ? ctx.beta(k) : 0.0; };
    // Writes +g / -g derivative pattern of a two-terminal branch current.
    auto branch_jac = [&](double g) {
        if (!rj) return;
        if (res.t0 >= 0) {
            (*rj)(row, res.t0) += g;
            (*rj)(row + 1, res.t0) -= g;
        }
        if (res.t1 >= 0) {
            (*rj)(row, res.t1) -= g;
            (*rj)(row + 1, res.t1) += g;
        }
    };
    auto branch_res = [&](double current) {
        if (!r) return;
        (*r)(row) = current;
        (*r)(row + 1) = -current;
    };
    auto branch_scale = [&](double magnitude) {
        if (!scales) return;
        (*scales)(row) = magnitude;
        (*scales)(row + 1) = magnitude;
    };
    switch (comp.kind()) {
        case ComponentKind::resistor: {
            const double g = 1.0 / std::get<ResistorParams>(comp.params).resistance;
            branch_res((v0 - v1) * g);
            branch_jac(g);
            branch_scale((std::abs(v0) + std::abs(v1)) * g);
            break;
        }
        case ComponentKind::capacitor: {
            const double cap = std::get<CapacitorParams>(comp.params).capacitance;
            branch_res(ctx.alpha * cap * (v0 - v1) - cap * (beta_at(res.t0) - beta_at(res.t1)));
            branch_jac(ctx.alpha * cap);
            branch_scale(std::abs(ctx.alpha) * cap * (std::abs(v0) + std::abs(v1)) +
                         cap * (std::abs(beta_at(res.t0)) + std::abs(beta_at(res.t1))));
            break;
        }
        case ComponentKind::diode: {
            const DiodeEval d = diode_eval(std::get<DiodeParams>(comp.params), v0 - v1);
            branch_res(d.current);
            branch_jac(d.conductance);
            branch_scale(std::abs(d.current) + 2.0 * std::get<DiodeParams>(comp.params).saturation_current);
            break;
        }
        case ComponentKind::sin_voltage_source: {
            const auto& p = std::get<SineSourceParams>(comp.params);
            const double current = x(res.state);
            const double vt = p.offset + p.amplitude * std::sin(2.0 * std::numbers::pi * p.frequency * ctx.t + p.phase);
            if (r) {
                (*r)(row) = current;
                (*r)(row + 1) = -current;
                (*r)(row + 2) = v0 - v1 - vt;
            }
            if (scales) {
                (*scales)(row) = std::abs(current);
                (*scales)(row + 1) = std::abs(current);
                (*scales)(row + 2) = std::abs(v0) + std::abs(v1) + std::abs(vt);
            }
            if (rj) {
                (*rj)(row, res.state) += 1.0;
                (*rj)(row + 1, res.state) -= 1.0;
                if (res.t0 >= 0) (*rj)(row + 2, res.t0) += 1.0;
                if (res.t1 >= 0) (*rj)(row + 2, res.t1) -= 1.0;
            }
            break;
        }
        case ComponentKind::nonlinear_inductor: {
            const auto& p = std::get<InductorParams>(comp.params);
            const double i = x(res.state);
            const double s = p.i_sat * p.i_sat + i * i;
            const double isat3 = p.i_sat * p.i_sat * p.i_sat;
            const double dflux = p.l0 * isat3 / (s * std::sqrt(s));
            const double ddflux = -3.0 * p.l0 * isat3 * i / (s * s * std::sqrt(s));
            const double rate = ctx.alpha * i - beta_at(res.state);
            if (r) {
                (*r)(row) = i;
                (*r)(row + 1) = -i;
                (*r)(row + 2) = v0 - v1 - dflux * rate;
            }
            if (scales) {
                (*scales)(row) = std::abs(i);
                (*scales)(row + 1) = std::abs(i);
                (*scales)(row + 2) = std::abs(v0) + std::abs(v1) +
                                     dflux * (std::abs(ctx.alpha * i) + std::abs(beta_at(res.state)));
            }
            if (rj) {
                (*rj)(row, res.state) += 1.0;
                (*rj)(row + 1, res.state) -= 1.0;
                if (res.t0 >= 0) (*rj)(row + 2, res.t0) += 1.0;
                if (res.t1 >= 0) (*rj)(row + 2, res.t1) -= 1.0;
                (*rj)(row + 2, res.state) += -ddflux * rate - dflux * ctx.alpha;
            }
            break;
        }
    }
}

Vector ComposedCircuit::component_residuals(const Vector& x, const EvalContext& ctx) const {
    if (x.size() != dim()) {
        throw ValidationError("component_residuals: state has wrong dimension");
    }
    Vector r = Vector::Zero(residual_rows());
    for (std::size_t c = 0; c < components_.size(); ++c) {
        stamp_component(c, x, ctx, &r, nullptr);
    }
    return r;
}

Vector ComposedCircuit::component_residual_scales(const Vector& x, const EvalContext& ctx) const {
    if (x.size() != dim()) {
        throw ValidationError("component_residual_scales: state has wrong dimension");
    }
    Vector s = Vector::Zero(residual_rows());
    for (std::size_t c = 0; c < components_.size(); ++c) {
        stamp_component(c, x, ctx, nullptr, nullptr, &s);
    }
    return s;
}

Matrix ComposedCircuit::component_jacobian(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const {
    if (x.size() != dim()) {
        throw ValidationError("component_jacobian: state has wrong dimension");
    }
    Matrix rj = Matrix::Zero(residual_rows(), dim());
    for (std::size_t c = 0; c < components_.size(); ++c) {
        stamp_component(c, x, ctx, nullptr, &rj);
    }
    for (const auto& [c, fault] : faults.by_component()) {
        const RowRange rows = row_ranges_[c];
        const double factor = fault.kind == FaultKind::jacobian_sign_flip ? -1.0 : fault.factor;
        const bool inductor_scale =
            fault.kind == FaultKind::jacobian_scale && components_[c].kind() == ComponentKind::nonlinear_inductor;
        if (inductor_scale) {
            // Only the flux-derivative entry of the constraint row is affected.
            rj(rows.end - 1, resolved_[c].state) *= factor;
        } else {
            rj.middleRows(rows.begin, rows.size()) *= factor;
        }
    }
    return rj;
}

Vector ComposedCircuit::system_residual(const Vector& x, const EvalContext& ctx) const {
    const Vector r = component_residuals(x, ctx);
    Vector f = Vector::Zero(dim());
    for (Index k = 0; k < residual_rows(); ++k) {
        if (row_target(k) >= 0) f(row_target(k)) += r(k);
    }
    return f;
}

Matrix ComposedCircuit::system_jacobian(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const {
    const Matrix rj = component_jacobian(x, ctx, faults);
    Matrix j = Matrix::Zero(dim(), dim());
    for (Index k = 0; k < residual_rows(); ++k) {
        if (row_target(k) >= 0) j.row(row_target(k)) += rj.row(k);
    }
    return j;
}

WideMatrix ComposedCircuit::wide_system_jacobian(const Vector& x, const EvalContext& ctx,
                                                 const FaultSet& faults) const {
    const Matrix rj = component_jacobian(x, ctx, faults);
    WideMatrix j = WideMatrix::Zero(dim(), dim());
    for (Index k = 0; k < residual_rows(); ++k) {
        if (row_target(k) >= 0) j.row(row_target(k)) += rj.row(k).cast<long double>();
    }
    return j;
}

CircuitEvaluation ComposedCircuit::evaluate(const Vector& x, const EvalContext& ctx, const FaultSet& faults) const {
    CircuitEvaluation out;
    out.component_residual = component_residuals(x, ctx);
    out.component_jacobian = component_jacobian(x, ctx, faults);
    out.residual = Vector::Zero(dim());
    out.jacobian = Matrix::Zero(dim(), dim());
    for (Index k = 0; k < residual_rows(); ++k) {
        if (row_target(k) < 0) continue;
        out.residual(row_target(k)) += out.component_residual(k);
        out.jacobian.row(row_target(k)) += out.component_jacobian.row(k);
    }
    return out;
}

FaultSet::FaultSet(const ComposedCircuit& circuit, const std::vector<FaultSpec>& faults) : specs_(faults) {
    for (const FaultSpec& f : faults) {
        auto c = circuit.component_index(f.component_id);
        if (!c) {
            throw ValidationError("fault references unknown component '" + f.component_id + "'");
        }
        if (f.kind == FaultKind::jacobian_scale && !std::isfinite(f.factor)) {
            throw ValidationError("fault scale factor must be finite");
        }
        by_component_.emplace(*c, f);
    }
}

CircuitSystem::CircuitSystem(const ComposedCircuit& circuit, const FaultSet& faults, EvalContext ctx)
    : circuit_(circuit), faults_(faults), ctx_(std::move(ctx)) {}

Vector CircuitSystem::solve_jacobian(const Vector& x, const Vector& f) const {
    return lu_solve(circuit_.wide_system_jacobian(x, ctx_, faults_), f);
}

Vector CircuitSystem::residual_scale(const Vector& x) const {
    const Vector s = circuit_.component_residual_scales(x, ctx_);
    Vector out = Vector::Zero(dim());
    for (Index k = 0; k < circuit_.residual_rows(); ++k) {
        if (circuit_.row_target(k) >= 0) out(circuit_.row_target(k)) += s(k);
    }
    return out;
}

// ============================================================================
// Fixtures
// ============================================================================

namespace {

const SineSourceParams kMains{12.0, 60.0, 0.0, 0.0};

}  // namespace

Netlist build_diode_bridge(double gmin_ohms) {
    Netlist n;
    n.nodes = {"0", "1", "2", "3"};
    n.ground = "0";
    n.components = {
        diode("D1", "3", "1"),
        diode("D2", "0", "2"),
        diode("D3", "2", "1"),
        diode("D4", "0", "3"),
    };
    for (int i = 0; i < 4; ++i) {
        const Component d = n.components[static_cast<std::size_t>(i)];
        n.components.push_back(resistor(d.id + kGminSuffix, d.terminals[0], d.terminals[1], gmin_ohms));
    }
    n.components.push_back(resistor("R_load", "1", "0", 20.0));
    n.components.push_back(capacitor("C_filter", "1", "0", 5e-3));
    n.components.push_back(sine_source("V_src", "3", "2", kMains));
    return n;
}

Netlist with_gmin(Netlist netlist, double ohms) {
    std::set<std::string> diodes;
    for (const Component& c : netlist.components) {
        if (c.kind() == ComponentKind::diode) diodes.insert(c.id);
    }
    bool explicit_shunts = false;
    for (Component& c : netlist.components) {
        const std::string suffix = kGminSuffix;
        if (c.kind() != ComponentKind::resistor || c.id.size() <= suffix.size() ||
            c.id.compare(c.id.size() - suffix.size(), suffix.size(), suffix) != 0) {
            continue;
        }
        if (diodes.count(c.id.substr(0, c.id.size() - suffix.size()))) {
            std::get<ResistorParams>(c.params).resistance = ohms;
            explicit_shunts = true;
        }
    }
    if (!explicit_shunts) netlist.gmin_ohms = ohms;
    return netlist;
}

std::vector<FaultSpec> bridge_two_error_faults() {
    return {sign_flip(std::string("D1") + kGminSuffix), sign_flip(std::string("D3") + kGminSuffix)};
}

std::vector<FaultSpec> bridge_one_error_faults() { return {sign_flip(std::string("D1") + kGminSuffix)}; }

namespace {

// Bridge fed between hot and ground. The diode from hot to the top output is
// declared last so its shunt closes the block.
void add_bridge(Netlist& n, const std::string& tag, const std::string& hot, const std::string& ground,
                const std::string& top, const std::string& bottom) {
    auto add = [&](const std::string& name, const std::string& a, const std::string& k) {
        const std::string id = tag + "_" + name;
        n.components.push_back(diode(id, a, k));
        n.components.push_back(resistor(id + kGminSuffix, a, k, 1e12));
    };
    add("D2", bottom, ground);
    add("D3", ground, top);
    add("D4", bottom, hot);
    add("D1", hot, top);
}

}  // namespace

Netlist build_power_channel() {
    Netlist n;
    n.ground = "0";
    for (int i = 0; i <= 13; ++i) {
        n.nodes.push_back(std::to_string(i));
    }
    n.components.push_back(sine_source("V_src", "1", "0", kMains));
    add_bridge(n, "A", "1", "0", "2", "3");
    n.components.push_back(resistor("A_R", "2", "3", 20.0));
    n.components.push_back(capacitor("A_C", "2", "3", 5e-3));
    add_bridge(n, "B", "1", "0", "4", "5");
    n.components.push_back(resistor("B_R", "4", "5", 2e3));
    n.components.push_back(capacitor("B_C", "4", "5", 5e-3));
    add_bridge(n, "C", "1", "0", "6", "7");
    n.components.push_back(resistor("C_R", "6", "7", 10e-3));
    n.components.push_back(capacitor("C_C", "6", "7", 5e-3));
    add_bridge(n, "D", "1", "0", "8", "9");
    n.components.push_back(resistor("D_R", "8", "10", 10.0));
    n.components.push_back(nonlinear_inductor("D_L", "10", "9", InductorParams{1e-3, 1.0}));
    n.components.push_back(capacitor("D_C", "8", "9", 10e-6));
    n.components.push_back(resistor("RC_R", "1", "0", 1.0));
    n.components.push_back(capacitor("RC_C", "1", "0", 5e-3));
    std::string prev = "1";
    for (int stage = 1; stage <= 3; ++stage) {
        const std::string node = std::to_string(10 + stage);
        const std::string tag = "CH" + std::to_string(stage);
        n.components.push_back(diode(tag + "_D", prev, node));
        n.components.push_back(resistor(tag + "_D" + kGminSuffix, prev, node, 1e12));
        n.components.push_back(resistor(tag + "_R", node, "0", 1.0));
        n.components.push_back(capacitor(tag + "_C", node, "0", 1e-12));
        prev = node;
    }
    return n;
}

std::vector<FaultSpec> power_channel_faults() {
    return {sign_flip(std::string("A_D1") + kGminSuffix), scale("D_L", 0.95)};
}

}  // namespace nldiag
