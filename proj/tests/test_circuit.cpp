#include "nldiag/circuit.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace nldiag;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector random_state(std::mt19937& rng, Index n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = u(rng);
    return x;
}

EvalContext random_context(std::mt19937& rng, Index n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    EvalContext ctx;
    ctx.t = 20e-3 * u(rng);
    ctx.alpha = 1e3 + 1e4 * u(rng);
    ctx.beta = random_state(rng, n) * ctx.alpha;
    return ctx;
}

Netlist single(const Component& c) {
    Netlist n;
    n.nodes = {"g", "a"};
    n.ground = "g";
    n.components = {c};
    return n;
}

std::vector<Netlist> fixtures() {
    return {build_diode_bridge(), build_power_channel(), with_gmin(build_diode_bridge(), 1e20)};
}

}  // namespace

TEST_CASE("resistor rows follow ohm's law", "[circuit]") {
    Netlist n;
    n.nodes = {"0", "1", "2"};
    n.ground = "0";
    n.components = {resistor("R", "1", "2", 20.0), resistor("Ra", "1", "0", 1.0), resistor("Rb", "2", "0", 1.0)};
    const ComposedCircuit c(n);
    Vector x(2);
    x << 3.0, 1.0;
    const Vector r = c.component_residuals(x, EvalContext{0.0, 0.0, Vector::Zero(2)});
    CHECK(r(0) == Approx(0.1));
    CHECK(r(1) == Approx(-0.1));
}

TEST_CASE("diode rows vanish at zero bias", "[circuit]") {
    const ComposedCircuit c(single(diode("D", "a", "g")));
    const Vector r = c.component_residuals(Vector::Zero(1), EvalContext{0.0, 0.0, Vector::Zero(1)});
    CHECK(r(0) == 0.0);
    CHECK(r(1) == 0.0);
}

TEST_CASE("inductor constraint uses L0 at zero current", "[circuit]") {
    const ComposedCircuit c(single(nonlinear_inductor("L", "a", "g", InductorParams{1e-3, 1.0})));
    REQUIRE(c.dim() == 2);
    Vector x(2);
    x << 0.7, 0.0;
    EvalContext ctx{0.0, 1e5, Vector::Zero(2)};
    ctx.beta(1) = 2.0;
    const Vector r = c.component_residuals(x, ctx);
    CHECK(r(2) == Approx(0.7 - 1e-3 * (1e5 * 0.0 - 2.0)));
    CHECK(c.dynamic_mask()[1]);
}

TEST_CASE("inductor slope follows the saturation curve", "[circuit]") {
    const double l0 = 1e-3, isat = 1.0;
    const ComposedCircuit c(single(nonlinear_inductor("L", "a", "g", InductorParams{l0, isat})));
    for (double i : {-2.0, -0.3, 0.5, 1.7}) {
        Vector x(2);
        x << 0.0, i;
        EvalContext ctx{0.0, 1.0, Vector::Zero(2)};
        const double slope = l0 * std::pow(isat, 3) / std::pow(isat * isat + i * i, 1.5);
        // Constraint is V0 - V1 - slope * (alpha i - beta) with alpha = 1, beta = 0.
        CHECK(c.component_residuals(x, ctx)(2) == Approx(-slope * i).epsilon(1e-14));
    }
}

TEST_CASE("series resistors reduce to the summed conductance", "[circuit]") {
    Netlist n;
    n.nodes = {"0", "m"};
    n.ground = "0";
    n.components = {resistor("R1", "m", "0", 4.0), resistor("R2", "0", "m", 5.0)};
    const ComposedCircuit c(n);
    REQUIRE(c.dim() == 1);
    const Matrix j = c.system_jacobian(Vector::Zero(1), EvalContext{0.0, 0.0, Vector::Zero(1)}, FaultSet{});
    CHECK(j(0, 0) == Approx(1.0 / 4.0 + 1.0 / 5.0));
}

TEST_CASE("source, diode and resistor loop matches the hand-written residual", "[circuit]") {
    Netlist n;
    n.nodes = {"0", "1", "2"};
    n.ground = "2";
    n.components = {diode("D1", "0", "1"), resistor("R1", "1", "2", 50.0),
                    sine_source("V", "0", "2", SineSourceParams{2.0, 60.0, 0.0, 0.0})};
    const ComposedCircuit c(n);
    REQUIRE(c.unknown_names() == std::vector<std::string>{"V(0)", "V(1)", "I(V)"});
    Vector x(3);
    x << 0.65, 0.2, -3e-3;
    const double t = 1.3e-3;
    const Vector f = c.system_residual(x, EvalContext{t, 0.0, Vector::Zero(3)});
    const double id = 1e-12 * (std::exp((0.65 - 0.2) / 0.026) - 1.0);
    CHECK(f(0) == Approx(id + -3e-3).epsilon(1e-14));
    CHECK(f(1) == Approx(-id + 0.2 / 50.0).epsilon(1e-14));
    CHECK(f(2) == Approx(0.65 - 2.0 * std::sin(2 * kPi * 60.0 * t)).epsilon(1e-14));
}

TEST_CASE("bridge fixture layout", "[circuit]") {
    const Netlist n = build_diode_bridge();
    const ComposedCircuit c(n);
    CHECK(c.residual_rows() == 23);
    CHECK(c.components().size() == 11);
    CHECK(c.dim() == 4);
    CHECK(c.owner_of_row(8) == "D1_gmin");
    CHECK(c.owner_of_row(9) == "D1_gmin");
    CHECK(c.owner_of_row(12) == "D3_gmin");
    CHECK(c.owner_of_row(13) == "D3_gmin");
    const auto rows = c.rows_of("V_src");
    CHECK(rows.size() == 3);
}

TEST_CASE("netlist-wide gmin appends one shunt per diode", "[circuit]") {
    Netlist n;
    n.nodes = {"0", "1"};
    n.ground = "0";
    n.gmin_ohms = 1e12;
    n.components = {diode("D", "1", "0"), resistor("R", "1", "0", 10.0)};
    const ComposedCircuit c(n);
    REQUIRE(c.components().size() == 3);
    CHECK(c.components()[2].id == std::string("D") + kGminSuffix);
    CHECK(c.residual_rows() == 6);
}

TEST_CASE("power channel fixture layout", "[circuit]") {
    const ComposedCircuit c(build_power_channel());
    CHECK(c.dim() == 15);
    CHECK(c.residual_rows() == 114);
    CHECK(c.owner_of_row(17) == "A_D1_gmin");
    CHECK(c.owner_of_row(18) == "A_D1_gmin");
    CHECK(c.owner_of_row(83) == "D_L");
    CHECK(c.rows_of("D_L").end - 1 == 83);
}

TEST_CASE("bridge DC solution at t = 0 is zero", "[circuit]") {
    const ComposedCircuit c(build_diode_bridge());
    const FaultSet none;
    const CircuitSystem sys(c, none, EvalContext{0.0, 0.0, Vector::Zero(c.dim())});
    const Vector x = Vector::Zero(c.dim());
    CHECK(sys.residual(x).norm() == 0.0);
}

TEST_CASE("composition is exact on fixtures", "[circuit][property]") {
    std::mt19937 rng(4);
    for (const Netlist& n : fixtures()) {
        const ComposedCircuit c(n);
        const Matrix a = c.stamp();
        for (Index col = 0; col < a.cols(); ++col) CHECK(a.col(col).sum() <= 1.0);
        CHECK(((a.array() == 0.0) || (a.array() == 1.0)).all());
        for (int trial = 0; trial < 20; ++trial) {
            const Vector x = random_state(rng, c.dim());
            const EvalContext ctx = random_context(rng, c.dim());
            const CircuitEvaluation e = c.evaluate(x, ctx, FaultSet{});
            CHECK((e.residual - a * e.component_residual).cwiseAbs().maxCoeff() == 0.0);
            CHECK((e.jacobian - a * e.component_jacobian).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("two-terminal components conserve current", "[circuit][property]") {
    std::mt19937 rng(6);
    for (const Netlist& n : fixtures()) {
        const ComposedCircuit c(n);
        for (int trial = 0; trial < 20; ++trial) {
            const Vector x = random_state(rng, c.dim());
            const Vector r = c.component_residuals(x, random_context(rng, c.dim()));
            for (std::size_t k = 0; k < c.components().size(); ++k) {
                const ComponentKind kind = c.components()[k].kind();
                if (kind == ComponentKind::sin_voltage_source || kind == ComponentKind::nonlinear_inductor) continue;
                const RowRange rows = c.rows_of(k);
                CHECK(r(rows.begin) + r(rows.begin + 1) == 0.0);
            }
        }
    }
}

TEST_CASE("faults never touch residuals", "[circuit][property]") {
    std::mt19937 rng(8);
    const ComposedCircuit c(build_power_channel());
    const FaultSet faults(c, power_channel_faults());
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x = random_state(rng, c.dim());
        const EvalContext ctx = random_context(rng, c.dim());
        const CircuitEvaluation clean = c.evaluate(x, ctx, FaultSet{});
        const CircuitEvaluation bad = c.evaluate(x, ctx, faults);
        CHECK((clean.residual.array() == bad.residual.array()).all());
        CHECK((clean.component_residual.array() == bad.component_residual.array()).all());
    }
}

TEST_CASE("analytic jacobians agree with central differences", "[circuit][property]") {
    std::mt19937 rng(10);
    for (const Netlist& n : fixtures()) {
        const ComposedCircuit c(n);
        for (int trial = 0; trial < 100; ++trial) {
            const Vector x = random_state(rng, c.dim());
            const EvalContext ctx = random_context(rng, c.dim());
            const FaultSet none;
            const CircuitSystem sys(c, none, ctx);
            const Matrix j = sys.jacobian(x);
            const Matrix fd = fd_jacobian(sys, x, FdScheme::central, 1e-7);
            // Tolerance scales with the row so exponential diode rows are compared relatively.
            for (Index r = 0; r < j.rows(); ++r) {
                const double row_scale = std::max(1.0, j.row(r).cwiseAbs().maxCoeff());
                CHECK((j.row(r) - fd.row(r)).cwiseAbs().maxCoeff() < 1e-5 * row_scale);
            }
        }
    }
}

TEST_CASE("a diode sign flip shows up only on its stamped rows", "[circuit]") {
    const Netlist n = build_diode_bridge();
    const ComposedCircuit c(n);
    const FaultSet faults(c, {sign_flip("D1")});
    Vector x = Vector::Zero(c.dim());
    x(c.node_index("3")) = 0.6;
    const EvalContext ctx{1e-3, 1e3, Vector::Zero(c.dim())};
    const CircuitSystem sys(c, faults, ctx);
    const Matrix diff = (sys.jacobian(x) - fd_jacobian(sys, x, FdScheme::central, 1e-7)).cwiseAbs();
    std::vector<Index> expected;
    const RowRange rows = c.rows_of("D1");
    for (Index r = rows.begin; r < rows.end; ++r) {
        if (c.row_target(r) >= 0) expected.push_back(c.row_target(r));
    }
    std::sort(expected.begin(), expected.end());
    std::vector<Index> differing;
    const Matrix j = sys.jacobian(x);
    for (Index r = 0; r < diff.rows(); ++r) {
        if ((diff.row(r).array() > 1e-6 * std::max(1.0, j.row(r).cwiseAbs().maxCoeff())).any()) differing.push_back(r);
    }
    CHECK(differing == expected);
}

TEST_CASE("an inductor scale fault changes one entry by its factor", "[circuit]") {
    const ComposedCircuit c(build_power_channel());
    const FaultSet faults(c, {scale("D_L", 0.95)});
    std::mt19937 rng(14);
    const Vector x = random_state(rng, c.dim());
    const EvalContext ctx = random_context(rng, c.dim());
    const Matrix clean = c.component_jacobian(x, ctx, FaultSet{});
    const Matrix bad = c.component_jacobian(x, ctx, faults);
    const Index il = static_cast<Index>(std::find(c.unknown_names().begin(), c.unknown_names().end(), "iL(D_L)") -
                                        c.unknown_names().begin());
    REQUIRE(il < c.dim());
    for (Index r = 0; r < clean.rows(); ++r) {
        for (Index k = 0; k < clean.cols(); ++k) {
            if (r == 83 && k == il) {
                CHECK(bad(r, k) == Approx(0.95 * clean(r, k)));
                CHECK(bad(r, k) != clean(r, k));
            } else {
                CHECK(bad(r, k) == clean(r, k));
            }
        }
    }
}

TEST_CASE("a sign flip negates the whole component block", "[circuit]") {
    const ComposedCircuit c(build_diode_bridge());
    const FaultSet faults(c, {sign_flip("R_load")});
    std::mt19937 rng(16);
    const Vector x = random_state(rng, c.dim());
    const EvalContext ctx = random_context(rng, c.dim());
    const Matrix clean = c.component_jacobian(x, ctx, FaultSet{});
    const Matrix bad = c.component_jacobian(x, ctx, faults);
    const RowRange rows = c.rows_of("R_load");
    for (Index r = 0; r < clean.rows(); ++r) {
        const double s = rows.contains(r) ? -1.0 : 1.0;
        CHECK((bad.row(r) - s * clean.row(r)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("diode exponent is clamped without overflow", "[circuit]") {
    const ComposedCircuit c(single(diode("D", "a", "g")));
    Vector x = Vector::Constant(1, 100.0);
    const EvalContext ctx{0.0, 0.0, Vector::Zero(1)};
    const CircuitEvaluation e = c.evaluate(x, ctx, FaultSet{});
    CHECK(all_finite(e.residual));
    CHECK(all_finite(e.jacobian));
    const double at_clamp = 1e-12 * (std::exp(200.0) - 1.0);
    const double slope = 1e-12 / 0.026 * std::exp(200.0);
    CHECK(e.component_residual(0) == Approx(at_clamp + slope * (100.0 - 200.0 * 0.026)).epsilon(1e-12));
}

TEST_CASE("netlist validation rejects malformed circuits", "[circuit]") {
    Netlist good = single(resistor("R", "a", "g", 1.0));
    CHECK_NOTHROW(good.validate());
    Netlist n = good;
    n.ground = "x";
    CHECK_THROWS_AS(n.validate(), ValidationError);
    n = good;
    n.components.push_back(resistor("R", "a", "g", 1.0));
    CHECK_THROWS_AS(n.validate(), ValidationError);
    n = good;
    n.components[0].terminals[1] = "nowhere";
    CHECK_THROWS_AS(n.validate(), ValidationError);
    n = good;
    n.components[0] = resistor("R", "a", "g", -1.0);
    CHECK_THROWS_AS(n.validate(), ValidationError);
    n = good;
    n.nodes.push_back("b");
    CHECK_THROWS_AS(n.validate(), ValidationError);
    n = good;
    n.nodes.push_back("a");
    CHECK_THROWS_AS(n.validate(), ValidationError);
    const ComposedCircuit c(good);
    CHECK_THROWS_AS(FaultSet(c, {sign_flip("missing")}), ValidationError);
}
