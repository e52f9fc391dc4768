#include "nldiag/nlsolve.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace nldiag;
using Catch::Approx;

namespace {

struct Affine {
    Matrix a;
    Vector b;
};

Affine random_affine(unsigned seed, Index n) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Affine sys{Matrix(n, n), Vector(n)};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) sys.a(i, j) = u(rng);
        sys.a(i, i) += static_cast<double>(n);
        sys.b(i) = u(rng);
    }
    return sys;
}

FunctionSystem affine_system(const Affine& s) {
    return FunctionSystem(
        s.a.rows(), [s](const Vector& x) { return Vector(s.a * x - s.b); }, [s](const Vector&) { return s.a; });
}

/// Diode current I_S (exp(v / (n V_T)) - 1) with I_S = 1e-12, n = 1, V_T = 0.026.
FunctionSystem diode_system() {
    return FunctionSystem(
        1, [](const Vector& x) { return Vector::Constant(1, 1e-12 * (std::exp(x(0) / 0.026) - 1.0)); },
        [](const Vector& x) { return Matrix::Constant(1, 1, 1e-12 / 0.026 * std::exp(x(0) / 0.026)); });
}

double log_slope(const std::vector<double>& h, const std::vector<double>& err) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double lx = std::log(h[i]), ly = std::log(err[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("newton is exact on affine systems from any start", "[nlsolve]") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        const Affine a = random_affine(seed, 6);
        const FunctionSystem sys = affine_system(a);
        std::mt19937 rng(seed + 100);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        Vector x0(6);
        for (Index i = 0; i < 6; ++i) x0(i) = u(rng);
        SolverConfig cfg;
        cfg.tol = 1e-10;
        const SolveResult r = solve(sys, x0, cfg);
        CHECK(r.trace.status == SolveStatus::converged);
        CHECK(r.trace.steps() == 1);
        const Vector expected = a.a.partialPivLu().solve(a.b);
        CHECK((r.solution - expected).norm() < 1e-12);
    }
}

TEST_CASE("damped step on the identity residual halves the state", "[nlsolve]") {
    const FunctionSystem sys(
        1, [](const Vector& x) { return x; }, [](const Vector&) { return Matrix::Identity(1, 1); });
    SolverConfig cfg;
    cfg.alpha = 0.5;
    CHECK(newton_step(sys, Vector::Constant(1, 1.0), cfg)(0) == 0.5);
}

TEST_CASE("damping contract: iterates follow (1 - alpha)^n exactly", "[nlsolve]") {
    const FunctionSystem sys(
        1, [](const Vector& x) { return x; }, [](const Vector&) { return Matrix::Identity(1, 1); });
    for (double alpha : {0.5, 0.25, 0.75, 1.0}) {
        SolverConfig cfg;
        cfg.alpha = alpha;
        cfg.tol = 0.0;
        cfg.max_iter = 12;
        const SolveResult r = solve(sys, Vector::Constant(1, 3.0), cfg);
        double expected = 3.0;
        for (std::size_t n = 0; n < r.trace.iterates.size(); ++n) {
            CHECK(r.trace.iterates[n](0) == expected);
            expected *= 1.0 - alpha;
        }
    }
}

TEST_CASE("forward difference of x^2 at 1 with h = 0.01", "[nlsolve]") {
    const FunctionSystem sys(
        1, [](const Vector& x) { return Vector::Constant(1, x(0) * x(0)); },
        [](const Vector& x) { return Matrix::Constant(1, 1, 2 * x(0)); });
    const Matrix j = fd_jacobian(sys, Vector::Constant(1, 1.0), FdScheme::forward, 0.01);
    CHECK(j(0, 0) == Approx(2.01).epsilon(1e-13));
}

TEST_CASE("finite differences are exact on affine maps", "[nlsolve]") {
    const Affine a = random_affine(7, 5);
    const FunctionSystem sys = affine_system(a);
    const Vector x = Vector::LinSpaced(5, -1.0, 2.0);
    for (double h : {1e-2, 1e-4, 1e-6}) {
        for (FdScheme s : {FdScheme::forward, FdScheme::central}) {
            const Matrix j = fd_jacobian(sys, x, s, h);
            CHECK((j - a.a).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("central difference of the diode residual at zero bias", "[nlsolve]") {
    const FunctionSystem sys = diode_system();
    const Matrix j = fd_jacobian(sys, Vector::Zero(1), FdScheme::central, 1e-6);
    const double analytic = 1e-12 / 0.026;
    CHECK(j(0, 0) == Approx(analytic).epsilon(1e-8));
}

TEST_CASE("central difference error on the diode is second order", "[nlsolve]") {
    const FunctionSystem sys = diode_system();
    const Vector x = Vector::Constant(1, 0.3);
    const double analytic = sys.jacobian(x)(0, 0);
    std::vector<double> hs{1e-3, 1e-4, 1e-5}, errs;
    for (double h : hs) errs.push_back(std::abs(fd_jacobian(sys, x, FdScheme::central, h)(0, 0) - analytic));
    CHECK(log_slope(hs, errs) >= 1.8);
}

TEST_CASE("newton on x^2 - 4 from 3 matches the hand recurrence", "[nlsolve]") {
    const FunctionSystem sys(
        1, [](const Vector& x) { return Vector::Constant(1, x(0) * x(0) - 4.0); },
        [](const Vector& x) { return Matrix::Constant(1, 1, 2 * x(0)); });
    SolverConfig cfg;
    cfg.tol = 1e-10;
    const SolveResult r = solve(sys, Vector::Constant(1, 3.0), cfg);
    double x = 3.0;
    int oracle_steps = 0;
    while (std::abs(x * x - 4.0) >= 1e-10) {
        x = (x + 4.0 / x) / 2.0;
        ++oracle_steps;
    }
    CHECK(r.trace.status == SolveStatus::converged);
    CHECK(r.trace.steps() == oracle_steps);
    CHECK(r.trace.steps() <= 8);
    CHECK(r.solution(0) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("a start inside tolerance takes no steps", "[nlsolve]") {
    const FunctionSystem sys(
        1, [](const Vector& x) { return x; }, [](const Vector&) { return Matrix::Identity(1, 1); });
    const SolveResult r = solve(sys, Vector::Constant(1, 1e-12), SolverConfig{});
    CHECK(r.trace.status == SolveStatus::converged);
    CHECK(r.trace.iterates.size() == 1);
    CHECK(r.trace.residual_norms.size() == 1);
}

TEST_CASE("trace lengths match and norms are recomputable", "[nlsolve]") {
    const RosenbrockSystem sys(10);
    Vector x0 = Vector::Ones(10);
    x0(3) += 0.05;
    const SolveResult r = solve(sys, x0, SolverConfig{});
    REQUIRE(r.trace.iterates.size() == r.trace.residual_norms.size());
    for (std::size_t i = 0; i < r.trace.iterates.size(); ++i) {
        CHECK(r.trace.residual_norms[i] == sys.residual(r.trace.iterates[i]).norm());
    }
    CHECK(r.trace.residual_norms.back() < SolverConfig{}.tol);
}

TEST_CASE("a singular jacobian ends the solve as non-finite", "[nlsolve]") {
    const FunctionSystem sys(
        2, [](const Vector& x) { return Vector(x.array() + 1.0); }, [](const Vector&) { return Matrix::Zero(2, 2); });
    const SolveResult r = solve(sys, Vector::Zero(2), SolverConfig{});
    CHECK(r.trace.status == SolveStatus::diverged_nonfinite);
    CHECK_FALSE(all_finite(r.trace.iterates.back()));
    CHECK_THROWS_AS(newton_step(sys, Vector::Zero(2), SolverConfig{}), SingularJacobianError);
}

TEST_CASE("max_iter_exceeded when the tolerance is unreachable", "[nlsolve]") {
    const FunctionSystem sys(
        1, [](const Vector& x) { return x; }, [](const Vector&) { return Matrix::Identity(1, 1); });
    SolverConfig cfg;
    cfg.alpha = 0.5;
    cfg.tol = 0.0;
    cfg.max_iter = 5;
    const SolveResult r = solve(sys, Vector::Constant(1, 1.0), cfg);
    CHECK(r.trace.status == SolveStatus::max_iter_exceeded);
    CHECK(r.trace.steps() == 5);
}

TEST_CASE("solver config validation", "[nlsolve]") {
    SolverConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.alpha = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg.alpha = 1.5;
    CHECK_THROWS(cfg.validate());
    cfg = SolverConfig{};
    cfg.tol = -1.0;
    CHECK_THROWS(cfg.validate());
    cfg = SolverConfig{};
    cfg.max_iter = 0;
    CHECK_THROWS(cfg.validate());
    cfg = SolverConfig{};
    cfg.jacobian_mode = JacobianMode::forward(0.0);
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("rosenbrock gradient vanishes at all ones", "[nlsolve][rosenbrock]") {
    const RosenbrockSystem sys(100);
    CHECK(sys.residual(Vector::Ones(100)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rosenbrock jacobian matches central differences at all ones", "[nlsolve][rosenbrock]") {
    const RosenbrockSystem sys(100);
    const Vector x = Vector::Ones(100);
    const Matrix fd = fd_jacobian(sys, x, FdScheme::central, 1e-6);
    CHECK((fd - sys.jacobian(x)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("rosenbrock jacobian is tridiagonal and consistent at random states", "[nlsolve][rosenbrock]") {
    const RosenbrockSystem sys(12);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 10; ++trial) {
        Vector x(12);
        for (Index i = 0; i < 12; ++i) x(i) = u(rng);
        const Matrix j = sys.jacobian(x);
        for (Index r = 0; r < 12; ++r) {
            for (Index c = 0; c < 12; ++c) {
                if (std::abs(r - c) > 1) CHECK(j(r, c) == 0.0);
            }
        }
        const Matrix fd = fd_jacobian(sys, x, FdScheme::central, 1e-6);
        CHECK((fd - j).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, j.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("rosenbrock newton converges quadratically near the minimum", "[nlsolve][rosenbrock]") {
    const RosenbrockSystem sys(100);
    const Vector ones = Vector::Ones(100);
    // Measured e1 / e0^2 is 1.978 at these offsets; frozen with 10% margin.
    const double c = 2.2;
    for (double d : {1e-3, 3e-4, 1e-4}) {
        Vector x = ones;
        x(0) += d;
        const Vector next = newton_step(sys, x, SolverConfig{});
        const double e0 = (x - ones).norm();
        const double e1 = (next - ones).norm();
        CHECK(e1 <= c * e0 * e0);
    }
}
