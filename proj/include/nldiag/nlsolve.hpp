#pragma once

#include "nldiag/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace nldiag {

/// A square nonlinear system F(x) = 0 together with the Jacobian as implemented.
/// The implemented Jacobian may differ from the true derivative of F.
class ResidualSystem {
public:
    virtual ~ResidualSystem() = default;
    virtual Index dim() const = 0;
    virtual Vector residual(const Vector& x) const = 0;
    virtual Matrix jacobian(const Vector& x) const = 0;
    /// Solves J(x) d = f with the implemented Jacobian. Systems whose Jacobians mix
    /// widely different scales may override this to assemble and factor more precisely.
    virtual Vector solve_jacobian(const Vector& x, const Vector& f) const;
    /// Magnitude of the terms summed into each residual row. Defaults to |F(x)|.
    virtual Vector residual_scale(const Vector& x) const { return residual(x).cwiseAbs(); }
};

/// ResidualSystem backed by two callables.
class FunctionSystem : public ResidualSystem {
public:
    using ResidualFn = std::function<Vector(const Vector&)>;
    using JacobianFn = std::function<Matrix(const Vector&)>;

    FunctionSystem(Index dim, ResidualFn residual, JacobianFn jacobian);

    Index dim() const override { return dim_; }
    Vector residual(const Vector& x) const override { return residual_(x); }
    Matrix jacobian(const Vector& x) const override { return jacobian_(x); }

private:
    Index dim_;
    ResidualFn residual_;
    JacobianFn jacobian_;
};

enum class FdScheme { forward, central };

struct JacobianMode {
    enum class Kind { implemented, forward_fd, central_fd };
    Kind kind = Kind::implemented;
    double h = 1e-6;

    static JacobianMode implemented() { return {}; }
    static JacobianMode forward(double step = 1e-6) { return {Kind::forward_fd, step}; }
    static JacobianMode central(double step = 1e-6) { return {Kind::central_fd, step}; }
};

struct SolverConfig {
    double tol = 1e-8;
    int max_iter = 20;
    double alpha = 1.0;
    JacobianMode jacobian_mode;

    void validate() const;
};

enum class SolveStatus { converged, max_iter_exceeded, diverged_nonfinite };

std::string to_string(SolveStatus status);

struct SolverTrace {
    std::vector<Vector> iterates;
    std::vector<double> residual_norms;
    SolveStatus status = SolveStatus::max_iter_exceeded;

    /// Number of solver steps taken (iterates minus one).
    int steps() const { return static_cast<int>(iterates.size()) - 1; }
};

struct SolveResult {
    Vector solution;
    SolverTrace trace;
};

/// Column j is (F(x+h e_j) - F(x))/h or (F(x+h e_j) - F(x-h e_j))/(2h).
Matrix fd_jacobian(const ResidualSystem& system, const Vector& x, FdScheme scheme, double h);

/// Jacobian selected by the solver's jacobian_mode.
Matrix solver_jacobian(const ResidualSystem& system, const Vector& x, const JacobianMode& mode);

/// One iteration x - alpha * J^{-1}(x) F(x).
Vector newton_step(const ResidualSystem& system, const Vector& x, const SolverConfig& config);

/// Repeats newton_step until ||F||_2 < tol, max_iter steps, or non-finite values.
/// A singular Jacobian ends the solve as diverged_nonfinite with a NaN iterate.
SolveResult solve(const ResidualSystem& system, const Vector& x0, const SolverConfig& config);

/// Gradient of the chained Rosenbrock objective with its analytic tridiagonal Jacobian.
class RosenbrockSystem : public ResidualSystem {
public:
    explicit RosenbrockSystem(Index dimension);

    Index dim() const override { return n_; }
    Vector residual(const Vector& x) const override;
    Matrix jacobian(const Vector& x) const override;

private:
    Index n_;
};

}  // namespace nldiag
