#include "nldiag/nlsolve.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace nldiag {

Vector ResidualSystem::solve_jacobian(const Vector& x, const Vector& f) const { return lu_solve(jacobian(x), f); }

FunctionSystem::FunctionSystem(Index dim, ResidualFn residual, JacobianFn jacobian)
    : dim_(dim), residual_(std::move(residual)), jacobian_(std::move(jacobian)) {
    if (dim_ <= 0) {
        throw ValidationError("FunctionSystem: dim must be positive");
    }
}

void SolverConfig::validate() const {
    if (!(tol >= 0.0)) {
        throw ValidationError("solver tol must be non-negative");
    }
    if (max_iter <= 0) {
        throw ValidationError("solver max_iter must be positive");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ValidationError("solver alpha must lie in (0, 1]");
    }
    if (jacobian_mode.kind != JacobianMode::Kind::implemented && !(jacobian_mode.h > 0.0)) {
        throw ValidationError("finite-difference step must be positive");
    }
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter_exceeded: return "max_iter_exceeded";
        case SolveStatus::diverged_nonfinite: return "diverged_nonfinite";
    }
    return "unknown";
}

Matrix fd_jacobian(const ResidualSystem& system, const Vector& x, FdScheme scheme, double h) {
    if (!(h > 0.0)) {
        throw ValidationError("fd_jacobian: h must be positive");
    }
    const Index n = system.dim();
    Matrix jac(n, n);
    Vector f0;
    if (scheme == FdScheme::forward) {
        f0 = system.residual(x);
        if (!f0.allFinite()) {
            throw NonFiniteError("fd_jacobian: non-finite residual at base point");
        }
    }
    Vector xp = x;
    for (Index j = 0; j < n; ++j) {
        xp(j) = x(j) + h;
        Vector fp = system.residual(xp);
        if (scheme == FdScheme::forward) {
            jac.col(j) = (fp - f0) / h;
        } else {
            xp(j) = x(j) - h;
            Vector fm = system.residual(xp);
            if (!fm.allFinite()) {
                throw NonFiniteError("fd_jacobian: non-finite residual at column " + std::to_string(j));
            }
            jac.col(j) = (fp - fm) / (2.0 * h);
        }
        if (!fp.allFinite()) {
            throw NonFiniteError("fd_jacobian: non-finite residual at column " + std::to_string(j));
        }
        xp(j) = x(j);
    }
    return jac;
}

Matrix solver_jacobian(const ResidualSystem& system, const Vector& x, const JacobianMode& mode) {
    switch (mode.kind) {
        case JacobianMode::Kind::implemented: return system.jacobian(x);
        case JacobianMode::Kind::forward_fd: return fd_jacobian(system, x, FdScheme::forward, mode.h);
        case JacobianMode::Kind::central_fd: return fd_jacobian(system, x, FdScheme::central, mode.h);
    }
    return system.jacobian(x);
}

namespace {

Vector step_from(const ResidualSystem& system, const Vector& x, const Vector& f,
                 const SolverConfig& config) {
    Vector update = config.jacobian_mode.kind == JacobianMode::Kind::implemented
                        ? system.solve_jacobian(x, f)
                        : lu_solve(solver_jacobian(system, x, config.jacobian_mode), f);
    Vector next = x - config.alpha * update;
    if (!next.allFinite()) {
        throw NonFiniteError("newton_step: non-finite update");
    }
    return next;
}

}  // namespace

Vector newton_step(const ResidualSystem& system, const Vector& x, const SolverConfig& config) {
    Vector f = system.residual(x);
    if (!f.allFinite()) {
        throw NonFiniteError("newton_step: non-finite residual");
    }
    return step_from(system, x, f, config);
}

SolveResult solve(const ResidualSystem& system, const Vector& x0, const SolverConfig& config) {
    config.validate();
    if (x0.size() != system.dim()) {
        throw ValidationError("solve: initial guess has wrong dimension");
    }
    SolveResult result;
    SolverTrace& trace = result.trace;
    Vector x = x0;
    Vector f = system.residual(x);
    auto record = [&](const Vector& iterate, const Vector& residual) {
        trace.iterates.push_back(iterate);
        trace.residual_norms.push_back(residual.allFinite() ? residual.norm()
                                                            : std::numeric_limits<double>::quiet_NaN());
    };
    record(x, f);
    auto fail_nonfinite = [&]() {
        trace.status = SolveStatus::diverged_nonfinite;
        result.solution = trace.iterates.back();
        return result;
    };
    if (!x.allFinite() || !f.allFinite()) {
        return fail_nonfinite();
    }
    for (int it = 0;; ++it) {
        if (trace.residual_norms.back() < config.tol) {
            trace.status = SolveStatus::converged;
            break;
        }
        if (it >= config.max_iter) {
            trace.status = SolveStatus::max_iter_exceeded;
            break;
        }
        try {
            x = step_from(system, x, f, config);
        } catch (const SingularJacobianError&) {
            Vector bad = Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
            trace.iterates.push_back(bad);
            trace.residual_norms.push_back(std::numeric_limits<double>::quiet_NaN());
            return fail_nonfinite();
        } catch (const NonFiniteError&) {
            Vector bad = Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
            trace.iterates.push_back(bad);
            trace.residual_norms.push_back(std::numeric_limits<double>::quiet_NaN());
            return fail_nonfinite();
        }
        f = system.residual(x);
        record(x, f);
        if (!f.allFinite()) {
            // Keep the last iterate non-finite so the status invariant holds.
            trace.iterates.back() = Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
            return fail_nonfinite();
        }
    }
    result.solution = x;
    return result;
}

RosenbrockSystem::RosenbrockSystem(Index dimension) : n_(dimension) {
    if (n_ < 2) {
        throw ValidationError("rosenbrock dimension must be at least 2");
    }
}

Vector RosenbrockSystem::residual(const Vector& x) const {
    const Index n = n_;
    Vector f(n);
    f(0) = -400.0 * (x(1) - x(0) * x(0)) * x(0) + 2.0 * (x(0) - 1.0);
    for (Index m = 1; m + 1 < n; ++m) {
        f(m) = -400.0 * (x(m + 1) - x(m) * x(m)) * x(m) + 200.0 * (x(m) - x(m - 1) * x(m - 1)) * x(m) +
               2.0 * (x(m) - 1.0);
    }
    f(n - 1) = 200.0 * (x(n - 1) - x(n - 2) * x(n - 2)) * x(n - 2);
    return f;
}

Matrix RosenbrockSystem::jacobian(const Vector& x) const {
    const Index n = n_;
    Matrix j = Matrix::Zero(n, n);
    j(0, 0) = -400.0 * x(1) + 1200.0 * x(0) * x(0) + 2.0;
    j(0, 1) = -400.0 * x(0);
    for (Index m = 1; m + 1 < n; ++m) {
        j(m, m - 1) = -400.0 * x(m - 1) * x(m);
        j(m, m) = -400.0 * x(m + 1) + 1200.0 * x(m) * x(m) + 400.0 * x(m) - 200.0 * x(m - 1) * x(m - 1) + 2.0;
        j(m, m + 1) = -400.0 * x(m);
    }
    j(n - 1, n - 2) = 200.0 * x(n - 1) - 600.0 * x(n - 2) * x(n - 2);
    j(n - 1, n - 1) = 200.0 * x(n - 2);
    return j;
}

}  // namespace nldiag
