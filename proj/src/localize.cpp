#include "nldiag/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace nldiag {

double default_check_step(const Vector& x_star) {
    double scale = x_star.size() > 0 ? x_star.cwiseAbs().maxCoeff() : 0.0;
    return 1e-5 * std::max(1.0, scale);
}

namespace {

void check_direction(const Vector& x_star, const Vector& v, double eps) {
    if (v.size() != x_star.size()) {
        throw ValidationError("direction check: direction has wrong dimension");
    }
    if (std::abs(v.norm() - 1.0) > 1e-10) {
        throw ValidationError("direction check: direction must have unit 2-norm");
    }
    if (!(eps > 0.0)) {
        throw ValidationError("direction check: eps must be positive");
    }
}

/// Rows whose directional derivative is not well above the rounding error of the difference
/// quotient count as noise. That error is a few eps_mach over eps times the summed term
/// magnitude of the row plus the rounding of the shifted inputs, |R| |x|.
constexpr double kRoundoffFactor = 1024.0 * std::numeric_limits<double>::epsilon();

struct Samples {
    Vector plus;
    Vector minus;
    Vector center;
};

Vector normalize(const Vector& raw, const Samples& s, const Matrix& implemented, const Vector& x, const Vector& v,
                 double eps, const Vector& terms, Normalization normalization, double floor) {
    Vector out = raw.cwiseAbs();
    if (normalization == Normalization::raw) return out;
    if (normalization == Normalization::residual_scaled) {
        for (Index i = 0; i < out.size(); ++i) out(i) /= std::max(std::abs(s.center(i)), floor);
        return out;
    }
    const Vector directional = implemented.cwiseAbs() * v.cwiseAbs();
    const Vector fd = ((s.plus - s.minus) / (2.0 * eps)).cwiseAbs();
    const Vector rounding = terms.cwiseAbs() + implemented.cwiseAbs() * x.cwiseAbs();
    for (Index i = 0; i < out.size(); ++i) {
        const double scale = std::max(directional(i), fd(i)) + kRoundoffFactor * rounding(i) / eps;
        out(i) = out(i) == 0.0 ? 0.0 : out(i) / std::max(scale, std::numeric_limits<double>::min());
    }
    return out;
}

}  // namespace

DiscrepancyVector system_direction_check(const ResidualSystem& system, const Vector& x_star, const Vector& v,
                                         double eps, Normalization normalization, double floor) {
    check_direction(x_star, v, eps);
    const Samples s{system.residual(x_star + eps * v), system.residual(x_star - eps * v), system.residual(x_star)};
    if (!s.plus.allFinite() || !s.minus.allFinite() || !s.center.allFinite()) {
        throw NonFiniteError("system_direction_check: non-finite residual");
    }
    const Matrix j = system.jacobian(x_star);
    DiscrepancyVector d;
    d.raw = (s.plus - s.minus) / (2.0 * eps) - j * v;
    d.values = normalize(d.raw, s, j, x_star, v, eps, system.residual_scale(x_star), normalization, floor);
    d.normalization = normalization;
    d.direction = v;
    d.level = CheckLevel::system;
    return d;
}

DiscrepancyVector component_direction_check(const CircuitSystem& system, const Vector& x_star, const Vector& v,
                                            double eps, Normalization normalization, double floor) {
    check_direction(x_star, v, eps);
    const Samples s{system.component_residuals(x_star + eps * v), system.component_residuals(x_star - eps * v),
                    system.component_residuals(x_star)};
    if (!s.plus.allFinite() || !s.minus.allFinite() || !s.center.allFinite()) {
        throw NonFiniteError("component_direction_check: non-finite component residual");
    }
    const Matrix rj = system.component_jacobian(x_star);
    DiscrepancyVector d;
    d.raw = (s.plus - s.minus) / (2.0 * eps) - rj * v;
    d.values =
        normalize(d.raw, s, rj, x_star, v, eps, system.component_residual_scales(x_star), normalization, floor);
    d.normalization = normalization;
    d.direction = v;
    d.level = CheckLevel::component;
    return d;
}

LocalizationResult flag_rows(const DiscrepancyVector& d, double relative_threshold, const ComposedCircuit* circuit,
                             double noise_floor) {
    if (d.values.size() == 0) {
        throw ValidationError("flag_rows: empty discrepancy");
    }
    if (!(relative_threshold > 0.0 && relative_threshold < 1.0)) {
        throw ValidationError("flag_rows: threshold must lie in (0, 1)");
    }
    LocalizationResult result;
    result.threshold_used = relative_threshold;
    result.discrepancy = d;
    const double peak = d.values.maxCoeff();
    if (!(peak > noise_floor)) {
        result.no_dominant_peak = true;
        return result;
    }
    for (Index i = 0; i < d.values.size(); ++i) {
        if (d.values(i) >= relative_threshold * peak) {
            result.flagged_rows.push_back(i);
        }
    }
    if (circuit && d.level == CheckLevel::component) {
        for (Index row : result.flagged_rows) {
            const std::string& owner = circuit->owner_of_row(row);
            if (std::find(result.flagged_components.begin(), result.flagged_components.end(), owner) ==
                result.flagged_components.end()) {
                result.flagged_components.push_back(owner);
            }
        }
    }
    return result;
}

LocalizationResult localize_eigenvector(const CircuitSystem& system, const Vector& x_star, const ComplexVector& v,
                                        double relative_threshold, double eps, double noise_floor) {
    if (eps <= 0.0) eps = default_check_step(x_star);
    std::optional<DiscrepancyVector> combined;
    for (const Vector& part : {Vector(v.real()), Vector(v.imag())}) {
        const double norm = part.norm();
        if (norm < 1e-8) continue;
        DiscrepancyVector d = component_direction_check(system, x_star, part / norm, eps);
        if (!combined) {
            combined = std::move(d);
        } else {
            for (Index i = 0; i < d.values.size(); ++i) {
                if (d.values(i) > combined->values(i)) {
                    combined->values(i) = d.values(i);
                    combined->raw(i) = d.raw(i);
                }
            }
        }
    }
    if (!combined) {
        throw ValidationError("localize_eigenvector: zero direction");
    }
    return flag_rows(*combined, relative_threshold, &system.circuit(), noise_floor);
}

}  // namespace nldiag
