#pragma once

#include "nldiag/circuit.hpp"
#include "nldiag/nlsolve.hpp"

#include <string>
#include <vector>

namespace nldiag {

/// raw: |d|. residual_scaled: |d| / max(|r|, floor).
/// derivative_scaled: |d| / (sum_j |R_ij v_j| + roundoff_i), a dimensionless relative mismatch
/// of the directional derivative; roundoff_i bounds the cancellation error of the difference
/// quotient from the magnitude of the terms forming row i.
enum class Normalization { raw, residual_scaled, derivative_scaled };
enum class CheckLevel { system, component };

/// Default floor of the residual scaling, in the units of each row.
inline constexpr double kResidualFloor = 1e-9;
/// Default noise floor below which no row is flagged. Scaled values are relative mismatches;
/// fault-free circuits stay below 1e-3 and a 5% derivative error reaches about 5e-2.
inline constexpr double kNoiseFloor = 5e-3;

struct DiscrepancyVector {
    Vector raw;     ///< central-difference Jv minus implemented Jv
    Vector values;  ///< |raw| after normalization
    Normalization normalization = Normalization::derivative_scaled;
    Vector direction;
    CheckLevel level = CheckLevel::system;
};

struct LocalizationResult {
    std::vector<Index> flagged_rows;
    std::vector<std::string> flagged_components;
    double threshold_used = 0.5;
    bool no_dominant_peak = false;
    DiscrepancyVector discrepancy;
};

/// Localization eps 1e-5 * max(1, ||x||_inf).
double default_check_step(const Vector& x_star);

DiscrepancyVector system_direction_check(const ResidualSystem& system, const Vector& x_star, const Vector& v,
                                         double eps, Normalization normalization = Normalization::derivative_scaled,
                                         double floor = kResidualFloor);

DiscrepancyVector component_direction_check(const CircuitSystem& system, const Vector& x_star, const Vector& v,
                                            double eps,
                                            Normalization normalization = Normalization::derivative_scaled,
                                            double floor = kResidualFloor);

/// Rows with value >= threshold * max, provided max exceeds the noise floor.
/// Rows are mapped to owning components when a circuit is given at component level.
LocalizationResult flag_rows(const DiscrepancyVector& d, double relative_threshold,
                             const ComposedCircuit* circuit = nullptr, double noise_floor = kNoiseFloor);

/// Component-level localization along a possibly complex eigenvector: real and
/// imaginary parts are checked separately and combined by entrywise maximum.
LocalizationResult localize_eigenvector(const CircuitSystem& system, const Vector& x_star, const ComplexVector& v,
                                        double relative_threshold, double eps = -1.0,
                                        double noise_floor = kNoiseFloor);

}  // namespace nldiag
