#pragma once

#include "nldiag/nlsolve.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nldiag {

/// One iteration of a configured solver on a fixed system, viewed as a map G.
class SolverMap {
public:
    SolverMap(const ResidualSystem& system, SolverConfig config);

    Index dim() const { return system_.dim(); }
    const SolverConfig& config() const { return config_; }
    Vector operator()(const Vector& x) const;

private:
    const ResidualSystem& system_;
    SolverConfig config_;
};

/// Scale-aware probe step 1e-6 * max(1, ||x||_inf).
double default_probe_step(const Vector& x_star);

/// Raised when a probe column's solver step fails. Carries the column index.
class ProbeError : public std::runtime_error {
public:
    ProbeError(Index column, const std::string& what);
    Index column() const { return column_; }

private:
    Index column_;
};

/// Finite-difference linearization of G at x_star.
/// Forward columns (G(x+h e_j) - G(x))/h; central columns use G(x-h e_j) instead of G(x).
Matrix linearize_map_probe(const SolverMap& map, const Vector& x_star, double h,
                           FdScheme scheme = FdScheme::forward);

enum class EigenMethod { probe, dmd };

std::string to_string(EigenMethod method);

struct EigenReport {
    std::vector<Complex> eigenvalues;
    std::vector<ComplexVector> eigenvectors;
    EigenMethod method = EigenMethod::probe;
    long step_index = -1;
    bool usable = true;
    std::string reason;

    double leading_magnitude() const;
};

/// Orders eigenpairs by |lambda| desc, then Re desc, then Im desc, and keeps k of them.
/// Each eigenvector gets unit 2-norm with its largest-magnitude component real positive.
void sort_and_normalize(std::vector<Complex>& values, std::vector<ComplexVector>& vectors, Index k);

/// Dense eigendecomposition keeping the k largest-magnitude pairs.
EigenReport eigs(const Matrix& m, Index k, EigenMethod method = EigenMethod::probe);

/// Minimum-Frobenius-norm linear model fitted to differenced iterates.
EigenReport dmd_eigs(const SolverTrace& trace, Index k);

struct AnomalyConfig {
    double cluster_radius = 0.05;
    double anomaly_threshold = 0.5;
    double unit_circle_threshold = 0.95;
    double period_doubling_real_cut = -0.9;

    void validate() const;
};

enum class AnomalyFlag { near_unit_circle, period_doubling_signature, unstable };

inline constexpr AnomalyFlag kAllFlags[] = {AnomalyFlag::near_unit_circle,
                                            AnomalyFlag::period_doubling_signature, AnomalyFlag::unstable};

std::string to_string(AnomalyFlag flag);

struct AnomalyFlags {
    bool near_unit_circle = false;
    bool period_doubling_signature = false;
    bool unstable = false;

    bool get(AnomalyFlag flag) const;
    bool any() const { return near_unit_circle || period_doubling_signature || unstable; }
    /// Flags joined with '|', empty when none are set.
    std::string str() const;
};

struct AnomalyReport {
    Complex baseline_center{0.0, 0.0};
    std::vector<Index> cluster_indices;
    std::vector<Index> outlier_indices;
    AnomalyFlags flags;
    double leading_magnitude = 0.0;
};

AnomalyReport detect_anomalies(const EigenReport& report, const AnomalyConfig& config,
                               Complex baseline_center);

/// Anomaly report tagged with its step; an empty report marks an unusable step.
struct IndexedAnomaly {
    long step_index = 0;
    std::optional<AnomalyReport> report;
};

struct CrossingEvent {
    long step_index = 0;
    AnomalyFlag kind = AnomalyFlag::near_unit_circle;
    bool on = true;
};

/// Emits on/off edges of each flag between consecutive usable reports.
std::vector<CrossingEvent> track_crossings(const std::vector<IndexedAnomaly>& reports);

}  // namespace nldiag
