#include "nldiag/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nldiag {

SolverMap::SolverMap(const ResidualSystem& system, SolverConfig config)
    : system_(system), config_(config) {
    config_.validate();
}

Vector SolverMap::operator()(const Vector& x) const { return newton_step(system_, x, config_); }

double default_probe_step(const Vector& x_star) {
    double scale = x_star.size() > 0 ? x_star.cwiseAbs().maxCoeff() : 0.0;
    return 1e-6 * std::max(1.0, scale);
}

ProbeError::ProbeError(Index column, const std::string& what)
    : std::runtime_error("probe column " + std::to_string(column) + ": " + what), column_(column) {}

Matrix linearize_map_probe(const SolverMap& map, const Vector& x_star, double h, FdScheme scheme) {
    if (!(h > 0.0)) {
        throw ValidationError("linearize_map_probe: h must be positive");
    }
    const Index n = map.dim();
    Matrix m(n, n);
    Vector g0;
    if (scheme == FdScheme::forward) {
        try {
            g0 = map(x_star);
        } catch (const std::runtime_error& e) {
            throw ProbeError(-1, e.what());
        }
    }
    Vector xp = x_star;
    for (Index j = 0; j < n; ++j) {
        try {
            xp(j) = x_star(j) + h;
            Vector gp = map(xp);
            if (scheme == FdScheme::forward) {
                m.col(j) = (gp - g0) / h;
            } else {
                xp(j) = x_star(j) - h;
                Vector gm = map(xp);
                m.col(j) = (gp - gm) / (2.0 * h);
            }
        } catch (const std::runtime_error& e) {
            throw ProbeError(j, e.what());
        }
        xp(j) = x_star(j);
    }
    return m;
}

std::string to_string(EigenMethod method) { return method == EigenMethod::probe ? "probe" : "dmd"; }

double EigenReport::leading_magnitude() const {
    return eigenvalues.empty() ? 0.0 : std::abs(eigenvalues.front());
}

void sort_and_normalize(std::vector<Complex>& values, std::vector<ComplexVector>& vectors, Index k) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Complex& la = values[a];
        const Complex& lb = values[b];
        double ma = std::abs(la);
        double mb = std::abs(lb);
        if (ma != mb) return ma > mb;
        if (la.real() != lb.real()) return la.real() > lb.real();
        return la.imag() > lb.imag();
    });
    std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max<Index>(k, 0)));
    std::vector<Complex> sorted_values;
    std::vector<ComplexVector> sorted_vectors;
    for (std::size_t i = 0; i < keep; ++i) {
        sorted_values.push_back(values[order[i]]);
        ComplexVector v = vectors[order[i]];
        double norm = v.norm();
        if (norm > 0.0 && std::isfinite(norm)) {
            v /= norm;
            Index big = 0;
            double big_abs = -1.0;
            for (Index r = 0; r < v.size(); ++r) {
                double a = std::abs(v(r));
                if (a > big_abs) {
                    big_abs = a;
                    big = r;
                }
            }
            Complex phase = std::conj(v(big)) / std::abs(v(big));
            v *= phase;
            v(big) = Complex(std::abs(v(big)), 0.0);
        }
        sorted_vectors.push_back(std::move(v));
    }
    values = std::move(sorted_values);
    vectors = std::move(sorted_vectors);
}

EigenReport eigs(const Matrix& m, Index k, EigenMethod method) {
    if (m.rows() != m.cols()) {
        throw ValidationError("eigs: matrix must be square");
    }
    EigenReport report;
    report.method = method;
    if (!m.allFinite()) {
        report.usable = false;
        report.reason = "non-finite matrix";
        return report;
    }
    Eigen::EigenSolver<Matrix> solver(m, true);
    if (solver.info() != Eigen::Success) {
        report.usable = false;
        report.reason = "eigensolver failed";
        return report;
    }
    const ComplexVector values = solver.eigenvalues();
    const ComplexMatrix vectors = solver.eigenvectors();
    for (Index i = 0; i < values.size(); ++i) {
        report.eigenvalues.push_back(values(i));
        report.eigenvectors.push_back(vectors.col(i));
    }
    sort_and_normalize(report.eigenvalues, report.eigenvectors, k);
    return report;
}

EigenReport dmd_eigs(const SolverTrace& trace, Index k) {
    EigenReport report;
    report.method = EigenMethod::dmd;
    const std::size_t count = trace.iterates.size();
    if (count < 3) {
        report.usable = false;
        report.reason = "insufficient iterations";
        return report;
    }
    const Index n = trace.iterates.front().size();
    const Index diffs = static_cast<Index>(count) - 1;
    Matrix d(n, diffs);
    double largest = 0.0;
    for (Index m = 0; m < diffs; ++m) {
        d.col(m) = trace.iterates[m + 1] - trace.iterates[m];
        largest = std::max(largest, d.col(m).norm());
    }
    if (!d.allFinite()) {
        report.usable = false;
        report.reason = "non-finite iterates";
        return report;
    }
    if (largest < 1e-14) {
        report.usable = false;
        report.reason = "degenerate differences";
        return report;
    }
    const Matrix x = d.leftCols(diffs - 1);
    const Matrix y = d.rightCols(diffs - 1);
    Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > 1e-12 * sigma(0)) {
        ++rank;
    }
    if (rank == 0) {
        report.usable = false;
        report.reason = "degenerate differences";
        return report;
    }
    const Matrix u = svd.matrixU().leftCols(rank);
    const Matrix v = svd.matrixV().leftCols(rank);
    const Vector inv_sigma = sigma.head(rank).cwiseInverse();
    // y * v * sigma^{-1} maps reduced coordinates to state space.
    const Matrix lift = y * v * inv_sigma.asDiagonal();
    const Matrix reduced = u.transpose() * lift;
    Eigen::EigenSolver<Matrix> solver(reduced, true);
    if (solver.info() != Eigen::Success) {
        report.usable = false;
        report.reason = "eigensolver failed";
        return report;
    }
    const ComplexVector values = solver.eigenvalues();
    const ComplexMatrix w = solver.eigenvectors();
    for (Index i = 0; i < values.size(); ++i) {
        Complex lambda = values(i);
        ComplexVector mode;
        if (std::abs(lambda) > 1e-14) {
            mode = (lift.cast<Complex>() * w.col(i)) / lambda;
        } else {
            mode = u.cast<Complex>() * w.col(i);
        }
        if (mode.norm() == 0.0) {
            mode = u.cast<Complex>() * w.col(i);
        }
        report.eigenvalues.push_back(lambda);
        report.eigenvectors.push_back(std::move(mode));
    }
    sort_and_normalize(report.eigenvalues, report.eigenvectors, k);
    return report;
}

void AnomalyConfig::validate() const {
    if (!(cluster_radius >= 0.0 && cluster_radius < anomaly_threshold &&
          anomaly_threshold < unit_circle_threshold)) {
        throw ValidationError("anomaly config requires 0 <= cluster_radius < anomaly_threshold < unit_circle_threshold");
    }
}

std::string to_string(AnomalyFlag flag) {
    switch (flag) {
        case AnomalyFlag::near_unit_circle: return "near_unit_circle";
        case AnomalyFlag::period_doubling_signature: return "period_doubling_signature";
        case AnomalyFlag::unstable: return "unstable";
    }
    return "unknown";
}

bool AnomalyFlags::get(AnomalyFlag flag) const {
    switch (flag) {
        case AnomalyFlag::near_unit_circle: return near_unit_circle;
        case AnomalyFlag::period_doubling_signature: return period_doubling_signature;
        case AnomalyFlag::unstable: return unstable;
    }
    return false;
}

std::string AnomalyFlags::str() const {
    std::string out;
    for (AnomalyFlag flag : kAllFlags) {
        if (get(flag)) {
            if (!out.empty()) out += '|';
            out += to_string(flag);
        }
    }
    return out;
}

AnomalyReport detect_anomalies(const EigenReport& report, const AnomalyConfig& config,
                               Complex baseline_center) {
    AnomalyReport out;
    out.baseline_center = baseline_center;
    for (std::size_t i = 0; i < report.eigenvalues.size(); ++i) {
        const Complex lambda = report.eigenvalues[i];
        const double mag = std::abs(lambda);
        out.leading_magnitude = std::max(out.leading_magnitude, mag);
        const bool in_cluster = std::abs(lambda - baseline_center) <= config.cluster_radius;
        if (!in_cluster && mag >= config.anomaly_threshold) {
            out.outlier_indices.push_back(static_cast<Index>(i));
        } else {
            out.cluster_indices.push_back(static_cast<Index>(i));
        }
        if (mag >= config.unit_circle_threshold) {
            out.flags.near_unit_circle = true;
            if (lambda.real() <= config.period_doubling_real_cut) {
                out.flags.period_doubling_signature = true;
            }
        }
        if (mag >= 1.0) {
            out.flags.unstable = true;
        }
    }
    return out;
}

std::vector<CrossingEvent> track_crossings(const std::vector<IndexedAnomaly>& reports) {
    std::vector<CrossingEvent> events;
    AnomalyFlags state;
    for (const IndexedAnomaly& entry : reports) {
        if (!entry.report) continue;
        for (AnomalyFlag flag : kAllFlags) {
            const bool now = entry.report->flags.get(flag);
            if (now != state.get(flag)) {
                events.push_back({entry.step_index, flag, now});
            }
        }
        state = entry.report->flags;
    }
    return events;
}

}  // namespace nldiag
