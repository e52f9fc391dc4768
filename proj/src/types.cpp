#include "nldiag/types.hpp"

#include <cmath>

namespace nldiag {

bool all_finite(const Vector& v) { return v.allFinite(); }

bool all_finite(const Matrix& m) { return m.allFinite(); }

namespace {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lu_solve_impl(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) {
        throw std::invalid_argument("lu_solve: dimension mismatch");
    }
    if (!a.allFinite()) {
        throw NonFiniteError("lu_solve: non-finite matrix entry");
    }
    Eigen::PartialPivLU<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> lu(a);
    const auto& packed = lu.matrixLU();
    for (Index i = 0; i < packed.rows(); ++i) {
        Scalar pivot = packed(i, i);
        if (pivot == 0.0 || !std::isfinite(pivot)) {
            throw SingularJacobianError("lu_solve: zero pivot in column " + std::to_string(i));
        }
    }
    return lu.solve(b);
}

}  // namespace

Vector lu_solve(const Matrix& a, const Vector& b) { return lu_solve_impl<double>(a, b); }

Vector lu_solve(const WideMatrix& a, const Vector& b) {
    const WideVector wide = lu_solve_impl<long double>(a, b.cast<long double>());
    return wide.cast<double>();
}

}  // namespace nldiag
