#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace nldiag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Raised when a dense LU factorization meets a zero or non-finite pivot.
class SingularJacobianError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a residual, Jacobian or update contains NaN or Inf.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed configuration, netlists or fault lists.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

/// Solves a·x = b with partial-pivot LU.
/// Only an exactly zero or non-finite pivot counts as singular, so severely
/// ill-conditioned circuits (floating nodes, gmin up to 1e35 ohm) still solve.
Vector lu_solve(const Matrix& a, const Vector& b);

using WideMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using WideVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// lu_solve carried out in extended precision; the result is rounded back to double.
Vector lu_solve(const WideMatrix& a, const Vector& b);

}  // namespace nldiag
