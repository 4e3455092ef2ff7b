#pragma once

#include <Eigen/Dense>
#include <complex>

#include "ncrank/errors.hpp"

namespace ncrank {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

/// Relative tolerance for classifying a matrix as Hermitian; inputs within
/// tolerance are symmetrized exactly, anything beyond is treated as general.
inline constexpr double kHermitianRelTol = 1e-12;

bool all_finite(const Matrix& m);

/// Throws ValidationError unless m is square with finite entries.
void require_square_finite(const Matrix& m, const char* what);

/// (M + M*) / 2
Matrix hermitian_part(const Matrix& m);

/// (M - M*) / (2i); Hermitian for any square M.
Matrix imaginary_part(const Matrix& m);

bool is_hermitian(const Matrix& m, double rel_tol = kHermitianRelTol);

/// Operator norm (largest singular value), computed from the top eigenvalue
/// of M*M. The error certificates need the exact C*-norm; Frobenius would
/// inflate every constant.
double operator_norm(const Matrix& m);

/// Smallest / largest eigenvalue of a Hermitian matrix.
double min_eigenvalue_hermitian(const Matrix& m);
double max_eigenvalue_hermitian(const Matrix& m);

}  // namespace ncrank
