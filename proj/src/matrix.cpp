#include "ncrank/matrix.hpp"

#include <cmath>
#include <string>

namespace ncrank {

bool all_finite(const Matrix& m) {
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) {
            const Complex& z = m(i, j);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        }
    return true;
}

void require_square_finite(const Matrix& m, const char* what) {
    if (m.rows() != m.cols())
        throw ValidationError(std::string(what) + ": expected a square matrix, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    if (m.rows() == 0) throw ValidationError(std::string(what) + ": empty matrix");
    if (!all_finite(m)) throw ValidationError(std::string(what) + ": non-finite entry");
}

Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

Matrix imaginary_part(const Matrix& m) {
    // 1/(2i) = -i/2, exact in floating point
    return (m - m.adjoint()) * Complex(0.0, -0.5);
}

bool is_hermitian(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    double scale = 1.0;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            scale = std::max(scale, std::abs(m(i, j)));
    const double tol = rel_tol * scale;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i <= j; ++i)
            if (std::abs(m(i, j) - std::conj(m(j, i))) > tol) return false;
    return true;
}

double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
    Matrix gram = m.adjoint() * m;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    double top = es.eigenvalues().maxCoeff();
    return std::sqrt(std::max(0.0, top));
}

double min_eigenvalue_hermitian(const Matrix& m) {
    if (m.rows() == 1) return m(0, 0).real();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_eigenvalue_hermitian(const Matrix& m) {
    if (m.rows() == 1) return m(0, 0).real();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace ncrank
