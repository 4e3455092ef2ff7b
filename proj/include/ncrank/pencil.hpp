#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ncrank/matrix.hpp"

namespace ncrank {

/// Square complex matrix equal to its conjugate transpose. Construction
/// validates against kHermitianRelTol and stores the exactly symmetrized
/// form (M + M*)/2.
class HermitianMatrix {
public:
    explicit HermitianMatrix(Matrix m);

    const Matrix& get() const { return m_; }
    Index dim() const { return m_.rows(); }

private:
    Matrix m_;
};

/// a_1 (x) x_1 + ... + a_n (x) x_n with Hermitian coefficients, plus an
/// optional constant term (the mean of the associated semicircular element).
class LinearPencil {
public:
    explicit LinearPencil(std::vector<HermitianMatrix> coeffs,
                          std::optional<HermitianMatrix> mean = std::nullopt);

    Index dim() const { return dim_; }
    int num_vars() const { return static_cast<int>(coeffs_.size()); }
    const std::vector<HermitianMatrix>& coeffs() const { return coeffs_; }
    const std::optional<HermitianMatrix>& mean() const { return mean_; }
    bool has_mean() const { return mean_.has_value(); }
    Matrix mean_or_zero() const;
    bool is_zero() const;

private:
    std::vector<HermitianMatrix> coeffs_;
    std::optional<HermitianMatrix> mean_;
    Index dim_;
};

/// Pencil with arbitrary square coefficients; handled through hermitization.
class GeneralPencil {
public:
    explicit GeneralPencil(std::vector<Matrix> coeffs);

    Index dim() const { return dim_; }
    int num_vars() const { return static_cast<int>(coeffs_.size()); }
    const std::vector<Matrix>& coeffs() const { return coeffs_; }

private:
    std::vector<Matrix> coeffs_;
    Index dim_;
};

/// 2N x 2N pencil with coefficient blocks [[0, a_i], [a_i*, 0]]. The inner
/// rank of the result is exactly twice the inner rank of the input.
LinearPencil hermitize(const GeneralPencil& p);

using ParsedPencil = std::variant<LinearPencil, GeneralPencil>;

/// Parses the pencil file format:
///   { "n": <int>, "N": <int>,
///     "coeffs": [ [ [ {"re":..,"im":..}, ... ], ... ], ... ],
///     "mean": optional N x N block }
/// Row-major entries. Returns a LinearPencil iff every coefficient passes the
/// Hermitian check, a GeneralPencil otherwise. Errors carry line/field
/// positions.
ParsedPencil parse_pencil(std::string_view text);
ParsedPencil load_pencil(const std::string& path);

/// The Hermitian pencil a certificate computation runs on: the pencil itself,
/// or its hermitization. *was_hermitized reports which.
LinearPencil as_hermitian(const ParsedPencil& p, bool* was_hermitized = nullptr);

/// The completely positive covariance map eta(b) = sum_i a_i b a_i of a
/// pencil, together with its operator norm ||eta|| = ||eta(1)||.
class CovarianceMap {
public:
    explicit CovarianceMap(LinearPencil pencil);

    Index dim() const { return pencil_.dim(); }
    const LinearPencil& pencil() const { return pencil_; }

    /// eta(b) = sum_i a_i b a_i
    Matrix apply(const Matrix& b) const;

    /// Hot-path variant: out = eta(b), using tmp as scratch. No allocation.
    void apply_into(const Matrix& b, Matrix& out, Matrix& tmp) const;

    /// ||eta|| = ||eta(1)|| = ||sum a_i^2||; a positive map attains its norm
    /// at the identity.
    double norm() const { return norm_; }
    const Matrix& eta_identity() const { return eta_id_; }

private:
    LinearPencil pencil_;
    Matrix eta_id_;
    double norm_;
};

}  // namespace ncrank
