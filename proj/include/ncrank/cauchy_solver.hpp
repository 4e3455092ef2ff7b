#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "ncrank/pencil.hpp"

namespace ncrank {

/// A point b in the upper half-plane of M_N(C): Im(b) positive definite.
/// Caches the quantities every bound is built from.
struct EvaluationPoint {
    Matrix b;
    double im_min_eig;   // smallest eigenvalue of Im(b) = (b - b*)/(2i), > 0
    double im_inv_norm;  // ||Im(b)^-1|| = 1 / im_min_eig
    double b_norm;       // ||b||

    static EvaluationPoint make(Matrix b);

    /// b = i y 1 - shift (shift defaults to zero). Im(b) = y 1 regardless of
    /// the Hermitian shift, so im_min_eig = y exactly.
    static EvaluationPoint upper_imaginary(double y, Index n, const Matrix* shift = nullptr);
};

enum class TerminationMode { APriori, APosterioriResidual, APosterioriStep };

/// Contraction-domain data for the iteration w -> h_b(w) = (b - eta(w))^-1
/// on D_r = { w : Im(w) < 0, ||w|| < r }:
///   epsilon_dom  = min{ r - ||Im(b)^-1||, (||b|| + r||eta||)^-2 ||Im(b)^-1||^-1 }
///   contraction_q = (1 + epsilon_dom / (2r))^-1
struct SolverConfig {
    double radius_r = 0.0;
    double epsilon_dom = 0.0;
    double contraction_q = 1.0;
    std::int64_t max_iterations = 10'000'000'000;
    double target_delta = 1e-8;
    TerminationMode mode = TerminationMode::APosterioriResidual;
    double initial_omega = 1.0;  // default start w0 = h_b(-i omega 1)

    /// Default radius r = ||Im(b)^-1|| + (1/sqrt(2) - 1/2) / (||Im(b)^-1|| ||eta||),
    /// which for b = i beta 1 and ||eta|| = 1 is the explicit closed form
    /// r = 1/beta + (1/sqrt(2) - 1/2) beta.
    static SolverConfig make(const EvaluationPoint& ep, double eta_norm, double target_delta,
                             TerminationMode mode);
    static SolverConfig with_radius(const EvaluationPoint& ep, double eta_norm, double radius,
                                    double target_delta, TerminationMode mode);
};

struct TraceRecord {
    std::int64_t iteration;
    double residual_norm;
    double step_norm;
};
using TraceSink = std::function<void(const TraceRecord&)>;

struct SolveOutcome {
    Matrix w;                     // approximate fixed point, Im(w) < 0
    std::int64_t iterations = 0;  // termination index n of the selected mode
    double residual_norm = 0.0;   // ||Delta_b(w)||
    double certified_error = 0.0; // bound on ||w - w_*||
    TerminationMode terminated_by = TerminationMode::APosterioriResidual;
    bool converged = false;
};

/// h_b(w) = (b - eta(w))^-1. Requires Im(w) negative semidefinite; a singular
/// b - eta(w) cannot occur for such w and signals a precondition violation.
Matrix apply_h(const EvaluationPoint& ep, const CovarianceMap& cov, const Matrix& w);

/// ||Delta_b(w)|| with Delta_b(w) = b - w^-1 - eta(w).
double residual_delta(const EvaluationPoint& ep, const CovarianceMap& cov, const Matrix& w);

/// Smallest n >= 1 with (||Im(b)^-1|| 2r/eps)^2 ||eta|| ||h_b(w0) - w0|| q^(n-1)
/// <= target_delta, evaluated in log space (q^(n-1) underflows long before the
/// Table-1 regimes are reached). Requires w0 in h_b(D_r). Throws NumericalError
/// when the count exceeds the 64-bit range.
std::int64_t a_priori_iteration_count(const EvaluationPoint& ep, const CovarianceMap& cov,
                                      const SolverConfig& cfg, const Matrix& w0);

/// Unique root r > 1/beta of (beta + r)^2 (r - 1/beta) = beta, the radius that
/// maximizes the strict-inclusion margin in the scalar standard-semicircular
/// case b = i beta 1. Safeguarded Newton from r0 = 1/beta + beta.
double optimal_radius(double beta);

/// Closed-form iterate h_b^n(-i omega 1) for N = 1, eta = id, b = i beta:
///   h^n = -i (1/q+) (1 - a p^(n-1)) / (1 - a p^n),
/// q± = beta/2 ± sqrt(beta^2/4 + 1), p = q-/q+, a = (q- + omega)/(q+ + omega).
/// Oracle for solver regression tests.
Complex scalar_closed_form_iterate(double beta, double omega, std::int64_t n);

/// Picard iteration w <- h_b(w) from w0 (default -i omega 1, or warm_start),
/// with the termination rule selected in cfg:
///  - APosterioriResidual: stop at the first n with ||Delta_b(h^n)|| <=
///    sigma ||Im(b)^-1||^-1, sigma = delta ||Im(b)^-1||^-1 / (1 + delta ||Im(b)^-1||^-1);
///    certified_error = ||Im(b)^-1||^2 ||Delta|| / (1 - sigma).
///  - APosterioriStep: stop at the first n with ||h^(n+1) - h^n|| <=
///    eps^2 delta / (4 r^2 ||eta|| ||Im(b)^-1||^2); returns h^(n+1), reports n;
///    certified_error = delta.
///  - APriori: seed w1 = h_b(w0), then run exactly a_priori_iteration_count
///    steps; certified_error = delta. Falls back to residual mode when the
///    count overflows.
/// Iteration indices match the published termination tables.
SolveOutcome solve_fixed_point(const EvaluationPoint& ep, const CovarianceMap& cov,
                               const SolverConfig& cfg, const TraceSink* trace = nullptr,
                               const Matrix* warm_start = nullptr);

}  // namespace ncrank
