#include "ncrank/cauchy_solver.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ncrank {

namespace {

constexpr double kExplicitRadiusFactor = 0.20710678118654752;  // 1/sqrt(2) - 1/2

Matrix lower_halfplane_seed(Index n, double omega) {
    return Complex(0.0, -omega) * Matrix::Identity(n, n);
}

bool im_negative_semidefinite(const Matrix& w, double slack) {
    return max_eigenvalue_hermitian(imaginary_part(w)) <= slack;
}

}  // namespace

EvaluationPoint EvaluationPoint::make(Matrix b) {
    require_square_finite(b, "EvaluationPoint");
    const double min_eig = min_eigenvalue_hermitian(imaginary_part(b));
    if (!(min_eig > 0.0))
        throw ValidationError("EvaluationPoint: Im(b) must be positive definite (min eigenvalue " +
                              std::to_string(min_eig) + ")");
    EvaluationPoint ep;
    ep.im_min_eig = min_eig;
    ep.im_inv_norm = 1.0 / min_eig;
    ep.b_norm = operator_norm(b);
    ep.b = std::move(b);
    return ep;
}

EvaluationPoint EvaluationPoint::upper_imaginary(double y, Index n, const Matrix* shift) {
    if (!(y > 0.0) || !std::isfinite(y))
        throw ValidationError("EvaluationPoint: y must be positive and finite");
    Matrix b = Complex(0.0, y) * Matrix::Identity(n, n);
    if (shift) {
        if (shift->rows() != n || shift->cols() != n)
            throw ValidationError("EvaluationPoint: shift dimension mismatch");
        b -= *shift;
    }
    EvaluationPoint ep;
    ep.im_min_eig = y;  // exact: the Hermitian shift does not touch Im(b)
    ep.im_inv_norm = 1.0 / y;
    ep.b_norm = shift ? operator_norm(b) : y;
    ep.b = std::move(b);
    return ep;
}

SolverConfig SolverConfig::make(const EvaluationPoint& ep, double eta_norm, double target_delta,
                                TerminationMode mode) {
    double r;
    if (eta_norm > 0.0)
        r = ep.im_inv_norm + kExplicitRadiusFactor / (ep.im_inv_norm * eta_norm);
    else
        r = 2.0 * ep.im_inv_norm;  // eta = 0: h_b is constant, any r > ||Im(b)^-1|| works
    return with_radius(ep, eta_norm, r, target_delta, mode);
}

SolverConfig SolverConfig::with_radius(const EvaluationPoint& ep, double eta_norm, double radius,
                                       double target_delta, TerminationMode mode) {
    if (!(target_delta > 0.0)) throw ValidationError("SolverConfig: target_delta must be > 0");
    const double gap = radius - ep.im_inv_norm;
    if (!(gap > 0.0))
        throw ValidationError("SolverConfig: radius " + std::to_string(radius) +
                              " must exceed ||Im(b)^-1|| = " + std::to_string(ep.im_inv_norm));
    SolverConfig cfg;
    cfg.radius_r = radius;
    cfg.target_delta = target_delta;
    cfg.mode = mode;

    const double m_r = ep.b_norm + radius * eta_norm;
    const double msq = m_r * m_r;
    const double eps_margin = ep.im_min_eig / msq;  // m_r^-2 ||Im(b)^-1||^-1
    // The two margin expressions coincide at the optimal radius; r - ||Im(b)^-1||
    // suffers catastrophic cancellation there, so near-ties resolve to the
    // stable expression.
    if (gap < eps_margin * (1.0 - 1e-8)) {
        cfg.epsilon_dom = gap;
        cfg.contraction_q = (2.0 * radius) / (2.0 * radius + gap);
    } else {
        cfg.epsilon_dom = eps_margin;
        const double d = (2.0 * radius) * msq;
        cfg.contraction_q = d / (d + ep.im_min_eig);
    }
    return cfg;
}

Matrix apply_h(const EvaluationPoint& ep, const CovarianceMap& cov, const Matrix& w) {
    if (w.rows() != ep.b.rows() || w.cols() != ep.b.cols())
        throw ValidationError("apply_h: dimension mismatch");
    if (!im_negative_semidefinite(w, 1e-12 * std::max(1.0, operator_norm(w))))
        throw ValidationError("apply_h: Im(w) must be negative semidefinite");
    Matrix denom = ep.b - cov.apply(w);
    Matrix out = Eigen::PartialPivLU<Matrix>(denom).inverse();
    if (!all_finite(out))
        throw NumericalError("apply_h: b - eta(w) is singular; precondition violated");
    return out;
}

double residual_delta(const EvaluationPoint& ep, const CovarianceMap& cov, const Matrix& w) {
    if (w.rows() != ep.b.rows() || w.cols() != ep.b.cols())
        throw ValidationError("residual_delta: dimension mismatch");
    Matrix winv = Eigen::PartialPivLU<Matrix>(w).inverse();
    if (!all_finite(winv)) throw ValidationError("residual_delta: w is singular");
    return operator_norm(ep.b - winv - cov.apply(w));
}

std::int64_t a_priori_iteration_count(const EvaluationPoint& ep, const CovarianceMap& cov,
                                      const SolverConfig& cfg, const Matrix& w0) {
    const double diff = operator_norm(apply_h(ep, cov, w0) - w0);
    const double factor = ep.im_inv_norm * 2.0 * cfg.radius_r / cfg.epsilon_dom;
    const double c = factor * factor * cov.norm() * diff;
    if (c <= cfg.target_delta) return 1;
    const double steps = std::log(c / cfg.target_delta) / (-std::log(cfg.contraction_q));
    if (!(steps < 9.2e18))
        throw NumericalError("a priori bound cannot reach delta = " +
                             std::to_string(cfg.target_delta) + " within the 64-bit range");
    return 1 + static_cast<std::int64_t>(std::ceil(steps));
}

double optimal_radius(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ValidationError("optimal_radius: beta must be positive and finite");
    const double inv = 1.0 / beta;
    auto f = [&](double r) { return (beta + r) * (beta + r) * (r - inv) - beta; };
    // f is increasing on (1/beta, inf) with f(1/beta) = -beta < 0.
    double lo = inv, hi = inv + beta;
    while (f(hi) < 0.0) hi += beta;
    double r = inv + beta;
    for (int it = 0; it < 200; ++it) {
        const double fr = f(r);
        if (fr > 0.0)
            hi = r;
        else
            lo = r;
        const double s = beta + r;
        const double df = 2.0 * s * (r - inv) + s * s;
        double next = r - fr / df;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - r) <= 1e-16 * r) {
            r = next;
            break;
        }
        r = next;
    }
    return r;
}

Complex scalar_closed_form_iterate(double beta, double omega, std::int64_t n) {
    if (!(beta > 0.0) || !(omega > 0.0) || n < 1)
        throw ValidationError("scalar_closed_form_iterate: need beta > 0, omega > 0, n >= 1");
    const double qp = beta / 2.0 + std::sqrt(beta * beta / 4.0 + 1.0);
    const double qm = -1.0 / qp;  // q+ q- = -1; avoids cancellation in beta/2 - sqrt(...)
    const double p = qm / qp;
    const double a = (qm + omega) / (qp + omega);
    const double pn1 = std::pow(p, static_cast<double>(n - 1));
    const double pn = pn1 * p;
    return Complex(0.0, -1.0) * ((1.0 / qp) * (1.0 - a * pn1) / (1.0 - a * pn));
}

SolveOutcome solve_fixed_point(const EvaluationPoint& ep, const CovarianceMap& cov,
                               const SolverConfig& cfg, const TraceSink* trace,
                               const Matrix* warm_start) {
    const Index n = ep.b.rows();
    if (cov.dim() != n) throw ValidationError("solve_fixed_point: pencil/point dimension mismatch");

    Matrix w = warm_start ? *warm_start : Matrix(lower_halfplane_seed(n, cfg.initial_omega));
    if (warm_start) {
        if (w.rows() != n || w.cols() != n)
            throw ValidationError("solve_fixed_point: warm start dimension mismatch");
        if (!im_negative_semidefinite(w, 0.0))
            throw ValidationError("solve_fixed_point: warm start must lie in the lower half-plane");
    }

    const double iin = ep.im_inv_norm;
    const double delta = cfg.target_delta;

    // Residual termination: ||Delta|| <= sigma ||Im(b)^-1||^-1.
    const double sigma = delta * ep.im_min_eig / (1.0 + delta * ep.im_min_eig);
    const double thr_residual = sigma * ep.im_min_eig;
    // Step termination: ||h^(n+1) - h^n|| <= eps^2 delta / (4 r^2 ||eta|| ||Im(b)^-1||^2).
    const double eta_norm = cov.norm();
    const double thr_step =
        eta_norm > 0.0 ? cfg.epsilon_dom * cfg.epsilon_dom * delta /
                             (4.0 * cfg.radius_r * cfg.radius_r * eta_norm * iin * iin)
                       : std::numeric_limits<double>::infinity();

    TerminationMode mode = cfg.mode;
    std::int64_t apriori_total = -1;  // total h-applications for a priori mode

    Matrix eta_w(n, n), tmp(n, n), denom(n, n), w_next(n, n), eta_w_next(n, n);
    cov.apply_into(w, eta_w, tmp);
    Eigen::PartialPivLU<Matrix> lu(n);

    const bool want_step = trace != nullptr || mode == TerminationMode::APosterioriStep;

    SolveOutcome out;
    out.terminated_by = mode;
    std::int64_t count = 0;
    while (true) {
        denom = ep.b - eta_w;
        lu.compute(denom);
        w_next = lu.inverse();
        if (!all_finite(w_next))
            throw NumericalError("solve_fixed_point: non-finite iterate at step " +
                                 std::to_string(count + 1));
        ++count;
        cov.apply_into(w_next, eta_w_next, tmp);
        // Delta_b(w_next) = b - w_next^-1 - eta(w_next) = eta(w) - eta(w_next),
        // since w_next^-1 = b - eta(w) by construction.
        const double residual = operator_norm(eta_w - eta_w_next);
        const double step = want_step ? operator_norm(w - w_next)
                                      : std::numeric_limits<double>::quiet_NaN();
        if (trace) (*trace)({count, residual, step});

        if (mode == TerminationMode::APriori && count == 1) {
            // The a priori estimate needs a start inside h_b(D_r); the first
            // iterate qualifies whenever the seed has norm < r.
            SolverConfig probe = cfg;
            try {
                apriori_total = 1 + a_priori_iteration_count(ep, cov, probe, w_next);
            } catch (const NumericalError&) {
                mode = TerminationMode::APosterioriResidual;  // documented fallback
                out.terminated_by = mode;
            }
        }

        bool done = false;
        switch (mode) {
            case TerminationMode::APosterioriResidual:
                if (residual <= thr_residual) {
                    out.iterations = count;
                    out.certified_error = iin * iin * residual / (1.0 - sigma);
                    done = true;
                }
                break;
            case TerminationMode::APosterioriStep:
                if (step <= thr_step) {
                    out.iterations = count - 1;  // index of the iterate the step left from
                    out.certified_error = delta;
                    done = true;
                }
                break;
            case TerminationMode::APriori:
                if (count == apriori_total) {
                    out.iterations = apriori_total - 1;  // count past the seed application
                    out.certified_error = delta;
                    done = true;
                }
                break;
        }
        if (done) {
            out.w = std::move(w_next);
            out.residual_norm = residual;
            out.converged = true;
            return out;
        }
        if (count >= cfg.max_iterations) {
            out.w = std::move(w_next);
            out.iterations = count;
            out.residual_norm = residual;
            out.certified_error = std::numeric_limits<double>::infinity();
            out.converged = false;
            return out;
        }
        w.swap(w_next);
        eta_w.swap(eta_w_next);
    }
}

}  // namespace ncrank
