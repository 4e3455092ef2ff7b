#include "ncrank/atom_rank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <mutex>
#include <numbers>
#include <ostream>
#include <set>

#include "json.hpp"

namespace ncrank {

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double normalized_trace_imag(const Matrix& w) {
    return w.trace().imag() / static_cast<double>(w.rows());
}

struct ThetaPointResult {
    ThetaSample sample;
    Matrix w;
};

// Core of theta_at / theta_scan: one certified sample, optionally warm-started.
ThetaPointResult theta_point(const CovarianceMap& cov, const Matrix* mean, double y, double eps,
                             const Matrix* warm) {
    if (!(y > 0.0)) throw ValidationError("theta: y must be > 0");
    if (!(eps > 0.0)) throw ValidationError("theta: eps must be > 0");
    EvaluationPoint ep = EvaluationPoint::upper_imaginary(y, cov.dim(), mean);
    // Residual threshold sigma * y with sigma = eps/(1+eps) corresponds to the
    // solver's delta = eps * ||Im(b)^-1||.
    SolverConfig cfg = SolverConfig::make(ep, cov.norm(), eps * ep.im_inv_norm,
                                          TerminationMode::APosterioriResidual);
    SolveOutcome sol = solve_fixed_point(ep, cov, cfg, nullptr, warm);
    if (!sol.converged)
        throw SolverFailure("theta: no convergence at y = " + fmt17(y) + " within " +
                            std::to_string(cfg.max_iterations) + " iterations");
    ThetaPointResult r;
    r.sample.y = y;
    r.sample.theta_tilde = -y * normalized_trace_imag(sol.w);
    r.sample.eps = eps;
    r.sample.solver_iterations = sol.iterations;
    r.w = std::move(sol.w);
    return r;
}

}  // namespace

RegularityInfo::RegularityInfo(double c_, double beta_, double r0_) : c(c_), beta(beta_), r0(r0_) {
    if (!(c >= 0.0)) throw ValidationError("RegularityInfo: c must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("RegularityInfo: beta must be in (0, 1]");
    if (!(r0 > 0.0)) throw ValidationError("RegularityInfo: r0 must be > 0");
}

MomentTriple moment_triple(const CovarianceMap& cov) {
    if (cov.pencil().has_mean())
        throw ValidationError("moment_triple: moments assume a centered pencil (zero mean)");
    const double n = static_cast<double>(cov.dim());
    const Matrix& e1 = cov.eta_identity();
    const Matrix e1e1 = e1 * e1;
    const Matrix eee = cov.apply(cov.apply(e1));
    MomentTriple m;
    m.a2 = e1.trace().real() / n;
    m.a4 = 2.0 * e1e1.trace().real() / n;
    m.a6 = 2.0 * (e1e1 * e1).trace().real() / n + 3.0 * eee.trace().real() / n;
    if (m.a4 * m.a4 > m.a2 * m.a6 * (1.0 + 1e-12))
        throw NumericalError("moment_triple: Cauchy-Schwarz a4^2 <= a2 a6 violated");
    return m;
}

double moment_atom_bound(const MomentTriple& m) {
    if (m.a4 == 0.0) return 1.0;  // zero pencil: mu = delta_0
    const double ratio = m.a6 * m.a2 / (m.a4 * m.a4);
    if (ratio < 1.0 - 1e-12)
        throw ValidationError("moment_atom_bound: inconsistent moments (a6 a2 < a4^2)");
    const double base = m.a2 * m.a2 / m.a4;
    if (ratio <= 1.0 + 1e-12) return 1.0 - base;
    const double rho = 1.0 / std::sqrt(ratio - 1.0);
    return 1.0 - base * rho * (std::numbers::pi / 2.0 - std::atan(rho));
}

int moment_rank_lower_bound(const LinearPencil& p) {
    CovarianceMap cov(p);
    const MomentTriple m = moment_triple(cov);
    const double mass_bound = moment_atom_bound(m);
    const double n = static_cast<double>(p.dim());
    return static_cast<int>(std::ceil(n * (1.0 - mass_bound)));
}

ThetaSample theta_at(const LinearPencil& p, double y, double eps) {
    CovarianceMap cov(p);
    Matrix mean;
    const Matrix* mp = nullptr;
    if (p.has_mean()) {
        mean = p.mean()->get();
        mp = &mean;
    }
    return theta_point(cov, mp, y, eps, nullptr).sample;
}

std::vector<ThetaScanPoint> theta_scan(const LinearPencil& p, const std::vector<double>& y_values,
                                       double eps, bool warm_start, int threads) {
    if (y_values.empty()) throw ValidationError("theta_scan: empty grid");
    for (std::size_t i = 0; i < y_values.size(); ++i) {
        if (!(y_values[i] > 0.0)) throw ValidationError("theta_scan: y values must be positive");
        if (i > 0 && !(y_values[i] < y_values[i - 1]))
            throw ValidationError("theta_scan: y values must be strictly decreasing");
    }
    CovarianceMap cov(p);
    Matrix mean;
    const Matrix* mp = nullptr;
    if (p.has_mean()) {
        mean = p.mean()->get();
        mp = &mean;
    }

    std::vector<ThetaScanPoint> out(y_values.size());
    for (std::size_t i = 0; i < y_values.size(); ++i) out[i].y = y_values[i];

    if (!warm_start && threads > 1) {
        std::vector<std::future<void>> jobs;
        std::size_t next = 0;
        const int workers = std::min<int>(threads, static_cast<int>(y_values.size()));
        std::mutex mu;
        for (int t = 0; t < workers; ++t)
            jobs.push_back(std::async(std::launch::async, [&] {
                while (true) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lk(mu);
                        if (next >= y_values.size()) return;
                        i = next++;
                    }
                    try {
                        out[i].sample = theta_point(cov, mp, y_values[i], eps, nullptr).sample;
                    } catch (const Error& e) {
                        out[i].error = e.what();
                    }
                }
            }));
        for (auto& j : jobs) j.get();
        return out;
    }

    Matrix warm;
    bool have_warm = false;
    for (std::size_t i = 0; i < y_values.size(); ++i) {
        try {
            ThetaPointResult r = theta_point(cov, mp, y_values[i], eps,
                                             (warm_start && have_warm) ? &warm : nullptr);
            out[i].sample = r.sample;
            warm = std::move(r.w);
            have_warm = true;
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    }
    return out;
}

void write_theta_csv(std::ostream& os, const std::vector<ThetaScanPoint>& scan) {
    os << "y,theta,eps,iterations\n";
    for (const auto& pt : scan) {
        if (!pt.sample) continue;
        const ThetaSample& s = *pt.sample;
        os << fmt17(s.y) << ',' << fmt17(s.theta_tilde) << ',' << fmt17(s.eps) << ','
           << s.solver_iterations << '\n';
    }
}

RankCertificate rank_exact_regular(const LinearPencil& p, const RegularityInfo& reg) {
    if (p.has_mean())
        throw ValidationError("rank_exact_regular: the rank-atom identity needs a centered pencil");
    const double n = static_cast<double>(p.dim());
    const double expo = (2.0 + reg.beta) / 2.0;
    const double y_reg = std::pow(reg.r0, expo);
    const double y_eps = std::pow(1.0 / (4.0 * n * (reg.c + 1.0)), (2.0 + reg.beta) / (2.0 * reg.beta));
    double y = 0.5 * std::min(y_reg, y_eps);
    if (!(y >= 1e-300) || !std::isfinite(y))
        throw NumericalError("rank_exact_regular: threshold y = " + fmt17(y) +
                             " underflows double precision (r0^((2+beta)/2) = " + fmt17(y_reg) +
                             ", (1/(4N(c+1)))^((2+beta)/(2beta)) = " + fmt17(y_eps) + ")");
    const double eps = 1.0 / (4.0 * n);

    RankCertificate cert;
    cert.n = static_cast<int>(p.dim());
    for (int attempt = 0; attempt < 4; ++attempt) {
        ThetaSample s = theta_at(p, y, eps);
        const double scaled = n * s.theta_tilde;
        const long k = std::lround(scaled);
        cert.samples.push_back(s);
        if (std::abs(scaled - std::floor(scaled) - 0.5) < 1e-9) {
            // Exactly half-integer: impossible with exact inputs, so retry closer
            // to the axis instead of rounding.
            cert.warnings.push_back("indeterminate rounding at y = " + fmt17(y) + "; retrying");
            y /= 10.0;
            if (!(y >= 1e-300))
                throw NumericalError("rank_exact_regular: retry threshold underflows");
            continue;
        }
        const int exact = std::clamp<int>(cert.n - static_cast<int>(k), 0, cert.n);
        cert.exact = exact;
        cert.lower_bound = exact;
        cert.upper_bound = exact;
        cert.methods.push_back("ExactRegular");
        return cert;
    }
    throw NumericalError("rank_exact_regular: persistent half-integer ties; inputs look contaminated");
}

RankCertificate rank_lower_bound_scan(const LinearPencil& p, double y, double eps) {
    ThetaSample s = theta_at(p, y, eps);
    const double n = static_cast<double>(p.dim());
    // Upward slack keeps the floor conservative under fp noise.
    const int floor_term =
        std::max(0, static_cast<int>(std::floor(n * (s.theta_tilde + eps) + 1e-12)));
    RankCertificate cert;
    cert.n = static_cast<int>(p.dim());
    cert.lower_bound = std::clamp(cert.n - floor_term, 0, cert.n);
    cert.methods.push_back("ThetaScan");
    cert.samples.push_back(s);
    if (floor_term == 0) {
        cert.exact = cert.n;  // fullness certified
        cert.upper_bound = cert.n;
    }
    return cert;
}

namespace {

void check_index_set(const std::vector<int>& ix, Index n, const char* what) {
    std::set<int> seen;
    for (int i : ix) {
        if (i < 0 || i >= n)
            throw ValidationError(std::string("zero_block: ") + what + " index " +
                                  std::to_string(i) + " out of range [0, " + std::to_string(n - 1) +
                                  "]");
        if (!seen.insert(i).second)
            throw ValidationError(std::string("zero_block: duplicate ") + what + " index " +
                                  std::to_string(i));
    }
}

void check_block_zero(const Matrix& a, const std::vector<int>& rows, const std::vector<int>& cols,
                      const std::string& which) {
    for (int i : rows)
        for (int j : cols)
            if (a(i, j) != Complex(0.0, 0.0))
                throw ValidationError("zero_block: " + which + " has nonzero entry (" +
                                      std::to_string(i) + ", " + std::to_string(j) + ")");
}

int zero_block_bound_impl(const std::vector<const Matrix*>& mats,
                          const std::vector<std::string>& names, Index n,
                          const std::vector<int>& rows, const std::vector<int>& cols) {
    check_index_set(rows, n, "row");
    check_index_set(cols, n, "column");
    for (std::size_t k = 0; k < mats.size(); ++k) check_block_zero(*mats[k], rows, cols, names[k]);
    return static_cast<int>(2 * n) - static_cast<int>(rows.size()) - static_cast<int>(cols.size());
}

// Exhaustive maximal zero-block search over the union support; for each row
// subset the admissible columns are forced, so 2^N candidates suffice.
std::optional<int> auto_zero_block_bound(const std::vector<const Matrix*>& mats, Index n) {
    if (n > 12) return std::nullopt;
    std::vector<std::vector<bool>> support(n, std::vector<bool>(n, false));
    for (const Matrix* m : mats)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if ((*m)(i, j) != Complex(0.0, 0.0)) support[i][j] = true;
    int best = 0;  // max |rows| + |cols| over zero blocks
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        int nrows = 0;
        int ncols = 0;
        for (Index j = 0; j < n; ++j) {
            bool colfree = true;
            for (Index i = 0; i < n && colfree; ++i)
                if ((mask >> i) & 1u) colfree = !support[i][j];
            ncols += colfree;
        }
        for (Index i = 0; i < n; ++i) nrows += (mask >> i) & 1u;
        if (ncols > 0) best = std::max(best, nrows + ncols);
    }
    if (best == 0) return std::nullopt;
    return static_cast<int>(2 * n) - best;
}

std::vector<const Matrix*> coeff_matrices(const LinearPencil& p, std::vector<std::string>& names) {
    std::vector<const Matrix*> mats;
    for (std::size_t k = 0; k < p.coeffs().size(); ++k) {
        mats.push_back(&p.coeffs()[k].get());
        names.push_back("coefficient " + std::to_string(k + 1));
    }
    if (p.has_mean()) {
        mats.push_back(&p.mean()->get());
        names.push_back("mean");
    }
    return mats;
}

}  // namespace

int zero_block_upper_bound(const LinearPencil& p, const std::vector<int>& rows,
                           const std::vector<int>& cols) {
    std::vector<std::string> names;
    const auto mats = coeff_matrices(p, names);
    return zero_block_bound_impl(mats, names, p.dim(), rows, cols);
}

int zero_block_upper_bound(const GeneralPencil& p, const std::vector<int>& rows,
                           const std::vector<int>& cols) {
    std::vector<const Matrix*> mats;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < p.coeffs().size(); ++k) {
        mats.push_back(&p.coeffs()[k]);
        names.push_back("coefficient " + std::to_string(k + 1));
    }
    return zero_block_bound_impl(mats, names, p.dim(), rows, cols);
}

RankCertificate certify_rank(const LinearPencil& p, const CertifyOptions& options) {
    RankCertificate cert;
    cert.n = static_cast<int>(p.dim());
    cert.lower_bound = 0;
    const double eps = options.eps.value_or(1.0 / (4.0 * static_cast<double>(p.dim())));

    if (p.has_mean())
        cert.warnings.push_back(
            "pencil has a constant term; the rank-atom identity is stated for homogeneous "
            "pencils only");

    // Cheap moment-based lower bound first.
    if (!p.has_mean()) {
        cert.lower_bound = std::max(cert.lower_bound, moment_rank_lower_bound(p));
        cert.methods.push_back("MomentBound");
    }

    // Theta-based lower bound at the requested y or along the default grid.
    std::vector<double> grid = options.y ? std::vector<double>{*options.y} : options.scan_grid;
    bool full_certified = false;
    const auto scan = theta_scan(p, grid, eps, /*warm_start=*/true);
    for (const auto& pt : scan) {
        if (!pt.sample) {
            cert.warnings.push_back("theta scan failed at y = " + fmt17(pt.y) + ": " + pt.error);
            continue;
        }
        const ThetaSample& s = *pt.sample;
        cert.samples.push_back(s);
        const int floor_term = std::max(
            0, static_cast<int>(std::floor(p.dim() * (s.theta_tilde + s.eps) + 1e-12)));
        cert.lower_bound = std::max(cert.lower_bound, cert.n - floor_term);
        if (floor_term == 0) full_certified = true;
    }
    if (!scan.empty()) cert.methods.push_back("ThetaScan");

    // Zero-block upper bound: explicit index sets win over the exhaustive search.
    std::optional<int> upper;
    if (options.block) {
        const int ub = zero_block_upper_bound(p, options.block->first, options.block->second);
        upper = std::min(cert.n, ub);
        cert.methods.push_back("ZeroBlock");
    } else if (options.auto_block) {
        std::vector<std::string> names;
        const auto mats = coeff_matrices(p, names);
        if (auto ub = auto_zero_block_bound(mats, p.dim())) {
            upper = std::min(cert.n, *ub);
            cert.methods.push_back("ZeroBlock");
        } else if (p.dim() > 12) {
            cert.warnings.push_back("auto block search skipped: N > 12, supply --block");
        }
    }
    cert.upper_bound = upper;

    if (full_certified) {
        cert.exact = cert.n;
        cert.upper_bound = cert.n;
    }

    // Exact procedure when regularity information is available.
    if (options.reg && !p.has_mean()) {
        RankCertificate ex = rank_exact_regular(p, *options.reg);
        cert.methods.push_back("ExactRegular");
        for (const auto& s : ex.samples) cert.samples.push_back(s);
        for (const auto& w : ex.warnings) cert.warnings.push_back(w);
        if (ex.exact) {
            if (*ex.exact < cert.lower_bound ||
                (cert.upper_bound && *ex.exact > *cert.upper_bound))
                cert.warnings.push_back("exact-regular result contradicts the other bounds");
            cert.exact = ex.exact;
        }
    } else if (options.reg && p.has_mean()) {
        cert.warnings.push_back("exact procedure skipped: pencil is not centered");
    }

    if (cert.exact) {
        cert.lower_bound = *cert.exact;
        cert.upper_bound = *cert.exact;
    } else if (cert.upper_bound && cert.lower_bound >= *cert.upper_bound) {
        if (cert.lower_bound > *cert.upper_bound) {
            cert.warnings.push_back("lower bound exceeds upper bound; numerical contamination");
            cert.lower_bound = *cert.upper_bound;
        }
        cert.exact = cert.lower_bound;
    }
    return cert;
}

RankCertificate certify_rank(const ParsedPencil& p, const CertifyOptions& options) {
    if (const auto* lin = std::get_if<LinearPencil>(&p)) return certify_rank(*lin, options);

    // General pencil: certify the 2N x 2N hermitization, then halve. The
    // hermitized rank is exactly twice the original one.
    const GeneralPencil& gen = std::get<GeneralPencil>(p);
    LinearPencil herm = hermitize(gen);
    CertifyOptions opts = options;
    if (!options.eps) opts.eps = 1.0 / (4.0 * static_cast<double>(herm.dim()));
    RankCertificate big = certify_rank(herm, opts);

    RankCertificate cert;
    cert.n = static_cast<int>(gen.dim());
    cert.methods = big.methods;
    cert.samples = big.samples;
    cert.warnings = big.warnings;
    cert.warnings.push_back("input hermitized: bounds computed on the 2N pencil and halved");
    cert.lower_bound = (big.lower_bound + 1) / 2;
    if (big.upper_bound) cert.upper_bound = *big.upper_bound / 2;
    if (big.exact) {
        if (*big.exact % 2 != 0)
            cert.warnings.push_back("hermitized rank came out odd; expected an even value");
        cert.exact = *big.exact / 2;
        cert.lower_bound = *cert.exact;
        cert.upper_bound = *cert.exact;
    }
    return cert;
}

std::string RankCertificate::to_json() const {
    nlohmann::ordered_json j;
    j["N"] = n;
    j["lower"] = lower_bound;
    j["upper"] = upper_bound ? nlohmann::ordered_json(*upper_bound) : nlohmann::ordered_json();
    j["exact"] = exact ? nlohmann::ordered_json(*exact) : nlohmann::ordered_json();
    j["methods"] = methods;
    nlohmann::ordered_json samps = nlohmann::ordered_json::array();
    for (const auto& s : samples) {
        nlohmann::ordered_json e;
        e["y"] = s.y;
        e["theta"] = s.theta_tilde;
        e["eps"] = s.eps;
        samps.push_back(e);
    }
    j["samples"] = samps;
    j["warnings"] = warnings;
    return j.dump();
}

}  // namespace ncrank
