#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ncrank/cauchy_solver.hpp"
#include "ncrank/pencil.hpp"

namespace ncrank {

/// Certified approximation of theta(y) = -y Im g(iy): |theta(y) - theta_tilde| < eps.
struct ThetaSample {
    double y = 0.0;
    double theta_tilde = 0.0;
    double eps = 0.0;
    std::int64_t solver_iterations = 0;
};

/// One point of a scan; per-point solver failures are recorded, not thrown.
struct ThetaScanPoint {
    double y = 0.0;
    std::optional<ThetaSample> sample;
    std::string error;
};

/// nu([-r, r]) <= c r^beta for 0 < r < r0, for the atom-free part nu.
struct RegularityInfo {
    double c;
    double beta;
    double r0;

    RegularityInfo(double c_, double beta_, double r0_);
};

struct RankCertificate {
    int n = 0;  // pencil dimension N
    int lower_bound = 0;
    std::optional<int> upper_bound;
    std::optional<int> exact;
    std::vector<std::string> methods;   // MomentBound | ThetaScan | ExactRegular | ZeroBlock
    std::vector<std::string> warnings;
    std::vector<ThetaSample> samples;

    std::string to_json() const;
};

/// Absolute moments a_2, a_4, a_6 of mu_S, computed from the covariance map:
///   a2 = tr_N(eta(1)), a4 = 2 tr_N(eta(1)^2),
///   a6 = 2 tr_N(eta(1)^3) + 3 tr_N(eta(eta(eta(1)))).
struct MomentTriple {
    double a2;
    double a4;
    double a6;
};

/// Requires a centered pencil; enforces Cauchy-Schwarz a4^2 <= a2 a6.
MomentTriple moment_triple(const CovarianceMap& cov);

/// Upper bound on mu_S({0}) from the k = 2 moment bound:
///   1 - (a2^2/a4) rho (pi/2 - arctan rho),  rho = (a6 a2 / a4^2 - 1)^(-1/2),
/// degenerating to 1 - a2^2/a4 at the a6 a2 = a4^2 boundary.
double moment_atom_bound(const MomentTriple& m);

/// rank(A) >= ceil(N (a2^2/a4) rho (pi/2 - arctan rho)).
int moment_rank_lower_bound(const LinearPencil& p);

/// Solves the fixed-point equation at b = i y 1 - mean with residual tolerance
/// y eps / (1 + eps) and returns theta_tilde = -y Im(tr_N(w)) with the
/// certificate |theta(y) - theta_tilde| < eps.
ThetaSample theta_at(const LinearPencil& p, double y, double eps);

/// One sample per y, strictly decreasing grid; each solution warm-starts the
/// next point (disable to solve points independently, in parallel when
/// threads > 1).
std::vector<ThetaScanPoint> theta_scan(const LinearPencil& p, const std::vector<double>& y_values,
                                       double eps, bool warm_start = true, int threads = 1);

/// CSV: header y,theta,eps,iterations; one row per successful sample,
/// 17 significant digits.
void write_theta_csv(std::ostream& os, const std::vector<ThetaScanPoint>& scan);

/// Exact rank via the full-regularity procedure: pick
///   y = 0.5 min{ r0^((2+beta)/2), (1/(4N(c+1)))^((2+beta)/(2 beta)) },
/// eps = 1/(4N); then rank = N - [N theta_tilde] with [.] the nearest integer.
/// Half-integer ties signal numerical contamination and rerun at smaller y.
RankCertificate rank_exact_regular(const LinearPencil& p, const RegularityInfo& reg);

/// Lower bound N - floor(N (theta_tilde + eps)); a vanishing floor term
/// certifies fullness, hence an exact rank of N.
RankCertificate rank_lower_bound_scan(const LinearPencil& p, double y, double eps);

/// Inner-rank upper bound 2N - |rows| - |cols| from a block of zeros shared by
/// every coefficient (and the constant term, if any). Indices are 0-based.
/// Throws listing the first violating (variable, entry) if the block is not
/// actually zero.
int zero_block_upper_bound(const LinearPencil& p, const std::vector<int>& rows,
                           const std::vector<int>& cols);
int zero_block_upper_bound(const GeneralPencil& p, const std::vector<int>& rows,
                           const std::vector<int>& cols);

struct CertifyOptions {
    std::optional<double> y;             // single scan point; otherwise the default grid
    std::optional<double> eps;           // default 1/(4N)
    std::optional<RegularityInfo> reg;   // enables the exact procedure
    std::optional<std::pair<std::vector<int>, std::vector<int>>> block;  // 0-based index sets
    bool auto_block = false;             // exhaustive zero-block search, N <= 12
    std::vector<double> scan_grid = {1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
};

/// Composite procedure: moment lower bound, theta-scan lower bound, optional
/// zero-block upper bound and exact-regularity run, merged into one
/// certificate. A GeneralPencil is hermitized first and the 2N-certificate
/// halved.
RankCertificate certify_rank(const ParsedPencil& p, const CertifyOptions& options = {});
RankCertificate certify_rank(const LinearPencil& p, const CertifyOptions& options = {});

}  // namespace ncrank
