// Closed-form and linear-system moment analytics: stationarity frontier,
// fourth-moment existence, kurtosis, and the long-memory asymptotics of the
// diagonal power-law family.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qarch/kernel.hpp"

namespace qarch {

// Horizons at or beyond this value are treated as the infinite-horizon
// branch (evaluated through zeta with an Euler-Maclaurin tail).
inline constexpr long kInfiniteHorizon = 4096;

struct ResidualSpec {
    double xi4 = 3.0;                 // <xi^4> of the unit-variance residual
    std::optional<double> nu;         // Student degrees of freedom, if any

    static ResidualSpec gaussian() { return {3.0, std::nullopt}; }
    static ResidualSpec student(double nu);  // requires nu > 4 for finite xi4
};

struct MomentReport {
    double sigma2_mean = 0.0;
    bool stable2 = false;
    double sigma4_mean = 0.0;         // ratio-normalized when m2 = 1
    bool stable4 = false;
    double kurtosis = 0.0;            // excess kurtosis of returns
    Eigen::VectorXd c2_theory;        // C2(tau), tau = 1..q
};

// Riemann zeta for alpha > 1: direct sum to 4096 plus Euler-Maclaurin tail
// (relative error below 1e-14 over alpha in [1.01, 60]).
double riemann_zeta(double alpha);

// sum_{tau=1..q} tau^-alpha; q >= kInfiniteHorizon uses the zeta branch.
double power_law_sum(double alpha, long q);

// critical feedback amplitude for K(tau,tau) = g tau^-alpha 1{tau<=q}:
// g_c = 1 / sum tau^-alpha; infinite-horizon branch returns 0 for alpha <= 1.
double critical_g(double alpha, long q);

MomentReport second_moment(const FeedbackKernel& kernel, const ResidualSpec& residual);

// Diagonal-kernel fourth-moment system nabla C2 = S (leverage absent).
// m2 is the second moment <sigma^2>; the default 1 gives scale-free ratios.
MomentReport fourth_moment_diag(const Eigen::VectorXd& k, const ResidualSpec& residual,
                                double m2 = 1.0);

// Joint self-consistent system for <sigma^4>, C2(tau) and D(t1,t2) for a
// general symmetric K (leverage absent). Size 1 + q + q(q-1)/2.
MomentReport fourth_moment_general(const FeedbackKernel& kernel, const ResidualSpec& residual);

// lowest-order ratio <sigma^4>/<sigma^2>^2 for k(tau) = g tau^-alpha;
// returns nullopt (divergent) when 2 alpha <= 1.
std::optional<double> perturbative_sigma4(double g, double alpha, const ResidualSpec& residual);

// boxed long-memory law beta = 1 - 2 eps, valid for 0 < eps < 1/2
double figarch_beta(double epsilon);

// determinant sign of the diagonal fourth-moment matrix at k = g tau^-alpha
int nabla_det_sign(double g, double alpha, int q, const ResidualSpec& residual);

// fourth-moment frontier g4(alpha, q): bisection on the det-sign of nabla
// along g in (0, g_c); throws if the bracket fails.
double fourth_frontier_g4(double alpha, int q, const ResidualSpec& residual,
                          int iterations = 42);

struct AlphaCResult {
    double alpha_c = 0.0;
    double inv_zeta_alpha_c = 0.0;
    std::vector<int> q_list;
    // one row per probed alpha: alpha, extrapolated relative gap g_inf
    std::vector<std::pair<double, double>> gap_curve;
};

// Locates the critical exponent where the fourth-moment frontier meets the
// stationarity frontier: the relative gap 1 - g4/g_c is extrapolated in
// q^(-1/3) over q_list and alpha_c is the root of the extrapolated gap.
AlphaCResult alpha_c_extrapolate(const std::vector<int>& q_list,
                                 const ResidualSpec& residual = ResidualSpec::gaussian());

struct FrontierPoint {
    double alpha = 0.0;
    long q = 0;
    double g_c = 0.0;
    double g_4 = 0.0;
};

// grid scan used by the CLI frontier CSV
std::vector<FrontierPoint> frontier_scan(const std::vector<double>& alphas,
                                         const std::vector<long>& qs,
                                         const ResidualSpec& residual);

}  // namespace qarch
