// QARCH feedback kernels: sigma^2_t = s^2 + sum_tau L(tau) r_{t-tau}
//                                   + sum_{tau,tau'} K(tau,tau') r_{t-tau} r_{t-tau'}.
// K is symmetric; lags are 1-based in the model, stored 0-based (K(i,j)
// weights r_{t-(i+1)} r_{t-(j+1)}).
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qarch {

inline constexpr int kMaxKernelHorizon = 512;

struct FeedbackKernel {
    int q = 0;
    double s2 = 0.0;
    Eigen::VectorXd L;  // length q
    Eigen::MatrixXd K;  // q x q, symmetric

    double trace() const { return K.trace(); }
    Eigen::VectorXd diagonal() const { return K.diagonal(); }
    bool is_diagonal(double tol = 0.0) const;
};

// Validates shapes, s2 >= 0 and symmetry (symmetrizes round-off level
// asymmetry, rejects anything larger).
FeedbackKernel make_kernel(int q, double s2, Eigen::VectorXd L, Eigen::MatrixXd K);

// --- structured families (section-3 shapes) ---

// purely diagonal kernel K(tau,tau) = k(tau)
FeedbackKernel build_arch(const Eigen::VectorXd& k, double s2,
                          const std::optional<Eigen::VectorXd>& L = std::nullopt);

// diagonal power law k(tau) = g tau^-alpha, optionally cut off by exp(-tau/q0)
FeedbackKernel build_figarch_diag(double g, double alpha, double q0, int q, double s2);

// overlapping 1-day + 2-day returns; g1 length q, g2 length q-1
FeedbackKernel build_two_scale(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2, double s2);

// multiscale cumulative returns: K(a,b) = G[max(a,b)], G[t] = sum_{l>=t} g_bb(l)
FeedbackKernel build_bb(const Eigen::VectorXd& g_bb, double s2);
// mixed variant: BB off-diagonal, independent diagonal
FeedbackKernel build_bb_mixed(const Eigen::VectorXd& g_bb, const Eigen::VectorXd& diag, double s2);

// trend effect over matching horizons; diag length q, g_z length floor(q/2)
FeedbackKernel build_zumbach(const Eigen::VectorXd& diag, const Eigen::VectorXd& g_z, double s2);

// last return times a long trend; diag length q, g_lt length q-1
FeedbackKernel build_long_trend(const Eigen::VectorXd& diag, const Eigen::VectorXd& g_lt, double s2);

// --- baseline profile s^2(q) = s_inf2 + g q^(1-alpha)/(alpha-1) exp(-q/q0) ---

struct S2Profile {
    double s_inf2 = 0.0;
    double alpha = 1.5;
    double g = 0.0;
    double q0 = 1.0;

    double operator()(double q) const;
};

// Diagonal kernel implied by an s^2(q) profile under unit variance:
// k(1) = 1 - s^2(1), k(tau) = s^2(tau-1) - s^2(tau). Its trace equals
// 1 - s^2(q) exactly.
Eigen::VectorXd profile_implied_diagonal(const S2Profile& profile, int q);

// --- evaluation ---

// window is ordered most-recent-first: window[0] = r_{t-1}. Extra entries
// beyond q are ignored. May return a negative value for indefinite K; the
// caller owns the policy.
double sigma2(const FeedbackKernel& kernel, std::span<const double> window);

// brute-force O(q^2) double loop; reference path for tests
double sigma2_naive(const FeedbackKernel& kernel, std::span<const double> window);

struct PositivityReport {
    bool definite = false;          // eigen test && quadratic test
    bool eigen_ok = false;          // all eigenvalues >= -tol
    double min_eigenvalue = 0.0;
    bool quadratic_applicable = true;
    double quadratic_lhs = 0.0;     // L' K^-1 L
    double margin = 0.0;            // 4 s^2 - L' K^-1 L
};

PositivityReport positivity_check(const FeedbackKernel& kernel, double tol = 1e-12);

// --- serialization (17 significant digits; bit-exact round trip) ---

void save_kernel(const FeedbackKernel& kernel, const std::string& path);
FeedbackKernel load_kernel(const std::string& path);

}  // namespace qarch
