// Kernel calibration: reduced and off-diagonal GMM, Student-t likelihood
// with one-step (and damped iterated) maximum likelihood over off-diagonal
// or family-restricted parameters, the s2(q) profile fit, residual
// diagnostics, and the IS/OOS evaluation harness.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qarch/correlators.hpp"
#include "qarch/data.hpp"
#include "qarch/families.hpp"
#include "qarch/kernel.hpp"

namespace qarch {

// --- GMM ---

struct GmmDiagonal {
    double s2 = 0.0;
    Eigen::VectorXd L;
    Eigen::VectorXd k;
    bool trace_exceeds_one = false;  // flagged, not fatal
};

// Reduced GMM: unknowns (s2, L(1..q), k(1..q)) from the normalization,
// leverage and amplitude equations. When use_fitted_inputs is set, the
// positive-lag leverage and amplitude correlations are replaced by their
// fitted shapes before the solve. Falls back to the non-tilde estimators
// when the set has no vol2 branch (exact in-model).
GmmDiagonal gmm_diagonal(const CorrelationSet& corr, int q, bool use_fitted_inputs = false);

// Off-diagonal GMM: solves, column by column, the 4-point equations for
// K(t1, t2 > t1) with the diagonal k and leverage L held fixed. The
// correlation set must be built from tanh-truncated returns (r_cut = 3).
Eigen::MatrixXd gmm_offdiagonal(const CorrelationSet& corr, int q, const Eigen::VectorXd& k,
                                const Eigen::VectorXd& L);

// --- Student likelihood ---

struct LoglikResult {
    double per_point = 0.0;
    long clamped = 0;
};

// (1/2T) sum [nu ln a^2 - (nu+1) ln(a^2 + r^2)], a^2 = (nu-2) sigma^2.
// sigma^2 values below the clamp floor are lifted to it and counted.
LoglikResult student_loglik(const FeedbackKernel& kernel, std::span<const double> returns,
                            double nu);

// --- one-step / iterated ML over linear kernel parameterizations ---

// Per-series caches for likelihoods that are linear in the active
// parameters: sigma^2(p) = base + features p.
struct MlPanel {
    int q = 0;
    double nu = 6.4;
    OffDiagDesign design;
    FeedbackKernel base_kernel;  // fixed diagonal, leverage and s2
    struct Series {
        Eigen::VectorXd robs;         // returns from t = q
        Eigen::VectorXd base_sigma2;  // sigma^2 under the base kernel
        Eigen::MatrixXd features;     // (T-q) x n_params
    };
    std::vector<Series> series;

    long n_points() const;
};

MlPanel build_ml_panel(const std::vector<std::vector<double>>& returns,
                       const FeedbackKernel& base_kernel, const OffDiagDesign& design,
                       double nu);

double ml_panel_loglik(const MlPanel& panel, const Eigen::VectorXd& params);

struct MLState {
    Eigen::VectorXd params;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;   // symmetrized, averaged over the pool
    double loglik = 0.0;
    double nu = 6.4;
    bool hessian_negative_definite = false;
};

// Central finite differences with steps 1e-4 max(|p|, 0.01) for the gradient
// and 1e-3 max(|p|, 0.01) for the Hessian, averaged over the series pool.
MLState loglik_grad_hessian(const MlPanel& panel, const Eigen::VectorXd& params);

struct OneStepOptions {
    int max_newton_iterations = 5;  // damped refinements after the first step
    double gradient_tol = 1e-6;
};

struct EstimationResult {
    FeedbackKernel kernel;            // base kernel with fitted off-diagonal applied
    Eigen::VectorXd params;           // final parameter vector
    Eigen::VectorXd params_one_step;  // the single Newton step, for reference
    Eigen::VectorXd param_se;         // sqrt(diag((n I)^-1)), I = -mean Hessian
    std::vector<bool> significant;    // |estimate| > param_se
    double loglik_is = 0.0;
    double loglik_oos = 0.0;          // NaN unless filled by a harness
    int n_samplings = 1;
    double aic = 0.0;                 // -2 (loglik - M/n)
    double gradient_norm = 0.0;       // at the reported solution
};

// start at params0 (zero or a GMM estimate); throws if the Hessian is not
// negative definite there, and rejects steps that lower the likelihood.
EstimationResult one_step_ml(const MlPanel& panel, const Eigen::VectorXd& params0,
                             const OneStepOptions& options = {});

// family-restricted ML: same machinery through the family's off-diagonal
// design (diagonal and leverage stay fixed)
EstimationResult restricted_ml(const std::vector<std::vector<double>>& returns,
                               const FeedbackKernel& base_kernel, Family family,
                               const CompositeParts& parts, double nu,
                               const OneStepOptions& options = {});

// --- profile and residual diagnostics ---

struct ProfileFit {
    S2Profile profile;
    double rss = 0.0;
    bool converged = false;
};

// fits s2(q) = 1 - cumsum(k) with the four-parameter profile form
ProfileFit fit_s2_profile(const Eigen::VectorXd& k);

struct NuFit {
    double nu = 0.0;
    bool boundary = false;  // maximum at the search bound (e.g. Gaussian-like input)
};

// one-dimensional MLE over nu in (2, 50] of the complete unit-variance
// Student log-density (the bare Eq.-15 form is flat in the normalization and
// cannot identify nu)
NuFit fit_student_nu(std::span<const double> residuals);

struct ResidualDiagnostics {
    Eigen::VectorXd corr;  // <xi^2_t xi^2_{t-tau}> - 1, tau = 1..max_lag
    Eigen::VectorXd se;
};

ResidualDiagnostics residual_diagnostics(std::span<const double> residuals, int max_lag);

// --- IS/OOS harness ---

enum class EstimatorKind { DiagonalOnly, GmmOffdiag, MlFromZero, MlFromGmm, MlFamily };

struct HarnessEstimator {
    EstimatorKind kind = EstimatorKind::DiagonalOnly;
    Family family = Family::Arch;  // MlFamily only
    CompositeParts parts;
    std::string label;
};

struct HarnessConfig {
    SplitMode mode = SplitMode::RandomHalves;
    int n_samplings = 150;
    std::uint64_t seed = 2024;
    double nu = 6.4;
    int q_off = 10;        // off-diagonal horizon
    int d_max = 0;         // 0: derived from q_off
    double r_cut = 3.0;    // truncation for the GMM stage
};

struct HarnessRow {
    std::string label;
    int n_params = 0;
    double is_mean = 0.0, is_dispersion = 0.0;
    double oos_mean = 0.0, oos_dispersion = 0.0;
    double gap_mean = 0.0, gap_se = 0.0;      // IS - OOS over samplings
    double bias_m_over_2n = 0.0;              // M / 2n
    double aic = 0.0;
    long n_points_is = 0;
};

struct HarnessResult {
    std::vector<HarnessRow> rows;
    // per-sampling IS-OOS gaps for the first estimator, for bias tests
    std::vector<double> gaps;
};

// panel.vol2 may be empty when no estimator needs the GMM stage
HarnessResult is_oos_harness(const std::vector<std::vector<double>>& returns,
                             const std::vector<std::vector<double>>& vol2,
                             const FeedbackKernel& base_kernel,
                             const std::vector<HarnessEstimator>& estimators,
                             const HarnessConfig& config);

}  // namespace qarch
