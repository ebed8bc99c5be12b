// Empirical correlation functions (2-, 3- and 4-point), the fitted shapes
// used by the reduced GMM, and the time-reversal asymmetry statistics.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qarch {

// All 1-D functions are stored on signed lags -max_lag..max_lag (index
// lag + max_lag). The D matrices are stored on lags 0..d_max. Every lag
// uses its full overlapping window with divisor = number of valid terms.
struct CorrelationSet {
    int max_lag = 0;
    int d_max = 0;
    bool has_tilde = false;

    double r2_mean = 0.0;
    double absr_mean = 0.0;
    double vol2_mean = 0.0;

    Eigen::VectorXd c1;         // <r_t r_{t-l}>
    Eigen::VectorXd c2;         // <(r^2_t - <r^2>) r^2_{t-l}>
    Eigen::VectorXd c2_tilde;   // <(vol2_t - <vol2>) r^2_{t-l}>
    Eigen::VectorXd ca;         // <(r^2_t - <r^2>) |r_{t-l}|>
    Eigen::VectorXd ca_tilde;
    Eigen::VectorXd lev;        // <(r^2_t - <r^2>) r_{t-l}>
    Eigen::VectorXd lev_tilde;
    Eigen::VectorXd lev_a;      // <|r_t| r_{t-l}>
    Eigen::VectorXd n_obs;

    Eigen::MatrixXd d;          // <(r^2_t - <r^2>) r_{t-a} r_{t-b}>
    Eigen::MatrixXd d_tilde;
    Eigen::MatrixXd d_a;        // <(|r_t| - <|r|>) r_{t-a} r_{t-b}>

    // per-block partial sums of the c2_tilde products (TRI bootstrap)
    int block_len = 0;
    Eigen::MatrixXd c2t_block_sums;    // n_blocks x (2 max_lag + 1)
    Eigen::VectorXd c2t_block_counts;  // sample count per block

    double at(const Eigen::VectorXd& f, int lag) const {
        if (std::abs(lag) > max_lag) throw std::out_of_range("correlation lag out of range");
        return f[lag + max_lag];
    }
};

CorrelationSet compute_correlations(std::span<const double> returns,
                                    std::optional<std::span<const double>> vol2, int max_lag,
                                    int d_max, int block_len = 50);

// equal-weight panel pooling; block sums are concatenated for the bootstrap
CorrelationSet pool_correlations(const std::vector<CorrelationSet>& sets);

struct TRIReport {
    Eigen::VectorXd delta;          // Delta(0..max_lag), delta[0] = 0
    Eigen::VectorXd se;             // bootstrap standard errors
    Eigen::VectorXd leverage_part;  // filled by the caller when available
};

// Delta(tau) = sum_{t'=1..tau} [c2_tilde(t') - c2_tilde(-t')] with circular
// block-bootstrap errors over the stored block sums.
TRIReport tri_delta(const CorrelationSet& corr, int n_boot = 200, std::uint64_t seed = 777);

// sum_{t'=1..tau} L(t') [lev(t'-tau) - lev(t'+tau)] for tau = 0..tau_max
Eigen::VectorXd leverage_tri_contribution(const Eigen::VectorXd& L,
                                          const CorrelationSet& corr, int tau_max);

struct LeverageFit {
    double a = 0.0, b = 1.0, c = 0.0, d = 1.0;  // -a e^{-t/b} - c e^{-t/d}
    double rss = 0.0;
    double operator()(double tau) const;
};

struct CaFit {
    double amplitude = 0.0, beta = 0.0, tau0 = 1.0;  // B t^-beta e^{-t/tau0}
    double rss = 0.0;
    double operator()(double tau) const;
};

LeverageFit fit_leverage(std::span<const double> lev_pos);  // values at tau = 1,2,...
CaFit fit_ca(std::span<const double> ca_pos);

std::vector<double> truncate_returns(std::span<const double> r, double r_cut = 3.0);

struct ExponentFit {
    double beta = 0.0;
    double rel_residual = 0.0;  // rms log-residual over the window
    bool ok = false;            // false when the power-law fit is poor
};

// log-log slope of c2_pos (values at tau = 1,2,...) over lags [lo, hi]
ExponentFit measure_c2_exponent(std::span<const double> c2_pos, int lo, int hi,
                                double residual_threshold = 0.35);

}  // namespace qarch
