// Synthetic QARCH paths: returns, true sigma^2, residuals, optional
// Rogers-Satchell intraday surrogate, jump injection for the aftershock
// experiment.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qarch/kernel.hpp"

namespace qarch {

enum class ResidualKind { Gaussian, Student };

enum class NegativeSigma2Policy { ClampToFloor, RejectAndError };

struct OmegaSpec {
    double variance = 0.0;        // stationary variance of omega(t)
    double decay_per_day = 10.0;  // correlation time; C_omega(tau) = var * exp(-|tau|/decay)
};

struct SimConfig {
    FeedbackKernel kernel;
    ResidualKind residual = ResidualKind::Gaussian;
    double nu = 6.4;              // Student only; requires nu > 2
    long T = 0;
    long burn_in = -1;            // -1: max(10 q, 1000)
    std::uint64_t seed = 1;
    std::optional<OmegaSpec> omega;
    NegativeSigma2Policy policy = NegativeSigma2Policy::ClampToFloor;
    bool allow_unstable = false;
};

struct PathBundle {
    std::vector<double> returns;
    std::vector<double> sigma2;
    std::vector<double> residuals;
    std::vector<double> rs_vol;   // empty unless intraday surrogate was used
    long clamped = 0;             // negative-sigma2 clamps applied
};

PathBundle simulate_qarch(const SimConfig& config);

// Each day, `bins` intraday increments with variance sigma2_t/bins are drawn
// from the configured residual law; the daily return is their sum and rs_vol
// holds the Rogers-Satchell estimate from the intraday OHLC.
PathBundle simulate_intraday_rs(const SimConfig& config, int bins);

// Forces the residual to `amplitude` every `spacing` days (after burn-in);
// returns the bundle and the event indices into it.
struct InjectedPath {
    PathBundle bundle;
    std::vector<long> events;
};
InjectedPath simulate_with_injections(const SimConfig& config, double amplitude, long spacing);

struct AftershockReport {
    double theta = 0.0;
    double threshold = 0.0;       // in global sigma units (0 for injected events)
    std::vector<double> profile;  // mean excess sigma^2 at lags 0..max_lag
    long n_events = 0;
    int fit_lo = 2;
    int fit_hi = 50;
};

// Conditions on |r_t| > threshold * std(r) and fits the log-log slope of the
// mean excess volatility profile on [fit_lo, fit_hi].
AftershockReport aftershock_profile(const PathBundle& bundle, double threshold_sigmas,
                                    int max_lag = 60, int fit_lo = 2, int fit_hi = 50);

// Same fit over caller-supplied event indices (injection experiment).
AftershockReport aftershock_profile_at(const PathBundle& bundle, const std::vector<long>& events,
                                       int max_lag = 60, int fit_lo = 2, int fit_hi = 50);

}  // namespace qarch
