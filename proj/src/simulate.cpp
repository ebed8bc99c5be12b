#include "qarch/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "qarch/rng.hpp"

namespace qarch {

namespace {

struct SimCore {
    const SimConfig& cfg;
    Rng rng;
    std::vector<double> r;       // full history including burn-in
    double omega_state = 0.0;
    double omega_rho = 0.0;
    double omega_innov_sd = 0.0;
    long clamped = 0;

    explicit SimCore(const SimConfig& config) : cfg(config), rng(config.seed) {
        if (config.T <= 0) throw std::invalid_argument("simulate: T must be positive");
        if (config.residual == ResidualKind::Student && !(config.nu > 2.0))
            throw std::invalid_argument("simulate: Student residuals require nu > 2");
        if (!config.allow_unstable && !(config.kernel.trace() < 1.0))
            throw std::invalid_argument(
                "simulate: kernel is not second-moment stable (trace K >= 1); "
                "set allow_unstable to override");
        if (config.omega) {
            if (config.omega->variance < 0.0)
                throw std::invalid_argument("simulate: omega variance must be nonnegative");
            omega_rho = std::exp(-1.0 / std::max(config.omega->decay_per_day, 1e-9));
            omega_innov_sd = std::sqrt(config.omega->variance * (1.0 - omega_rho * omega_rho));
        }
    }

    long burn() const {
        return cfg.burn_in >= 0 ? std::max<long>(cfg.burn_in, cfg.kernel.q)
                                : std::max<long>(10 * cfg.kernel.q, 1000);
    }

    double draw_residual() {
        return cfg.residual == ResidualKind::Gaussian ? rng.normal()
                                                      : rng.student_unit(cfg.nu);
    }

    // sigma^2 at time index t given history r[0..t-1]
    double sigma2_at(long t) {
        const FeedbackKernel& kernel = cfg.kernel;
        double s = kernel.s2;
        const int q = kernel.q;
        for (int a = 1; a <= q && t - a >= 0; ++a) {
            const double ra = r[t - a];
            s += kernel.L[a - 1] * ra + kernel.K(a - 1, a - 1) * ra * ra;
            for (int b = a + 1; b <= q && t - b >= 0; ++b)
                s += 2.0 * kernel.K(a - 1, b - 1) * ra * r[t - b];
        }
        if (cfg.omega) {
            omega_state = omega_rho * omega_state + omega_innov_sd * rng.normal();
            s += omega_state;
        }
        if (s <= 0.0) {
            if (cfg.policy == NegativeSigma2Policy::RejectAndError)
                throw std::runtime_error("simulate: negative sigma^2 under reject policy");
            s = 1e-12 * std::max(kernel.s2, 1e-300);
            ++clamped;
        }
        if (!std::isfinite(s)) throw std::runtime_error("simulate: sigma^2 overflow");
        return s;
    }
};

// fast path for diagonal kernels (O(q) per step)
bool kernel_is_diagonal(const FeedbackKernel& k) { return k.is_diagonal(0.0); }

double sigma2_diag_at(const FeedbackKernel& kernel, const std::vector<double>& r, long t) {
    double s = kernel.s2;
    const int q = kernel.q;
    for (int a = 1; a <= q && t - a >= 0; ++a) {
        const double ra = r[t - a];
        s += kernel.L[a - 1] * ra + kernel.K(a - 1, a - 1) * ra * ra;
    }
    return s;
}

}  // namespace

PathBundle simulate_qarch(const SimConfig& config) {
    SimCore core(config);
    const long burn = core.burn();
    const long n = config.T + burn;
    const bool diag = kernel_is_diagonal(config.kernel) && !config.omega;
    core.r.resize(n);
    PathBundle out;
    out.returns.resize(config.T);
    out.sigma2.resize(config.T);
    out.residuals.resize(config.T);
    for (long t = 0; t < n; ++t) {
        double s;
        if (diag) {
            s = sigma2_diag_at(config.kernel, core.r, t);
            if (s <= 0.0) {
                if (config.policy == NegativeSigma2Policy::RejectAndError)
                    throw std::runtime_error("simulate: negative sigma^2 under reject policy");
                s = 1e-12 * std::max(config.kernel.s2, 1e-300);
                ++core.clamped;
            }
            if (!std::isfinite(s)) throw std::runtime_error("simulate: sigma^2 overflow");
        } else {
            s = core.sigma2_at(t);
        }
        const double xi = core.draw_residual();
        const double ret = std::sqrt(s) * xi;
        core.r[t] = ret;
        if (t >= burn) {
            out.sigma2[t - burn] = s;
            out.residuals[t - burn] = xi;
            out.returns[t - burn] = ret;
        }
    }
    out.clamped = core.clamped;
    return out;
}

PathBundle simulate_intraday_rs(const SimConfig& config, int bins) {
    if (bins < 4) throw std::invalid_argument("simulate_intraday_rs: need at least 4 bins");
    SimCore core(config);
    const long burn = core.burn();
    const long n = config.T + burn;
    core.r.resize(n);
    PathBundle out;
    out.returns.resize(config.T);
    out.sigma2.resize(config.T);
    out.residuals.resize(config.T);
    out.rs_vol.resize(config.T);
    for (long t = 0; t < n; ++t) {
        const double s = core.sigma2_at(t);
        // intraday log-price path with per-bin variance s/bins
        const double sd = std::sqrt(s / bins);
        double x = 0.0, hi = 0.0, lo = 0.0;
        for (int j = 0; j < bins; ++j) {
            x += sd * core.draw_residual();
            hi = std::max(hi, x);
            lo = std::min(lo, x);
        }
        const double close = x;
        const double rs = hi * (hi - close) + lo * (lo - close);
        core.r[t] = close;
        if (t >= burn) {
            const long i = t - burn;
            out.sigma2[i] = s;
            out.returns[i] = close;
            out.residuals[i] = close / std::sqrt(s);
            out.rs_vol[i] = rs;
        }
    }
    out.clamped = core.clamped;
    return out;
}

InjectedPath simulate_with_injections(const SimConfig& config, double amplitude, long spacing) {
    if (spacing <= config.kernel.q)
        throw std::invalid_argument("simulate_with_injections: spacing must exceed q");
    SimCore core(config);
    const long burn = core.burn();
    const long n = config.T + burn;
    core.r.resize(n);
    InjectedPath out;
    out.bundle.returns.resize(config.T);
    out.bundle.sigma2.resize(config.T);
    out.bundle.residuals.resize(config.T);
    for (long t = 0; t < n; ++t) {
        const double s = core.sigma2_at(t);
        double xi = core.draw_residual();
        if (t >= burn && (t - burn) % spacing == 0 && t > burn) {
            xi = amplitude;
            out.events.push_back(t - burn);
        }
        const double ret = std::sqrt(s) * xi;
        core.r[t] = ret;
        if (t >= burn) {
            out.bundle.sigma2[t - burn] = s;
            out.bundle.residuals[t - burn] = xi;
            out.bundle.returns[t - burn] = ret;
        }
    }
    out.bundle.clamped = core.clamped;
    return out;
}

namespace {

AftershockReport fit_profile(const std::vector<double>& sigma2, const std::vector<long>& events,
                             double threshold, int max_lag, int fit_lo, int fit_hi) {
    if (events.empty()) throw std::runtime_error("aftershock: no events at this threshold");
    if (fit_lo < 1 || fit_hi <= fit_lo || fit_hi > max_lag)
        throw std::invalid_argument("aftershock: bad fit window");
    double base = 0.0;
    for (double s : sigma2) base += s;
    base /= static_cast<double>(sigma2.size());
    std::vector<double> prof(max_lag + 1, 0.0);
    long used = 0;
    for (long e : events) {
        if (e + max_lag >= static_cast<long>(sigma2.size())) continue;
        for (int l = 0; l <= max_lag; ++l) prof[l] += sigma2[e + l];
        ++used;
    }
    if (used == 0) throw std::runtime_error("aftershock: all events too close to the end");
    AftershockReport rep;
    rep.threshold = threshold;
    rep.n_events = used;
    rep.fit_lo = fit_lo;
    rep.fit_hi = fit_hi;
    rep.profile.resize(max_lag + 1);
    for (int l = 0; l <= max_lag; ++l) rep.profile[l] = prof[l] / used - base;
    // log-log slope over [fit_lo, fit_hi]
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int npt = 0;
    for (int l = fit_lo; l <= fit_hi; ++l) {
        const double e = std::max(rep.profile[l], 1e-300);
        const double x = std::log(static_cast<double>(l));
        const double y = std::log(e);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++npt;
    }
    rep.theta = -(npt * sxy - sx * sy) / (npt * sxx - sx * sx);
    return rep;
}

}  // namespace

AftershockReport aftershock_profile(const PathBundle& bundle, double threshold_sigmas,
                                    int max_lag, int fit_lo, int fit_hi) {
    if (bundle.returns.size() < 100000)
        throw std::invalid_argument("aftershock: path too short for meaningful event counts");
    double m = 0.0, v = 0.0;
    for (double r : bundle.returns) m += r;
    m /= static_cast<double>(bundle.returns.size());
    for (double r : bundle.returns) v += (r - m) * (r - m);
    v /= static_cast<double>(bundle.returns.size());
    const double cut = threshold_sigmas * std::sqrt(v);
    std::vector<long> events;
    for (long t = 0; t < static_cast<long>(bundle.returns.size()); ++t)
        if (std::abs(bundle.returns[t]) > cut) events.push_back(t);
    return fit_profile(bundle.sigma2, events, threshold_sigmas, max_lag, fit_lo, fit_hi);
}

AftershockReport aftershock_profile_at(const PathBundle& bundle, const std::vector<long>& events,
                                       int max_lag, int fit_lo, int fit_hi) {
    return fit_profile(bundle.sigma2, events, 0.0, max_lag, fit_lo, fit_hi);
}

}  // namespace qarch
