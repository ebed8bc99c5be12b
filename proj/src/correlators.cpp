#include "qarch/correlators.hpp"

#include <cmath>
#include <stdexcept>

#include "qarch/fitting.hpp"
#include "qarch/parallel.hpp"
#include "qarch/rng.hpp"

namespace qarch {

namespace {

double mean_of(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc / static_cast<double>(x.size());
}

// <x_t y_{t-lag}> over the full overlapping window
double lag_product(std::span<const double> x, std::span<const double> y, int lag) {
    const long T = static_cast<long>(x.size());
    double acc = 0.0;
    long n = 0;
    if (lag >= 0) {
        for (long t = lag; t < T; ++t) acc += x[t] * y[t - lag], ++n;
    } else {
        for (long t = 0; t < T + lag; ++t) acc += x[t] * y[t - lag], ++n;
    }
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace

CorrelationSet compute_correlations(std::span<const double> returns,
                                    std::optional<std::span<const double>> vol2, int max_lag,
                                    int d_max, int block_len) {
    const long T = static_cast<long>(returns.size());
    if (max_lag < 1) throw std::invalid_argument("compute_correlations: max_lag must be >= 1");
    if (T < 2 * static_cast<long>(max_lag))
        throw std::invalid_argument("compute_correlations: series shorter than 2 max_lag");
    if (vol2 && static_cast<long>(vol2->size()) != T)
        throw std::invalid_argument("compute_correlations: vol2 length mismatch");
    if (d_max < 0 || d_max > max_lag)
        throw std::invalid_argument("compute_correlations: d_max must lie in [0, max_lag]");

    CorrelationSet set;
    set.max_lag = max_lag;
    set.d_max = d_max;
    set.has_tilde = vol2.has_value();
    set.block_len = block_len;

    std::vector<double> r2(T), absr(T);
    for (long t = 0; t < T; ++t) {
        r2[t] = returns[t] * returns[t];
        absr[t] = std::abs(returns[t]);
    }
    set.r2_mean = mean_of(r2);
    set.absr_mean = mean_of(absr);
    std::vector<double> r2c(T), absc(T);
    for (long t = 0; t < T; ++t) {
        r2c[t] = r2[t] - set.r2_mean;
        absc[t] = absr[t] - set.absr_mean;
    }
    std::vector<double> v2c;
    if (vol2) {
        set.vol2_mean = mean_of(*vol2);
        v2c.resize(T);
        for (long t = 0; t < T; ++t) v2c[t] = (*vol2)[t] - set.vol2_mean;
    }

    const int nl = 2 * max_lag + 1;
    set.c1.setZero(nl);
    set.c2.setZero(nl);
    set.ca.setZero(nl);
    set.lev.setZero(nl);
    set.lev_a.setZero(nl);
    set.n_obs.setZero(nl);
    set.c2_tilde.setZero(nl);
    set.ca_tilde.setZero(nl);
    set.lev_tilde.setZero(nl);

    parallel_for(nl, [&](std::size_t li) {
        const int lag = static_cast<int>(li) - max_lag;
        set.c1[li] = lag_product(returns, returns, lag);
        set.c2[li] = lag_product(r2c, r2, lag);
        set.ca[li] = lag_product(r2c, absr, lag);
        set.lev[li] = lag_product(r2c, returns, lag);
        set.lev_a[li] = lag_product(absr, returns, lag);
        set.n_obs[li] = static_cast<double>(T - std::abs(lag));
        if (vol2) {
            set.c2_tilde[li] = lag_product(v2c, r2, lag);
            set.ca_tilde[li] = lag_product(v2c, absr, lag);
            set.lev_tilde[li] = lag_product(v2c, returns, lag);
        }
    });

    const int nd = d_max + 1;
    set.d.setZero(nd, nd);
    set.d_a.setZero(nd, nd);
    if (vol2) set.d_tilde.setZero(nd, nd);
    parallel_for(nd, [&](std::size_t ai) {
        const int a = static_cast<int>(ai);
        for (int b = a; b < nd; ++b) {
            double acc_r2 = 0.0, acc_abs = 0.0, acc_v = 0.0;
            long n = 0;
            for (long t = b; t < T; ++t) {
                const double prod = returns[t - a] * returns[t - b];
                acc_r2 += r2c[t] * prod;
                acc_abs += absc[t] * prod;
                if (vol2) acc_v += v2c[t] * prod;
                ++n;
            }
            const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
            set.d(a, b) = set.d(b, a) = acc_r2 * inv;
            set.d_a(a, b) = set.d_a(b, a) = acc_abs * inv;
            if (vol2) set.d_tilde(a, b) = set.d_tilde(b, a) = acc_v * inv;
        }
    });

    if (vol2 && block_len > 0) {
        // circular partition into equal blocks; per-block sums of the
        // centered c2_tilde products at every signed lag
        const long n_blocks = std::max<long>(1, T / block_len);
        set.c2t_block_sums.setZero(n_blocks, nl);
        set.c2t_block_counts.setZero(n_blocks);
        for (long t = 0; t < T; ++t) {
            const long b = std::min(t / block_len, n_blocks - 1);
            set.c2t_block_counts[b] += 1.0;
            for (int li = 0; li < nl; ++li) {
                const int lag = li - max_lag;
                const long u = t - lag;
                // circular wrap keeps every block the same effective length
                const long uw = (u % T + T) % T;
                set.c2t_block_sums(b, li) += v2c[t] * r2[uw];
            }
        }
    }
    return set;
}

CorrelationSet pool_correlations(const std::vector<CorrelationSet>& sets) {
    if (sets.empty()) throw std::invalid_argument("pool_correlations: empty pool");
    CorrelationSet out = sets[0];
    const double w = 1.0 / static_cast<double>(sets.size());
    auto blend = [&](Eigen::VectorXd CorrelationSet::*field) {
        Eigen::VectorXd acc = (out.*field) * w;
        for (std::size_t i = 1; i < sets.size(); ++i) acc += (sets[i].*field) * w;
        out.*field = acc;
    };
    for (std::size_t i = 1; i < sets.size(); ++i) {
        if (sets[i].max_lag != out.max_lag || sets[i].d_max != out.d_max ||
            sets[i].has_tilde != out.has_tilde)
            throw std::invalid_argument("pool_correlations: incompatible sets");
    }
    blend(&CorrelationSet::c1);
    blend(&CorrelationSet::c2);
    blend(&CorrelationSet::c2_tilde);
    blend(&CorrelationSet::ca);
    blend(&CorrelationSet::ca_tilde);
    blend(&CorrelationSet::lev);
    blend(&CorrelationSet::lev_tilde);
    blend(&CorrelationSet::lev_a);
    Eigen::VectorXd nobs = out.n_obs;
    for (std::size_t i = 1; i < sets.size(); ++i) nobs += sets[i].n_obs;
    out.n_obs = nobs;
    auto blend_m = [&](Eigen::MatrixXd CorrelationSet::*field) {
        Eigen::MatrixXd acc = (out.*field) * w;
        for (std::size_t i = 1; i < sets.size(); ++i) acc += (sets[i].*field) * w;
        out.*field = acc;
    };
    blend_m(&CorrelationSet::d);
    blend_m(&CorrelationSet::d_a);
    if (out.has_tilde) blend_m(&CorrelationSet::d_tilde);
    out.r2_mean = 0.0;
    out.absr_mean = 0.0;
    out.vol2_mean = 0.0;
    for (const auto& s : sets) {
        out.r2_mean += s.r2_mean * w;
        out.absr_mean += s.absr_mean * w;
        out.vol2_mean += s.vol2_mean * w;
    }
    // stack block sums so the bootstrap resamples across the whole pool
    if (out.has_tilde && out.c2t_block_sums.size() > 0) {
        long rows = 0;
        for (const auto& s : sets) rows += s.c2t_block_sums.rows();
        Eigen::MatrixXd sums(rows, out.c2t_block_sums.cols());
        Eigen::VectorXd counts(rows);
        long at = 0;
        for (const auto& s : sets) {
            sums.middleRows(at, s.c2t_block_sums.rows()) = s.c2t_block_sums;
            counts.segment(at, s.c2t_block_counts.size()) = s.c2t_block_counts;
            at += s.c2t_block_sums.rows();
        }
        out.c2t_block_sums = std::move(sums);
        out.c2t_block_counts = std::move(counts);
    }
    return out;
}

TRIReport tri_delta(const CorrelationSet& corr, int n_boot, std::uint64_t seed) {
    if (!corr.has_tilde)
        throw std::invalid_argument("tri_delta: c2_tilde branch missing (no vol2 provided)");
    const int L = corr.max_lag;
    TRIReport rep;
    rep.delta.setZero(L + 1);
    for (int tau = 1; tau <= L; ++tau)
        rep.delta[tau] =
            rep.delta[tau - 1] + (corr.at(corr.c2_tilde, tau) - corr.at(corr.c2_tilde, -tau));
    rep.se.setZero(L + 1);
    const long nb = corr.c2t_block_sums.rows();
    if (nb >= 2 && n_boot > 0) {
        Rng rng(seed);
        Eigen::MatrixXd deltas(n_boot, L + 1);
        for (int b = 0; b < n_boot; ++b) {
            Eigen::RowVectorXd sums = Eigen::RowVectorXd::Zero(2 * L + 1);
            double count = 0.0;
            for (long k = 0; k < nb; ++k) {
                const long pick = static_cast<long>(rng.below(static_cast<std::uint64_t>(nb)));
                sums += corr.c2t_block_sums.row(pick);
                count += corr.c2t_block_counts[pick];
            }
            double acc = 0.0;
            deltas(b, 0) = 0.0;
            for (int tau = 1; tau <= L; ++tau) {
                acc += (sums[L + tau] - sums[L - tau]) / count;
                deltas(b, tau) = acc;
            }
        }
        for (int tau = 0; tau <= L; ++tau) {
            const double m = deltas.col(tau).mean();
            rep.se[tau] = std::sqrt((deltas.col(tau).array() - m).square().sum() /
                                    static_cast<double>(n_boot - 1));
        }
    }
    return rep;
}

Eigen::VectorXd leverage_tri_contribution(const Eigen::VectorXd& L, const CorrelationSet& corr,
                                          int tau_max) {
    const int qL = static_cast<int>(L.size());
    if (qL + tau_max > corr.max_lag)
        throw std::invalid_argument(
            "leverage_tri_contribution: correlation grid too short for L and tau_max");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(tau_max + 1);
    for (int tau = 1; tau <= tau_max; ++tau) {
        double acc = 0.0;
        for (int tp = 1; tp <= std::min(tau, qL); ++tp)
            acc += L[tp - 1] * (corr.at(corr.lev, tp - tau) - corr.at(corr.lev, tp + tau));
        out[tau] = acc;
    }
    return out;
}

double LeverageFit::operator()(double tau) const {
    return -a * std::exp(-tau / b) - c * std::exp(-tau / d);
}

double CaFit::operator()(double tau) const {
    return amplitude * std::pow(tau, -beta) * std::exp(-tau / tau0);
}

LeverageFit fit_leverage(std::span<const double> lev_pos) {
    const int n = static_cast<int>(lev_pos.size());
    if (n < 4) throw std::invalid_argument("fit_leverage: need at least 4 lags");
    ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (int i = 0; i < n; ++i) {
            const double tau = i + 1.0;
            r[i] = lev_pos[i] + p[0] * std::exp(-tau / p[1]) + p[2] * std::exp(-tau / p[3]);
        }
    };
    Eigen::VectorXd p0(4), lo(4), hi(4);
    p0 << 0.01, 300.0, 0.03, 15.0;
    lo << 0.0, 1.0, 0.0, 1.0;
    hi << 10.0, 1e4, 10.0, 1e4;
    LmResult res = fit_with_restarts(fn, n, p0, lo, hi);
    LeverageFit fit;
    fit.a = res.params[0];
    fit.b = res.params[1];
    fit.c = res.params[2];
    fit.d = res.params[3];
    fit.rss = res.rss;
    if (fit.b < fit.d) {  // report the slow scale first
        std::swap(fit.a, fit.c);
        std::swap(fit.b, fit.d);
    }
    return fit;
}

CaFit fit_ca(std::span<const double> ca_pos) {
    const int n = static_cast<int>(ca_pos.size());
    if (n < 3) throw std::invalid_argument("fit_ca: need at least 3 lags");
    ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (int i = 0; i < n; ++i) {
            const double tau = i + 1.0;
            r[i] = ca_pos[i] - p[0] * std::pow(tau, -p[1]) * std::exp(-tau / p[2]);
        }
    };
    Eigen::VectorXd p0(3), lo(3), hi(3);
    p0 << 0.1, 0.15, 300.0;
    lo << 0.0, -0.5, 1.0;
    hi << 10.0, 3.0, 1e6;
    LmResult res = fit_with_restarts(fn, n, p0, lo, hi);
    CaFit fit;
    fit.amplitude = res.params[0];
    fit.beta = res.params[1];
    fit.tau0 = res.params[2];
    fit.rss = res.rss;
    return fit;
}

std::vector<double> truncate_returns(std::span<const double> r, double r_cut) {
    if (!(r_cut > 0.0)) throw std::invalid_argument("truncate_returns: r_cut must be positive");
    std::vector<double> out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = r_cut * std::tanh(r[i] / r_cut);
    return out;
}

ExponentFit measure_c2_exponent(std::span<const double> c2_pos, int lo, int hi,
                                double residual_threshold) {
    if (lo < 1 || hi <= lo || hi > static_cast<int>(c2_pos.size()))
        throw std::invalid_argument("measure_c2_exponent: bad window");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int t = lo; t <= hi; ++t) {
        const double v = c2_pos[t - 1];
        if (!(v > 0.0))
            throw std::invalid_argument("measure_c2_exponent: nonpositive value in window");
        const double x = std::log(static_cast<double>(t));
        const double y = std::log(v);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (int t = lo; t <= hi; ++t) {
        const double x = std::log(static_cast<double>(t));
        const double e = std::log(c2_pos[t - 1]) - (icept + slope * x);
        rss += e * e;
    }
    ExponentFit fit;
    fit.beta = -slope;
    fit.rel_residual = std::sqrt(rss / n);
    fit.ok = fit.rel_residual < residual_threshold;
    return fit;
}

}  // namespace qarch
