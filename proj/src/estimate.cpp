#include "qarch/estimate.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qarch/fitting.hpp"
#include "qarch/parallel.hpp"

namespace qarch {

namespace {

constexpr double kSigma2FloorScale = 1e-12;

double clamp_floor(const FeedbackKernel& kernel) {
    return kSigma2FloorScale * std::max(kernel.s2, 1e-300);
}

}  // namespace

GmmDiagonal gmm_diagonal(const CorrelationSet& corr, int q, bool use_fitted_inputs) {
    if (q < 1 || q > corr.max_lag - 1)
        throw std::invalid_argument("gmm_diagonal: q must lie within the correlation grid");
    const bool tilde = corr.has_tilde;

    // working copies of the positive-lag shapes, optionally smoothed by fits
    Eigen::VectorXd lev = corr.lev, lev_t = tilde ? corr.lev_tilde : corr.lev;
    Eigen::VectorXd ca = corr.ca, ca_t = tilde ? corr.ca_tilde : corr.ca;
    if (use_fitted_inputs) {
        std::vector<double> lp(q + q), cp(q + q);
        for (int t = 1; t <= 2 * q && t <= corr.max_lag; ++t) {
            lp[t - 1] = corr.at(corr.lev, t);
            cp[t - 1] = corr.at(corr.ca, t);
        }
        const int nfit = std::min(2 * q, corr.max_lag);
        LeverageFit lf = fit_leverage(std::span<const double>(lp.data(), nfit));
        CaFit cf = fit_ca(std::span<const double>(cp.data(), nfit));
        for (int t = 1; t <= corr.max_lag; ++t) {
            lev[t + corr.max_lag] = lf(t);
            ca[t + corr.max_lag] = cf(t);
            if (!tilde) {
                lev_t[t + corr.max_lag] = lf(t);
                ca_t[t + corr.max_lag] = cf(t);
            }
        }
        if (tilde) {
            for (int t = 1; t <= 2 * q && t <= corr.max_lag; ++t) {
                lp[t - 1] = corr.at(corr.lev_tilde, t);
                cp[t - 1] = corr.at(corr.ca_tilde, t);
            }
            LeverageFit lft = fit_leverage(std::span<const double>(lp.data(), nfit));
            CaFit cft = fit_ca(std::span<const double>(cp.data(), nfit));
            for (int t = 1; t <= corr.max_lag; ++t) {
                lev_t[t + corr.max_lag] = lft(t);
                ca_t[t + corr.max_lag] = cft(t);
            }
        }
    }
    auto at = [&](const Eigen::VectorXd& f, int lag) { return f[lag + corr.max_lag]; };

    // unknown layout: [s2, L(1..q), k(1..q)]
    const int n = 2 * q + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    // normalization: s2 + sum k = <sigma^2> = 1 (standardized panels)
    A(0, 0) = 1.0;
    for (int t = 1; t <= q; ++t) A(0, q + t) = 1.0;
    b[0] = 1.0;
    // leverage equations
    for (int t = 1; t <= q; ++t) {
        const int row = t;
        A(row, t) += 1.0;
        for (int tp = 1; tp <= q; ++tp) {
            if (tp != t) A(row, tp) += at(corr.c1, t - tp);
            A(row, q + tp) += at(lev, t - tp);
        }
        b[row] = at(lev_t, t);
    }
    // amplitude equations
    for (int t = 1; t <= q; ++t) {
        const int row = q + t;
        for (int tp = 1; tp <= q; ++tp) {
            A(row, tp) += at(corr.lev_a, tp - t);
            A(row, q + tp) += at(ca, t - tp);
        }
        b[row] = at(ca_t, t);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rcond() < 1e-13) throw std::runtime_error("gmm_diagonal: singular system");
    Eigen::VectorXd x = lu.solve(b);
    GmmDiagonal out;
    out.s2 = x[0];
    out.L = x.segment(1, q);
    out.k = x.segment(q + 1, q);
    out.trace_exceeds_one = out.k.sum() >= 1.0;
    return out;
}

Eigen::MatrixXd gmm_offdiagonal(const CorrelationSet& corr, int q, const Eigen::VectorXd& k,
                                const Eigen::VectorXd& L) {
    if (!corr.has_tilde)
        throw std::invalid_argument("gmm_offdiagonal: needs the vol2 (tilde) branch");
    if (corr.d_max < q)
        throw std::invalid_argument("gmm_offdiagonal: D matrices shorter than q");
    if (k.size() < q || L.size() < q)
        throw std::invalid_argument("gmm_offdiagonal: diagonal inputs shorter than q");
    auto c1 = [&](int lag) { return corr.at(corr.c1, lag); };
    auto levat = [&](int lag) { return corr.at(corr.lev, lag); };
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    for (int t2 = 1; t2 < q; ++t2) {
        const int nn = q - t2;
        Eigen::MatrixXd A(nn, nn);
        Eigen::VectorXd b(nn);
        for (int i = 0; i < nn; ++i) {
            const int t1 = t2 + 1 + i;
            double rhs = corr.d_tilde(t1, t2);
            rhs -= L[t2 - 1] * levat(t1 - t2) + L[t1 - 1] * levat(t2 - t1);
            for (int tp = 1; tp <= t2; ++tp) rhs -= k[tp - 1] * corr.d(t1 - tp, t2 - tp);
            for (int j = 0; j < nn; ++j) {
                const int tp = t2 + 1 + j;
                A(i, j) = 2.0 * (corr.d(t1 - t2, tp - t2) + c1(t1 - tp) - c1(tp - t2) * c1(t1 - t2));
            }
            b[i] = rhs;
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        if (lu.rcond() < 1e-13)
            throw std::runtime_error("gmm_offdiagonal: singular system in column " +
                                     std::to_string(t2));
        Eigen::VectorXd x = lu.solve(b);
        for (int i = 0; i < nn; ++i) {
            const int t1 = t2 + 1 + i;
            K(t1 - 1, t2 - 1) = K(t2 - 1, t1 - 1) = x[i];
        }
    }
    return K;
}

LoglikResult student_loglik(const FeedbackKernel& kernel, std::span<const double> returns,
                            double nu) {
    if (!(nu > 2.0)) throw std::invalid_argument("student_loglik: nu must exceed 2");
    const int q = kernel.q;
    const long T = static_cast<long>(returns.size());
    if (T <= q) throw std::invalid_argument("student_loglik: series shorter than horizon");
    const double floor = clamp_floor(kernel);
    if (!(floor > 0.0)) throw std::invalid_argument("student_loglik: nonpositive clamp floor");
    LoglikResult res;
    double acc = 0.0;
    std::vector<double> window(q);
    for (long t = q; t < T; ++t) {
        for (int a = 0; a < q; ++a) window[a] = returns[t - 1 - a];
        double s = sigma2(kernel, window);
        if (s < floor) {
            s = floor;
            ++res.clamped;
        }
        const double a2 = (nu - 2.0) * s;
        const double r = returns[t];
        acc += nu * std::log(a2) - (nu + 1.0) * std::log(a2 + r * r);
    }
    res.per_point = acc / (2.0 * static_cast<double>(T - q));
    return res;
}

long MlPanel::n_points() const {
    long n = 0;
    for (const auto& s : series) n += s.robs.size();
    return n;
}

MlPanel build_ml_panel(const std::vector<std::vector<double>>& returns,
                       const FeedbackKernel& base_kernel, const OffDiagDesign& design,
                       double nu) {
    if (design.q != base_kernel.q)
        throw std::invalid_argument("build_ml_panel: design and kernel horizons differ");
    if (!(nu > 2.0)) throw std::invalid_argument("build_ml_panel: nu must exceed 2");
    MlPanel panel;
    panel.q = base_kernel.q;
    panel.nu = nu;
    panel.design = design;
    panel.base_kernel = base_kernel;
    const int q = base_kernel.q;
    const int M = design.n_params();
    for (const auto& r : returns) {
        const long T = static_cast<long>(r.size());
        if (T <= 2 * q) throw std::invalid_argument("build_ml_panel: series too short");
        MlPanel::Series s;
        s.robs.resize(T - q);
        s.base_sigma2.resize(T - q);
        s.features.setZero(T - q, M);
        std::vector<double> window(q);
        // raw off-diagonal pair features 2 r_{t-a} r_{t-b}, combined through
        // the design so sigma^2(p) = base + features p stays exact
        Eigen::VectorXd pair_vals(n_offdiag_entries(q));
        for (long t = q; t < T; ++t) {
            for (int a = 0; a < q; ++a) window[a] = r[t - 1 - a];
            s.robs[t - q] = r[t];
            s.base_sigma2[t - q] = sigma2(base_kernel, window);
            int e = 0;
            for (int a = 1; a <= q; ++a)
                for (int b = a + 1; b <= q; ++b, ++e)
                    pair_vals[e] = 2.0 * window[a - 1] * window[b - 1];
            if (M > 0) s.features.row(t - q) = (design.coef * pair_vals).transpose();
        }
        panel.series.push_back(std::move(s));
    }
    return panel;
}

namespace {

double series_loglik(const MlPanel& panel, const MlPanel::Series& s,
                     const Eigen::VectorXd& sigma2_vec) {
    const double nu = panel.nu;
    const double floor = clamp_floor(panel.base_kernel);
    double acc = 0.0;
    const long n = sigma2_vec.size();
    for (long t = 0; t < n; ++t) {
        const double sv = sigma2_vec[t] < floor ? floor : sigma2_vec[t];
        const double a2 = (nu - 2.0) * sv;
        const double r = s.robs[t];
        acc += nu * std::log(a2) - (nu + 1.0) * std::log(a2 + r * r);
    }
    return acc / (2.0 * static_cast<double>(n));
}

}  // namespace

double ml_panel_loglik(const MlPanel& panel, const Eigen::VectorXd& params) {
    std::vector<double> vals(panel.series.size());
    parallel_for(panel.series.size(), [&](std::size_t i) {
        const auto& s = panel.series[i];
        Eigen::VectorXd sig = s.base_sigma2;
        if (params.size() > 0) sig += s.features * params;
        vals[i] = series_loglik(panel, s, sig);
    });
    double acc = 0.0;
    for (double v : vals) acc += v;
    return acc / static_cast<double>(vals.size());
}

MLState loglik_grad_hessian(const MlPanel& panel, const Eigen::VectorXd& params) {
    const int M = panel.design.n_params();
    if (params.size() != M) throw std::invalid_argument("loglik_grad_hessian: size mismatch");
    MLState state;
    state.params = params;
    state.nu = panel.nu;
    state.gradient.setZero(M);
    state.hessian.setZero(M, M);

    Eigen::VectorXd hg(M), hH(M);
    for (int i = 0; i < M; ++i) {
        hg[i] = 1e-4 * std::max(std::abs(params[i]), 0.01);
        hH[i] = 1e-3 * std::max(std::abs(params[i]), 0.01);
    }

    const std::size_t ns = panel.series.size();
    std::vector<Eigen::VectorXd> grads(ns);
    std::vector<Eigen::MatrixXd> hessians(ns);
    std::vector<double> logliks(ns);
    parallel_for(ns, [&](std::size_t si) {
        const auto& s = panel.series[si];
        Eigen::VectorXd cur = s.base_sigma2;
        if (M > 0) cur += s.features * params;
        logliks[si] = series_loglik(panel, s, cur);
        Eigen::VectorXd g(M);
        Eigen::MatrixXd H(M, M);
        Eigen::VectorXd probe = cur;
        auto eval_at = [&](double hi_, int i, double hj_, int j) {
            probe = cur;
            if (i >= 0) probe += hi_ * s.features.col(i);
            if (j >= 0) probe += hj_ * s.features.col(j);
            return series_loglik(panel, s, probe);
        };
        for (int i = 0; i < M; ++i)
            g[i] = (eval_at(hg[i], i, 0.0, -1) - eval_at(-hg[i], i, 0.0, -1)) / (2.0 * hg[i]);
        const double f0 = logliks[si];
        for (int i = 0; i < M; ++i) {
            const double fp = eval_at(hH[i], i, 0.0, -1);
            const double fm = eval_at(-hH[i], i, 0.0, -1);
            H(i, i) = (fp - 2.0 * f0 + fm) / (hH[i] * hH[i]);
            for (int j = i + 1; j < M; ++j) {
                const double fpp = eval_at(hH[i], i, hH[j], j);
                const double fpm = eval_at(hH[i], i, -hH[j], j);
                const double fmp = eval_at(-hH[i], i, hH[j], j);
                const double fmm = eval_at(-hH[i], i, -hH[j], j);
                H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hH[i] * hH[j]);
            }
        }
        grads[si] = std::move(g);
        hessians[si] = std::move(H);
    });
    double ll = 0.0;
    for (std::size_t si = 0; si < ns; ++si) {
        state.gradient += grads[si];
        state.hessian += hessians[si];
        ll += logliks[si];
    }
    const double inv = 1.0 / static_cast<double>(ns);
    state.gradient *= inv;
    state.hessian *= inv;
    state.hessian = 0.5 * (state.hessian + state.hessian.transpose()).eval();
    state.loglik = ll * inv;
    if (M > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(state.hessian, Eigen::EigenvaluesOnly);
        state.hessian_negative_definite = es.eigenvalues().maxCoeff() < 0.0;
    } else {
        state.hessian_negative_definite = true;
    }
    return state;
}

namespace {

FeedbackKernel apply_offdiag(const FeedbackKernel& base, const OffDiagDesign& design,
                             const Eigen::VectorXd& params) {
    Eigen::MatrixXd K = base.K;
    if (params.size() > 0) K += design.apply(params);
    return make_kernel(base.q, base.s2, base.L, std::move(K));
}

}  // namespace

EstimationResult one_step_ml(const MlPanel& panel, const Eigen::VectorXd& params0,
                             const OneStepOptions& options) {
    const int M = panel.design.n_params();
    if (params0.size() != M) throw std::invalid_argument("one_step_ml: start size mismatch");
    MLState st = loglik_grad_hessian(panel, params0);
    if (!st.hessian_negative_definite)
        throw std::runtime_error(
            "one_step_ml: Hessian at the starting point is not negative definite; the one-step "
            "update is not applicable here");
    EstimationResult result;
    result.n_samplings = 1;
    Eigen::VectorXd p = params0;
    Eigen::VectorXd step =
        M > 0 ? Eigen::VectorXd(-st.hessian.ldlt().solve(st.gradient)) : Eigen::VectorXd(p);
    result.params_one_step = params0 + step;

    double ll_prev = st.loglik;
    // first (undamped would be the paper's one-step) plus damped refinements
    for (int it = 0; it < std::max(1, options.max_newton_iterations); ++it) {
        Eigen::VectorXd trial = p + step;
        double ll_trial = ml_panel_loglik(panel, trial);
        double damp = 1.0;
        while (ll_trial < ll_prev && damp > 1.0 / 64.0) {
            damp *= 0.5;
            trial = p + damp * step;
            ll_trial = ml_panel_loglik(panel, trial);
        }
        if (ll_trial < ll_prev) {
            if (it == 0)
                throw std::runtime_error("one_step_ml: likelihood decreased at the first step");
            break;
        }
        p = trial;
        ll_prev = ll_trial;
        MLState cur = loglik_grad_hessian(panel, p);
        if (cur.gradient.size() == 0 || cur.gradient.norm() < options.gradient_tol) {
            st = std::move(cur);
            break;
        }
        if (!cur.hessian_negative_definite) {
            st = std::move(cur);
            break;
        }
        step = -cur.hessian.ldlt().solve(cur.gradient);
        st = std::move(cur);
    }

    result.params = p;
    result.loglik_is = ll_prev;
    result.loglik_oos = std::numeric_limits<double>::quiet_NaN();
    result.gradient_norm = M > 0 ? st.gradient.norm() : 0.0;
    result.kernel = apply_offdiag(panel.base_kernel, panel.design, p);
    const long n = panel.n_points();
    if (M > 0) {
        Eigen::MatrixXd info = -st.hessian * static_cast<double>(n);
        Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(M, M));
        result.param_se.resize(M);
        result.significant.resize(M);
        for (int i = 0; i < M; ++i) {
            result.param_se[i] = std::sqrt(std::max(cov(i, i), 0.0));
            result.significant[i] = std::abs(p[i]) > result.param_se[i];
        }
    }
    result.aic = -2.0 * (result.loglik_is - static_cast<double>(M) / static_cast<double>(n));
    return result;
}

EstimationResult restricted_ml(const std::vector<std::vector<double>>& returns,
                               const FeedbackKernel& base_kernel, Family family,
                               const CompositeParts& parts, double nu,
                               const OneStepOptions& options) {
    OffDiagDesign design = offdiag_design(family, base_kernel.q, parts);
    MlPanel panel = build_ml_panel(returns, base_kernel, design, nu);
    return one_step_ml(panel, Eigen::VectorXd::Zero(design.n_params()), options);
}

ProfileFit fit_s2_profile(const Eigen::VectorXd& k) {
    const int q = static_cast<int>(k.size());
    if (q < 8) throw std::invalid_argument("fit_s2_profile: need at least 8 lags");
    Eigen::VectorXd s2q(q);
    double acc = 0.0;
    for (int t = 1; t <= q; ++t) {
        acc += k[t - 1];
        s2q[t - 1] = 1.0 - acc;
    }
    ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const S2Profile prof{p[0], p[1], p[2], p[3]};
        for (int t = 1; t <= q; ++t) r[t - 1] = s2q[t - 1] - prof(static_cast<double>(t));
    };
    Eigen::VectorXd p0(4), lo(4), hi(4);
    p0 << std::max(0.05, s2q[q - 1]), 1.3, 0.1, 60.0;
    lo << 0.0, 1.0001, 0.0, 1.0;
    hi << 1.0, 5.0, 10.0, 1e5;
    LmResult res = fit_with_restarts(fn, q, p0, lo, hi);
    ProfileFit fit;
    fit.profile = {res.params[0], res.params[1], res.params[2], res.params[3]};
    fit.rss = res.rss;
    fit.converged = res.converged;
    return fit;
}

NuFit fit_student_nu(std::span<const double> residuals) {
    if (residuals.size() < 100) throw std::invalid_argument("fit_student_nu: too few residuals");
    auto mean_logdensity = [&](double nu) {
        // complete unit-variance Student-t log density
        const double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                         0.5 * std::log((nu - 2.0) * 3.14159265358979323846);
        double acc = 0.0;
        for (double x : residuals) acc += std::log1p(x * x / (nu - 2.0));
        return c - 0.5 * (nu + 1.0) * acc / static_cast<double>(residuals.size());
    };
    double lo = 2.05, hi = 50.0;
    const double gr = 0.61803398874989484820;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = mean_logdensity(x1), f2 = mean_logdensity(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = mean_logdensity(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = mean_logdensity(x1);
        }
    }
    NuFit fit;
    fit.nu = 0.5 * (lo + hi);
    fit.boundary = fit.nu > 49.0 || fit.nu < 2.1;
    return fit;
}

ResidualDiagnostics residual_diagnostics(std::span<const double> residuals, int max_lag) {
    const long T = static_cast<long>(residuals.size());
    if (T < 2 * static_cast<long>(max_lag))
        throw std::invalid_argument("residual_diagnostics: series too short");
    ResidualDiagnostics diag;
    diag.corr.setZero(max_lag);
    diag.se.setZero(max_lag);
    std::vector<double> x2(T);
    for (long t = 0; t < T; ++t) x2[t] = residuals[t] * residuals[t];
    for (int lag = 1; lag <= max_lag; ++lag) {
        double m = 0.0;
        long n = 0;
        for (long t = lag; t < T; ++t) m += x2[t] * x2[t - lag], ++n;
        m /= static_cast<double>(n);
        double v = 0.0;
        for (long t = lag; t < T; ++t) {
            const double e = x2[t] * x2[t - lag] - m;
            v += e * e;
        }
        diag.corr[lag - 1] = m - 1.0;
        diag.se[lag - 1] = std::sqrt(v / static_cast<double>(n) / static_cast<double>(n - 1));
    }
    return diag;
}

namespace {

double eval_loglik_slice(const FeedbackKernel& kernel,
                         const std::vector<std::vector<double>>& returns,
                         const std::vector<int>& series, long begin, long end, double nu) {
    double acc = 0.0;
    long npts = 0;
    for (int idx : series) {
        std::span<const double> r(returns[idx]);
        std::span<const double> slice =
            end > begin ? r.subspan(begin, end - begin) : r;
        LoglikResult ll = student_loglik(kernel, slice, nu);
        const long n = static_cast<long>(slice.size()) - kernel.q;
        acc += ll.per_point * n;
        npts += n;
    }
    return acc / static_cast<double>(npts);
}

}  // namespace

HarnessResult is_oos_harness(const std::vector<std::vector<double>>& returns,
                             const std::vector<std::vector<double>>& vol2,
                             const FeedbackKernel& base_kernel,
                             const std::vector<HarnessEstimator>& estimators,
                             const HarnessConfig& config) {
    const int N = static_cast<int>(returns.size());
    const long T = N > 0 ? static_cast<long>(returns[0].size()) : 0;
    if (N == 0) throw std::invalid_argument("is_oos_harness: empty panel");
    if (config.mode == SplitMode::RandomHalves && N < 2)
        throw std::invalid_argument("is_oos_harness: random-halves needs >= 2 series");
    if (config.mode == SplitMode::BlockDates && T < 4L * base_kernel.q)
        throw std::invalid_argument("is_oos_harness: too few dates for block split");
    const int q = config.q_off > 0 ? config.q_off : base_kernel.q;
    if (q > base_kernel.q)
        throw std::invalid_argument("is_oos_harness: q_off exceeds the kernel horizon");
    const std::vector<Split> splits =
        make_splits(N, T, config.mode, config.n_samplings, config.seed);

    const bool needs_gmm = [&] {
        for (const auto& e : estimators)
            if (e.kind == EstimatorKind::GmmOffdiag || e.kind == EstimatorKind::MlFromGmm)
                return true;
        return false;
    }();
    if (needs_gmm && vol2.size() != returns.size())
        throw std::invalid_argument("is_oos_harness: GMM estimators need vol2 for every series");

    struct Cell {
        double is = 0.0, oos = 0.0;
        int m = 0;
    };
    std::vector<std::vector<Cell>> table(estimators.size(),
                                         std::vector<Cell>(splits.size()));

    const int d_max = config.d_max > 0 ? config.d_max : q;
    const OffDiagDesign full_design = unconstrained_offdiag_design(base_kernel.q);

    parallel_for(splits.size(), [&](std::size_t si) {
        const Split& sp = splits[si];
        std::vector<int> is_idx, oos_idx;
        long is_begin = 0, is_end = 0, oos_begin = 0, oos_end = 0;
        if (config.mode == SplitMode::RandomHalves) {
            is_idx = sp.is_series;
            oos_idx = sp.oos_series;
        } else {
            for (int i = 0; i < N; ++i) is_idx.push_back(i), oos_idx.push_back(i);
            is_begin = sp.is_begin;
            is_end = sp.is_end;
        }
        auto slice_returns = [&](const std::vector<int>& idx, long b, long e) {
            std::vector<std::vector<double>> out;
            for (int i : idx) {
                if (e > b)
                    out.emplace_back(returns[i].begin() + b, returns[i].begin() + e);
                else
                    out.push_back(returns[i]);
            }
            return out;
        };
        const auto is_returns = slice_returns(is_idx, is_begin, is_end);

        // per-split GMM stage, shared by the estimators that need it
        Eigen::MatrixXd gmm_K;
        if (needs_gmm) {
            std::vector<CorrelationSet> sets;
            for (std::size_t ii = 0; ii < is_idx.size(); ++ii) {
                const int i = is_idx[ii];
                std::vector<double> r = is_end > is_begin
                                            ? std::vector<double>(returns[i].begin() + is_begin,
                                                                  returns[i].begin() + is_end)
                                            : returns[i];
                std::vector<double> v = is_end > is_begin
                                            ? std::vector<double>(vol2[i].begin() + is_begin,
                                                                  vol2[i].begin() + is_end)
                                            : vol2[i];
                std::vector<double> rt = truncate_returns(r, config.r_cut);
                sets.push_back(compute_correlations(
                    rt, std::optional<std::span<const double>>(std::span<const double>(v)),
                    std::max(2 * q, 16), d_max, 0));
            }
            CorrelationSet pooled = pool_correlations(sets);
            gmm_K = gmm_offdiagonal(pooled, q, base_kernel.K.diagonal(), base_kernel.L);
        }
        auto offdiag_params_from = [&](const Eigen::MatrixXd& K) {
            Eigen::VectorXd p(n_offdiag_entries(base_kernel.q));
            int e = 0;
            for (int a = 1; a <= base_kernel.q; ++a)
                for (int b = a + 1; b <= base_kernel.q; ++b, ++e)
                    p[e] = (a <= q && b <= q) ? K(a - 1, b - 1) : 0.0;
            return p;
        };

        for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
            const HarnessEstimator& est = estimators[ei];
            FeedbackKernel fitted = base_kernel;
            int m_params = 0;
            switch (est.kind) {
                case EstimatorKind::DiagonalOnly:
                    break;
                case EstimatorKind::GmmOffdiag: {
                    // gmm_K carries off-diagonal entries only (zero diagonal)
                    Eigen::MatrixXd K = base_kernel.K;
                    K.topLeftCorner(q, q) += gmm_K.topLeftCorner(q, q);
                    fitted = make_kernel(base_kernel.q, base_kernel.s2, base_kernel.L, K);
                    m_params = n_offdiag_entries(q);
                    break;
                }
                case EstimatorKind::MlFromZero:
                case EstimatorKind::MlFromGmm: {
                    OffDiagDesign design = unconstrained_offdiag_design(base_kernel.q);
                    // restrict the active set to pairs within q_off
                    if (q < base_kernel.q) {
                        OffDiagDesign small;
                        small.q = base_kernel.q;
                        small.coef = Eigen::MatrixXd::Zero(n_offdiag_entries(q),
                                                           n_offdiag_entries(base_kernel.q));
                        int row = 0;
                        for (int a = 1; a <= q; ++a)
                            for (int b = a + 1; b <= q; ++b, ++row)
                                small.coef(row, offdiag_entry_index(a, b, base_kernel.q)) = 1.0;
                        design = std::move(small);
                    }
                    MlPanel panel = build_ml_panel(is_returns, base_kernel, design, config.nu);
                    Eigen::VectorXd start = Eigen::VectorXd::Zero(design.n_params());
                    if (est.kind == EstimatorKind::MlFromGmm) {
                        int row = 0;
                        for (int a = 1; a <= q; ++a)
                            for (int b = a + 1; b <= q; ++b, ++row) start[row] = gmm_K(a - 1, b - 1);
                    }
                    EstimationResult r = one_step_ml(panel, start);
                    fitted = r.kernel;
                    m_params = design.n_params();
                    break;
                }
                case EstimatorKind::MlFamily: {
                    EstimationResult r =
                        restricted_ml(is_returns, base_kernel, est.family, est.parts, config.nu);
                    fitted = r.kernel;
                    m_params = offdiag_design(est.family, base_kernel.q, est.parts).n_params();
                    break;
                }
            }
            Cell cell;
            cell.m = m_params;
            if (config.mode == SplitMode::RandomHalves) {
                cell.is = eval_loglik_slice(fitted, returns, is_idx, 0, 0, config.nu);
                cell.oos = eval_loglik_slice(fitted, returns, oos_idx, 0, 0, config.nu);
            } else {
                cell.is = eval_loglik_slice(fitted, returns, is_idx, is_begin, is_end, config.nu);
                // out-of-sample: the longer remaining segment
                const long left = is_begin, right = T - is_end;
                if (right >= left)
                    cell.oos =
                        eval_loglik_slice(fitted, returns, oos_idx, is_end, T, config.nu);
                else
                    cell.oos =
                        eval_loglik_slice(fitted, returns, oos_idx, 0, is_begin, config.nu);
            }
            table[ei][si] = cell;
        }
    });

    HarnessResult result;
    for (std::size_t ei = 0; ei < estimators.size(); ++ei) {
        HarnessRow row;
        row.label = estimators[ei].label.empty() ? std::to_string(ei) : estimators[ei].label;
        const auto& cells = table[ei];
        const double n = static_cast<double>(cells.size());
        double is_m = 0, oos_m = 0;
        for (const auto& c : cells) is_m += c.is, oos_m += c.oos;
        is_m /= n;
        oos_m /= n;
        double is_v = 0, oos_v = 0, gap_m = 0, gap_v = 0;
        for (const auto& c : cells) {
            is_v += (c.is - is_m) * (c.is - is_m);
            oos_v += (c.oos - oos_m) * (c.oos - oos_m);
            gap_m += c.is - c.oos;
        }
        gap_m /= n;
        for (const auto& c : cells) gap_v += (c.is - c.oos - gap_m) * (c.is - c.oos - gap_m);
        row.n_params = cells.empty() ? 0 : cells[0].m;
        row.is_mean = is_m;
        row.oos_mean = oos_m;
        row.is_dispersion = std::sqrt(is_v / std::max(1.0, n - 1));
        row.oos_dispersion = std::sqrt(oos_v / std::max(1.0, n - 1));
        row.gap_mean = gap_m;
        row.gap_se = std::sqrt(gap_v / std::max(1.0, n - 1) / n);
        long n_is = 0;
        if (config.mode == SplitMode::RandomHalves) {
            n_is = static_cast<long>((N / 2)) * (T - base_kernel.q);
        } else {
            n_is = static_cast<long>(N) * (T / 2 - base_kernel.q);
        }
        row.n_points_is = n_is;
        row.bias_m_over_2n = 0.5 * row.n_params / static_cast<double>(n_is);
        row.aic = -2.0 * (row.is_mean - static_cast<double>(row.n_params) / n_is);
        result.rows.push_back(row);
        if (ei == 0)
            for (const auto& c : cells) result.gaps.push_back(c.is - c.oos);
    }
    return result;
}

}  // namespace qarch
