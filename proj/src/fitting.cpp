#include "qarch/fitting.hpp"

#include <cmath>
#include <stdexcept>

#include "qarch/rng.hpp"

namespace qarch {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd p, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = std::min(hi[i], std::max(lo[i], p[i]));
    return p;
}

}  // namespace

LmResult levenberg_marquardt(const ResidualFn& fn, int n_residuals, Eigen::VectorXd p0,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             int max_iterations) {
    const int np = static_cast<int>(p0.size());
    if (lower.size() != np || upper.size() != np)
        throw std::invalid_argument("levenberg_marquardt: bound shape mismatch");
    Eigen::VectorXd p = clamp_box(std::move(p0), lower, upper);
    Eigen::VectorXd r(n_residuals), rtrial(n_residuals);
    fn(p, r);
    double rss = r.squaredNorm();
    double lambda = 1e-3;
    LmResult result;
    Eigen::MatrixXd jac(n_residuals, np);
    for (int it = 0; it < max_iterations; ++it) {
        // forward-difference Jacobian
        for (int j = 0; j < np; ++j) {
            const double h = 1e-6 * std::max(std::abs(p[j]), 1e-3);
            Eigen::VectorXd pj = p;
            pj[j] = std::min(upper[j], p[j] + h);
            const double hj = pj[j] - p[j];
            if (hj == 0.0) {
                jac.col(j).setZero();
                continue;
            }
            fn(pj, rtrial);
            jac.col(j) = (rtrial - r) / hj;
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            Eigen::VectorXd step = damped.ldlt().solve(jtr);
            Eigen::VectorXd ptrial = clamp_box(p - step, lower, upper);
            fn(ptrial, rtrial);
            const double rss_trial = rtrial.squaredNorm();
            if (rss_trial < rss) {
                const double drop = rss - rss_trial;
                p = ptrial;
                r = rtrial;
                rss = rss_trial;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (drop < 1e-12 * (1.0 + rss)) {
                    result.converged = true;
                    it = max_iterations;  // done
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
        result.iterations = it + 1;
        if (!improved) {
            result.converged = true;
            break;
        }
    }
    result.params = p;
    result.rss = rss;
    return result;
}

LmResult fit_with_restarts(const ResidualFn& fn, int n_residuals, const Eigen::VectorXd& p0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           int n_restarts, std::uint64_t seed) {
    LmResult best = levenberg_marquardt(fn, n_residuals, p0, lower, upper);
    Rng rng(seed);
    for (int k = 0; k < n_restarts; ++k) {
        Eigen::VectorXd start(p0.size());
        for (Eigen::Index i = 0; i < p0.size(); ++i) {
            const double lo = lower[i], hi = upper[i];
            if (lo > 0.0 && hi / lo > 100.0) {
                // log-uniform for scale-like parameters
                start[i] = lo * std::exp(rng.uniform() * std::log(hi / lo));
            } else {
                start[i] = lo + rng.uniform() * (hi - lo);
            }
        }
        LmResult trial = levenberg_marquardt(fn, n_residuals, start, lower, upper);
        if (trial.rss < best.rss) best = trial;
    }
    return best;
}

}  // namespace qarch
