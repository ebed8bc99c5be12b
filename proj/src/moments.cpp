#include "qarch/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "qarch/parallel.hpp"

namespace qarch {

ResidualSpec ResidualSpec::student(double nu) {
    if (!(nu > 4.0))
        throw std::invalid_argument("ResidualSpec::student: xi4 finite requires nu > 4");
    return {3.0 * (nu - 2.0) / (nu - 4.0), nu};
}

double riemann_zeta(double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("riemann_zeta: needs alpha > 1");
    const int n = 4096;
    double acc = 0.0;
    for (int k = n; k >= 1; --k) acc += std::pow(static_cast<double>(k), -alpha);
    // Euler-Maclaurin tail from n
    const double nn = n;
    double tail = std::pow(nn, 1.0 - alpha) / (alpha - 1.0) - 0.5 * std::pow(nn, -alpha);
    tail += alpha * std::pow(nn, -alpha - 1.0) / 12.0;
    tail -= alpha * (alpha + 1.0) * (alpha + 2.0) * std::pow(nn, -alpha - 3.0) / 720.0;
    tail += alpha * (alpha + 1.0) * (alpha + 2.0) * (alpha + 3.0) * (alpha + 4.0) *
            std::pow(nn, -alpha - 5.0) / 30240.0;
    return acc + tail;
}

double power_law_sum(double alpha, long q) {
    if (q < 1) throw std::invalid_argument("power_law_sum: q must be positive");
    if (q >= kInfiniteHorizon) {
        if (alpha <= 1.0) return std::numeric_limits<double>::infinity();
        return riemann_zeta(alpha);
    }
    double acc = 0.0;
    for (long t = q; t >= 1; --t) acc += std::pow(static_cast<double>(t), -alpha);
    return acc;
}

double critical_g(double alpha, long q) {
    if (!(alpha > 0.0)) throw std::invalid_argument("critical_g: alpha must be positive");
    const double s = power_law_sum(alpha, q);
    if (!std::isfinite(s)) return 0.0;  // always unstable when alpha <= 1 at q = infinity
    return 1.0 / s;
}

MomentReport second_moment(const FeedbackKernel& kernel, const ResidualSpec&) {
    MomentReport rep;
    const double tr = kernel.trace();
    rep.stable2 = tr < 1.0;
    rep.sigma2_mean =
        rep.stable2 ? kernel.s2 / (1.0 - tr) : std::numeric_limits<double>::infinity();
    return rep;
}

namespace {

// nabla(t,u) = delta - xi4 k(t) k(u) - [k(t-u) + k(t+u)], k(i)=0 outside 1..q
Eigen::MatrixXd build_nabla(const Eigen::VectorXd& k, double xi4) {
    const int q = static_cast<int>(k.size());
    auto kv = [&](int i) { return (i >= 1 && i <= q) ? k[i - 1] : 0.0; };
    Eigen::MatrixXd nabla = Eigen::MatrixXd::Identity(q, q) - xi4 * k * k.transpose();
    for (int t = 1; t <= q; ++t)
        for (int u = 1; u <= q; ++u) nabla(t - 1, u - 1) -= kv(t - u) + kv(t + u);
    return nabla;
}

int lu_det_sign(const Eigen::MatrixXd& m) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const auto& diag = lu.matrixLU().diagonal();
    int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (diag[i] == 0.0) return 0;
        if (diag[i] < 0.0) sign = -sign;
    }
    return sign;
}

constexpr double kRcondFloor = 1e-12;

}  // namespace

MomentReport fourth_moment_diag(const Eigen::VectorXd& k, const ResidualSpec& residual,
                                double m2) {
    const int q = static_cast<int>(k.size());
    if (q == 0) throw std::invalid_argument("fourth_moment_diag: empty kernel");
    MomentReport rep;
    const double tr = k.sum();
    rep.stable2 = tr < 1.0;
    rep.sigma2_mean = m2;
    Eigen::MatrixXd nabla = build_nabla(k, residual.xi4);
    Eigen::VectorXd source = k * (m2 * m2 * (residual.xi4 - 1.0));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(nabla);
    const double rc = lu.rcond();
    const int sign = lu_det_sign(nabla);
    if (!rep.stable2 || sign <= 0 || rc < kRcondFloor) {
        rep.stable4 = false;
        rep.sigma4_mean = std::numeric_limits<double>::infinity();
        rep.kurtosis = std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.c2_theory = lu.solve(source);
    rep.sigma4_mean = m2 * m2 + k.dot(rep.c2_theory);
    rep.stable4 = rep.sigma4_mean >= m2 * m2;
    rep.kurtosis = rep.sigma4_mean * residual.xi4 / (m2 * m2) - 3.0;
    return rep;
}

MomentReport fourth_moment_general(const FeedbackKernel& kernel, const ResidualSpec& residual) {
    const int q = kernel.q;
    if (!kernel.L.isZero(0.0))
        throw std::invalid_argument(
            "fourth_moment_general: the self-consistent system assumes zero leverage");
    MomentReport rep;
    const double tr = kernel.trace();
    rep.stable2 = tr < 1.0;
    if (!rep.stable2) {
        rep.sigma2_mean = std::numeric_limits<double>::infinity();
        rep.sigma4_mean = std::numeric_limits<double>::infinity();
        rep.kurtosis = std::numeric_limits<double>::infinity();
        return rep;
    }
    const double m2 = kernel.s2 > 0.0 ? kernel.s2 / (1.0 - tr) : 1.0;
    rep.sigma2_mean = m2;
    const double m2sq = m2 * m2;
    const double xi4 = residual.xi4;
    const Eigen::MatrixXd& K = kernel.K;

    // unknown layout: [sigma4, C2(1..q), D(a,b) for 1<=b<a<=q]
    const int nd = q * (q - 1) / 2;
    const int n = 1 + q + nd;
    auto c2_idx = [&](int tau) { return 1 + (tau - 1); };
    auto d_idx = [&](int a, int b) {
        // a > b >= 1; pairs ordered (2,1),(3,1),(3,2),(4,1),...
        return 1 + q + (a - 1) * (a - 2) / 2 + (b - 1);
    };
    auto c2_of = [&](Eigen::RowVectorXd& row, int tau, double w) {
        // C2 at a signed lag; C2(-t)=C2(t); tau != 0
        row[c2_idx(std::abs(tau))] += w;
    };
    auto d_of = [&](Eigen::RowVectorXd& row, int a, int b, double w) {
        // D at positive distinct lags; symmetric
        if (a == b) {
            c2_of(row, a, w);
            return;
        }
        row[d_idx(std::max(a, b), std::min(a, b))] += w;
    };

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

    // sigma4 row: sigma4 - sum_t k(t) C2(t) - 2 sum_{a>b} K(a,b) D(a,b) = m2^2
    {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        row[0] = 1.0;
        for (int t = 1; t <= q; ++t) c2_of(row, t, -K(t - 1, t - 1));
        for (int a = 2; a <= q; ++a)
            for (int b = 1; b < a; ++b) d_of(row, a, b, -2.0 * K(a - 1, b - 1));
        A.row(0) = row;
        rhs[0] = m2sq;
    }

    // C2(tau) rows
    for (int tau = 1; tau <= q; ++tau) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
        c2_of(row, tau, 1.0);
        row[0] -= K(tau - 1, tau - 1) * xi4;  // k(tau) <sigma4> xi4
        for (int tp = 1; tp <= q; ++tp) {
            if (tp == tau) continue;
            c2_of(row, tau - tp, -K(tp - 1, tp - 1));
        }
        for (int b = tau + 1; b <= q; ++b)
            for (int a = b + 1; a <= q; ++a)
                d_of(row, a - tau, b - tau, -2.0 * K(a - 1, b - 1));
        A.row(c2_idx(tau)) = row;
        rhs[c2_idx(tau)] = -K(tau - 1, tau - 1) * m2sq;
    }

    // D(t1, t2) rows, t1 > t2
    for (int t1 = 2; t1 <= q; ++t1) {
        for (int t2 = 1; t2 < t1; ++t2) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
            d_of(row, t1, t2, 1.0);
            c2_of(row, t1 - t2, -2.0 * K(t1 - 1, t2 - 1));
            double cst = 2.0 * K(t1 - 1, t2 - 1) * m2sq;
            for (int tp = 1; tp < t2; ++tp)
                d_of(row, t1 - tp, t2 - tp, -K(tp - 1, tp - 1));
            for (int tp = t2 + 1; tp <= q; ++tp) {
                if (tp == t1) continue;
                d_of(row, tp - t2, t1 - t2, -2.0 * K(tp - 1, t2 - 1));
            }
            A.row(d_idx(t1, t2)) = row;
            rhs[d_idx(t1, t2)] = cst;
        }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rcond() < kRcondFloor) {
        rep.stable4 = false;
        rep.sigma4_mean = std::numeric_limits<double>::infinity();
        rep.kurtosis = std::numeric_limits<double>::infinity();
        return rep;
    }
    Eigen::VectorXd sol = lu.solve(rhs);
    rep.sigma4_mean = sol[0];
    rep.c2_theory = sol.segment(1, q);
    rep.stable4 = rep.sigma4_mean >= m2sq && std::isfinite(rep.sigma4_mean);
    rep.kurtosis = rep.sigma4_mean * xi4 / m2sq - 3.0;
    return rep;
}

std::optional<double> perturbative_sigma4(double g, double alpha, const ResidualSpec& residual) {
    if (2.0 * alpha <= 1.0) return std::nullopt;
    return 1.0 + (residual.xi4 - 1.0) * g * g * riemann_zeta(2.0 * alpha);
}

double figarch_beta(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5))
        throw std::domain_error("figarch_beta: law requires 0 < eps < 1/2");
    return 1.0 - 2.0 * epsilon;
}

int nabla_det_sign(double g, double alpha, int q, const ResidualSpec& residual) {
    Eigen::VectorXd k(q);
    for (int t = 1; t <= q; ++t) k[t - 1] = g * std::pow(static_cast<double>(t), -alpha);
    return lu_det_sign(build_nabla(k, residual.xi4));
}

double fourth_frontier_g4(double alpha, int q, const ResidualSpec& residual, int iterations) {
    const double gc = critical_g(alpha, q);
    double lo = 0.0, hi = gc;
    if (nabla_det_sign(lo + 1e-9 * gc, alpha, q, residual) <= 0)
        throw std::runtime_error("fourth_frontier_g4: no positive-det bracket at g ~ 0");
    if (nabla_det_sign(hi * (1.0 - 1e-12), alpha, q, residual) > 0) return gc;  // frontier at gc
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (nabla_det_sign(mid, alpha, q, residual) > 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// relative frontier gap 1 - g4/gc extrapolated in x = q^(-1/3)
double extrapolated_gap(double alpha, const std::vector<int>& qs, const ResidualSpec& residual) {
    const int n = static_cast<int>(qs.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    std::vector<double> gaps(n);
    parallel_for(n, [&](std::size_t i) {
        const int q = qs[i];
        const double g4 = fourth_frontier_g4(alpha, q, residual);
        gaps[i] = 1.0 - g4 * power_law_sum(alpha, q);  // g4/gc = g4 * sum
    });
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = std::pow(static_cast<double>(qs[i]), -1.0 / 3.0);
        y[i] = gaps[i];
    }
    Eigen::Vector2d coef = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    return coef[0];
}

}  // namespace

AlphaCResult alpha_c_extrapolate(const std::vector<int>& q_list, const ResidualSpec& residual) {
    if (q_list.size() < 2)
        throw std::invalid_argument("alpha_c_extrapolate: need at least two horizons");
    for (std::size_t i = 1; i < q_list.size(); ++i)
        if (q_list[i] <= q_list[i - 1])
            throw std::invalid_argument("alpha_c_extrapolate: horizons must be increasing");
    AlphaCResult result;
    result.q_list = q_list;
    double lo = 1.05, hi = 1.8;
    double glo = extrapolated_gap(lo, q_list, residual);
    double ghi = extrapolated_gap(hi, q_list, residual);
    result.gap_curve.emplace_back(lo, glo);
    result.gap_curve.emplace_back(hi, ghi);
    if (!(glo < 0.0 && ghi > 0.0))
        throw std::runtime_error("alpha_c_extrapolate: gap root not bracketed in [1.05, 1.8]");
    for (int it = 0; it < 24; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = extrapolated_gap(mid, q_list, residual);
        result.gap_curve.emplace_back(mid, gm);
        if (gm < 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 5e-5) break;
    }
    result.alpha_c = 0.5 * (lo + hi);
    result.inv_zeta_alpha_c = 1.0 / riemann_zeta(result.alpha_c);
    return result;
}

std::vector<FrontierPoint> frontier_scan(const std::vector<double>& alphas,
                                         const std::vector<long>& qs,
                                         const ResidualSpec& residual) {
    std::vector<FrontierPoint> points(alphas.size() * qs.size());
    parallel_for(points.size(), [&](std::size_t idx) {
        const double alpha = alphas[idx / qs.size()];
        const long q = qs[idx % qs.size()];
        FrontierPoint p;
        p.alpha = alpha;
        p.q = q;
        p.g_c = critical_g(alpha, q);
        const int qeff = static_cast<int>(std::min<long>(q, 1024));
        p.g_4 = p.g_c > 0.0 ? fourth_frontier_g4(alpha, qeff, residual) : 0.0;
        points[idx] = p;
    });
    return points;
}

}  // namespace qarch
