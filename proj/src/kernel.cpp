#include "qarch/kernel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "qarch/csv.hpp"

namespace qarch {

namespace {

void check_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace

bool FeedbackKernel::is_diagonal(double tol) const {
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j)
            if (std::abs(K(i, j)) > tol) return false;
    return true;
}

FeedbackKernel make_kernel(int q, double s2, Eigen::VectorXd L, Eigen::MatrixXd K) {
    if (q <= 0) throw std::invalid_argument("kernel horizon q must be positive");
    if (q > kMaxKernelHorizon)
        throw std::invalid_argument("kernel horizon exceeds the dense-storage envelope (512)");
    if (s2 < 0.0) throw std::invalid_argument("baseline s2 must be nonnegative");
    if (L.size() == 0) L = Eigen::VectorXd::Zero(q);
    if (L.size() != q) throw std::invalid_argument("leverage vector length does not match q");
    if (K.rows() != q || K.cols() != q)
        throw std::invalid_argument("feedback matrix shape does not match q");
    check_finite(L, "L");
    if (!K.allFinite()) throw std::invalid_argument("K: non-finite entries");
    const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if (asym > 1e-12 * scale) throw std::invalid_argument("feedback matrix is not symmetric");
    FeedbackKernel kernel;
    kernel.q = q;
    kernel.s2 = s2;
    kernel.L = std::move(L);
    kernel.K = 0.5 * (K + K.transpose());
    return kernel;
}

FeedbackKernel build_arch(const Eigen::VectorXd& k, double s2,
                          const std::optional<Eigen::VectorXd>& L) {
    const int q = static_cast<int>(k.size());
    if (q == 0) throw std::invalid_argument("build_arch: empty diagonal");
    check_finite(k, "k");
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    K.diagonal() = k;
    Eigen::VectorXd lev = L.value_or(Eigen::VectorXd::Zero(q));
    if (lev.size() != q) throw std::invalid_argument("build_arch: leverage length mismatch");
    return make_kernel(q, s2, std::move(lev), std::move(K));
}

FeedbackKernel build_figarch_diag(double g, double alpha, double q0, int q, double s2) {
    if (q <= 0) throw std::invalid_argument("build_figarch_diag: q must be positive");
    Eigen::VectorXd k(q);
    for (int t = 1; t <= q; ++t) {
        double v = g * std::pow(static_cast<double>(t), -alpha);
        if (q0 > 0.0) v *= std::exp(-t / q0);
        k[t - 1] = v;
    }
    return build_arch(k, s2);
}

FeedbackKernel build_two_scale(const Eigen::VectorXd& g1, const Eigen::VectorXd& g2, double s2) {
    const int q = static_cast<int>(g1.size());
    if (q == 0) throw std::invalid_argument("build_two_scale: empty g1");
    if (g2.size() != q - 1)
        throw std::invalid_argument("build_two_scale: g2 must have length q-1");
    check_finite(g1, "g1");
    if (g2.size() > 0) check_finite(g2, "g2");
    auto g2at = [&](int i) { return (i >= 0 && i < q - 1) ? g2[i] : 0.0; };
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    for (int t = 1; t <= q; ++t) K(t - 1, t - 1) = g1[t - 1] + g2at(t - 1) + g2at(t - 2);
    for (int t = 1; t < q; ++t) K(t - 1, t) = K(t, t - 1) = g2[t - 1];
    return make_kernel(q, s2, Eigen::VectorXd::Zero(q), std::move(K));
}

FeedbackKernel build_bb(const Eigen::VectorXd& g_bb, double s2) {
    const int q = static_cast<int>(g_bb.size());
    if (q == 0) throw std::invalid_argument("build_bb: empty g_bb");
    check_finite(g_bb, "g_bb");
    // G[t] = sum_{l=t..q} g_bb(l), 1-based
    Eigen::VectorXd G(q + 1);
    G[q] = g_bb[q - 1];
    for (int t = q - 1; t >= 1; --t) G[t] = G[t + 1] + g_bb[t - 1];
    Eigen::MatrixXd K(q, q);
    for (int a = 1; a <= q; ++a)
        for (int b = 1; b <= q; ++b) K(a - 1, b - 1) = G[std::max(a, b)];
    return make_kernel(q, s2, Eigen::VectorXd::Zero(q), std::move(K));
}

FeedbackKernel build_bb_mixed(const Eigen::VectorXd& g_bb, const Eigen::VectorXd& diag,
                              double s2) {
    FeedbackKernel kernel = build_bb(g_bb, s2);
    if (diag.size() != kernel.q)
        throw std::invalid_argument("build_bb_mixed: diagonal length mismatch");
    check_finite(diag, "diag");
    kernel.K.diagonal() = diag;
    return kernel;
}

FeedbackKernel build_zumbach(const Eigen::VectorXd& diag, const Eigen::VectorXd& g_z,
                             double s2) {
    const int q = static_cast<int>(diag.size());
    if (q == 0) throw std::invalid_argument("build_zumbach: empty diagonal");
    if (g_z.size() != q / 2)
        throw std::invalid_argument("build_zumbach: g_z must have length floor(q/2)");
    check_finite(diag, "diag");
    if (g_z.size() > 0) check_finite(g_z, "g_z");
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    // K(a, b>a) = sum over l in [max(a, ceil(b/2)), min(b-1, floor(q/2))]
    for (int a = 1; a <= q; ++a) {
        for (int b = a + 1; b <= q; ++b) {
            const int lo = std::max(a, (b + 1) / 2);
            const int hi = std::min(b - 1, q / 2);
            double acc = 0.0;
            for (int l = lo; l <= hi; ++l) acc += g_z[l - 1];
            K(a - 1, b - 1) = K(b - 1, a - 1) = acc;
        }
    }
    K.diagonal() = diag;
    return make_kernel(q, s2, Eigen::VectorXd::Zero(q), std::move(K));
}

FeedbackKernel build_long_trend(const Eigen::VectorXd& diag, const Eigen::VectorXd& g_lt,
                                double s2) {
    const int q = static_cast<int>(diag.size());
    if (q == 0) throw std::invalid_argument("build_long_trend: empty diagonal");
    if (g_lt.size() != q - 1)
        throw std::invalid_argument("build_long_trend: g_lt must have length q-1");
    check_finite(diag, "diag");
    if (g_lt.size() > 0) check_finite(g_lt, "g_lt");
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    K.diagonal() = diag;
    // stored as half weights so the evaluated double sum reproduces
    // r_{t-1} * sum_l g_lt(l) r_{t-1-l} exactly
    for (int t = 2; t <= q; ++t) K(0, t - 1) = K(t - 1, 0) = 0.5 * g_lt[t - 2];
    return make_kernel(q, s2, Eigen::VectorXd::Zero(q), std::move(K));
}

double S2Profile::operator()(double q) const {
    return s_inf2 + g * std::pow(q, 1.0 - alpha) / (alpha - 1.0) * std::exp(-q / q0);
}

Eigen::VectorXd profile_implied_diagonal(const S2Profile& profile, int q) {
    if (q <= 0) throw std::invalid_argument("profile_implied_diagonal: q must be positive");
    Eigen::VectorXd k(q);
    k[0] = 1.0 - profile(1.0);
    for (int t = 2; t <= q; ++t) k[t - 1] = profile(t - 1.0) - profile(static_cast<double>(t));
    return k;
}

namespace {

void check_window(const FeedbackKernel& kernel, std::span<const double> window) {
    if (static_cast<int>(window.size()) < kernel.q)
        throw std::invalid_argument("sigma2: window shorter than kernel horizon");
    for (int i = 0; i < kernel.q; ++i)
        if (!std::isfinite(window[i])) throw std::invalid_argument("sigma2: non-finite return");
}

}  // namespace

double sigma2(const FeedbackKernel& kernel, std::span<const double> window) {
    check_window(kernel, window);
    const int q = kernel.q;
    Eigen::Map<const Eigen::VectorXd> w(window.data(), q);
    return kernel.s2 + kernel.L.dot(w) + w.dot(kernel.K * w);
}

double sigma2_naive(const FeedbackKernel& kernel, std::span<const double> window) {
    check_window(kernel, window);
    const int q = kernel.q;
    double acc = kernel.s2;
    for (int a = 0; a < q; ++a) {
        acc += kernel.L[a] * window[a];
        for (int b = 0; b < q; ++b) acc += kernel.K(a, b) * window[a] * window[b];
    }
    return acc;
}

PositivityReport positivity_check(const FeedbackKernel& kernel, double tol) {
    PositivityReport rep;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel.K, Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    rep.eigen_ok = rep.min_eigenvalue >= -tol;
    const bool zero_leverage = kernel.L.isZero(0.0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kernel.K);
    if (!lu.isInvertible() && !zero_leverage) {
        rep.quadratic_applicable = false;
        rep.quadratic_lhs = std::numeric_limits<double>::quiet_NaN();
        rep.margin = std::numeric_limits<double>::quiet_NaN();
        rep.definite = rep.eigen_ok;
        return rep;
    }
    rep.quadratic_lhs = zero_leverage ? 0.0 : kernel.L.dot(lu.solve(kernel.L));
    rep.margin = 4.0 * kernel.s2 - rep.quadratic_lhs;
    rep.definite = rep.eigen_ok && rep.quadratic_lhs <= 4.0 * kernel.s2;
    return rep;
}

void save_kernel(const FeedbackKernel& kernel, const std::string& path) {
    CsvWriter out(path);
    out.row({"qarch_kernel", "v1"});
    out.row({"q", std::to_string(kernel.q)});
    out.row({"s2", format_g17(kernel.s2)});
    std::vector<double> lrow(kernel.L.data(), kernel.L.data() + kernel.q);
    out.numeric_row("L", lrow);
    for (int i = 0; i < kernel.q; ++i) {
        std::vector<double> krow(kernel.q);
        for (int j = 0; j < kernel.q; ++j) krow[j] = kernel.K(i, j);
        out.numeric_row("K", krow);
    }
    if (!out.good()) throw std::runtime_error("failed writing kernel file: " + path);
}

FeedbackKernel load_kernel(const std::string& path) {
    const auto rows = read_csv(path);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "qarch_kernel")
        throw std::runtime_error("not a kernel file: " + path);
    std::size_t i = 1;
    auto expect = [&](const std::string& label) -> const std::vector<std::string>& {
        if (i >= rows.size() || rows[i].empty() || rows[i][0] != label)
            throw std::runtime_error("kernel file: expected '" + label + "' row in " + path);
        return rows[i++];
    };
    const auto& qrow = expect("q");
    const int q = static_cast<int>(parse_long(qrow.at(1), path));
    const auto& srow = expect("s2");
    const double s2 = parse_double(srow.at(1), path);
    const auto& lrow = expect("L");
    if (static_cast<int>(lrow.size()) != q + 1)
        throw std::runtime_error("kernel file: leverage row length mismatch in " + path);
    Eigen::VectorXd L(q);
    for (int j = 0; j < q; ++j) L[j] = parse_double(lrow[j + 1], path);
    Eigen::MatrixXd K(q, q);
    for (int r = 0; r < q; ++r) {
        const auto& krow = expect("K");
        if (static_cast<int>(krow.size()) != q + 1)
            throw std::runtime_error("kernel file: K row length mismatch in " + path);
        for (int j = 0; j < q; ++j) K(r, j) = parse_double(krow[j + 1], path);
    }
    return make_kernel(q, s2, std::move(L), std::move(K));
}

}  // namespace qarch
