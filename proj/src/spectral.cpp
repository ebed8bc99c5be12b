#include "qarch/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qarch {

namespace {

double offdiag_norm(const Eigen::MatrixXd& a) {
    double acc = 0.0;
    const int n = static_cast<int>(a.rows());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
    return std::sqrt(2.0 * acc);
}

}  // namespace

SpectrumReport eigendecompose(const FeedbackKernel& kernel) {
    if (!kernel.K.allFinite()) throw std::invalid_argument("eigendecompose: non-finite kernel");
    const int n = kernel.q;
    Eigen::MatrixXd a = kernel.K;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    const double tol = 1e-12 * std::max(kernel.K.norm(), 1e-300);
    for (int sweep = 0; sweep < 64 && offdiag_norm(a) > tol; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q2 = p + 1; q2 < n; ++q2) {
                const double apq = a(p, q2);
                if (apq == 0.0) continue;
                const double theta = (a(q2, q2) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q2);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q2) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q2, i);
                    a(p, i) = c * api - s * aqi;
                    a(q2, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q2);
                    v(i, p) = c * vip - s * viq;
                    v(i, q2) = s * vip + c * viq;
                }
            }
        }
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a(i, i) > a(j, j); });
    SpectrumReport rep;
    rep.eigenvalues.resize(n);
    rep.eigenvectors.resize(n, n);
    for (int k = 0; k < n; ++k) {
        rep.eigenvalues[k] = a(order[k], order[k]);
        Eigen::VectorXd col = v.col(order[k]);
        int imax = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(col[i]) > std::abs(col[imax])) imax = i;
        if (col[imax] < 0.0) col = -col;
        rep.eigenvectors.col(k) = col;
    }
    Eigen::VectorXd diag = kernel.K.diagonal();
    std::sort(diag.data(), diag.data() + n, std::greater<double>());
    rep.arch_reference = diag;
    const double lmax = rep.eigenvalues.cwiseAbs().maxCoeff();
    for (int k = 0; k < n; ++k)
        if (std::abs(rep.eigenvalues[k]) < 1e-3 * lmax) ++rep.neutral_count;
    return rep;
}

double mode_projection(std::span<const double> window, const Eigen::VectorXd& v) {
    if (static_cast<Eigen::Index>(window.size()) < v.size())
        throw std::invalid_argument("mode_projection: window shorter than eigenvector");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) acc += v[i] * window[i];
    return acc;
}

}  // namespace qarch
