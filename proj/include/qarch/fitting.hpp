// Small bounded Levenberg-Marquardt least squares with random restarts,
// shared by the correlation-shape and s2-profile fits.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace qarch {

// fills residuals r(p); Jacobian is formed by forward differences
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LmResult {
    Eigen::VectorXd params;
    double rss = 0.0;
    bool converged = false;
    int iterations = 0;
};

LmResult levenberg_marquardt(const ResidualFn& fn, int n_residuals, Eigen::VectorXd p0,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             int max_iterations = 200);

// 5 random restarts drawn log-uniformly inside the box; lowest rss wins
LmResult fit_with_restarts(const ResidualFn& fn, int n_residuals, const Eigen::VectorXd& p0,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           int n_restarts = 5, std::uint64_t seed = 12345);

}  // namespace qarch
