// Eigen-analysis of feedback kernels: sorted spectrum, eigenvector sign
// convention, mode projections, rank-one diagnostics.
#pragma once

#include <Eigen/Dense>
#include <span>

#include "qarch/kernel.hpp"

namespace qarch {

struct SpectrumReport {
    Eigen::VectorXd eigenvalues;       // descending
    Eigen::MatrixXd eigenvectors;      // columns, matching order
    Eigen::VectorXd arch_reference;    // sorted diagonal of K (diagonal-only spectrum)
    int neutral_count = 0;             // |lambda| < 1e-3 * lambda_max
};

// Cyclic Jacobi rotations; converges when the off-diagonal Frobenius norm
// drops below 1e-12 * ||K||_F. Sign convention: the largest-magnitude
// component of each eigenvector is positive.
SpectrumReport eigendecompose(const FeedbackKernel& kernel);

// <r | v> = sum_tau v(tau) r_{t-tau}; window ordered most-recent-first
double mode_projection(std::span<const double> window, const Eigen::VectorXd& v);

}  // namespace qarch
