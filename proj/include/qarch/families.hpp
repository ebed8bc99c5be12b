// Structured kernel families as linear maps from parameter vectors onto the
// entries of K, used by the restricted maximum-likelihood path.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qarch/kernel.hpp"

namespace qarch {

enum class Family {
    Arch,
    FigarchDiag,
    TwoScale,
    BorlandBouchaud,
    Zumbach,
    LongTrend,
    Composite,
};

std::string family_name(Family f);

struct CompositeParts {
    bool two_scale = false;
    bool borland_bouchaud = false;
    bool zumbach = false;
    bool long_trend = false;
};

// params packing per family:
//   Arch:            k(1..q)                         (q)
//   FigarchDiag:     g, alpha, q0                    (3)
//   TwoScale:        g1(0..q-1), g2(0..q-2)          (2q-1)
//   BorlandBouchaud: g_bb(1..q)                      (q)
//   Zumbach:         diag(1..q), g_z(1..floor(q/2))  (q + floor(q/2))
//   LongTrend:       diag(1..q), g_lt(1..q-1)        (2q-1)
//   Composite:       diag(1..q), then per enabled part: g2 (q-1),
//                    G[2..q] (q-1), g_z (floor(q/2)), g_lt (q-1)
struct FamilySpec {
    Family family = Family::Arch;
    int q = 0;
    double s2 = 0.0;
    Eigen::VectorXd params;
    CompositeParts parts;  // Composite only
};

int family_param_count(const FamilySpec& spec);

FeedbackKernel build_from_spec(const FamilySpec& spec);

// entry ordering shared by DesignMatrix and OffDiagDesign:
//   diagonal entries (1,1)..(q,q) first, then upper-triangle (a,b) a<b in
//   row-major order (1,2),(1,3),...,(1,q),(2,3),...
int n_kernel_entries(int q);                    // q(q+1)/2
int n_offdiag_entries(int q);                   // q(q-1)/2
int diag_entry_index(int tau, int q);           // 1-based lag
int offdiag_entry_index(int a, int b, int q);   // 1-based lags, a < b; index into the off-diag block

struct DesignMatrix {
    int q = 0;
    Eigen::MatrixXd coef;  // n_params x n_kernel_entries(q)

    // symmetrize(coef^T params) as a full kernel matrix
    Eigen::MatrixXd apply(const Eigen::VectorXd& params) const;
};

// Linear families only; FigarchDiag is rejected (its parameters enter k(tau)
// nonlinearly, so no multiplicity matrix exists).
DesignMatrix family_design_matrix(const FamilySpec& spec);

// Off-diagonal-only design used by restricted ML (diagonal and leverage are
// held fixed there). Arch contributes no parameters.
struct OffDiagDesign {
    int q = 0;
    Eigen::MatrixXd coef;  // n_params x n_offdiag_entries(q)
    std::vector<std::string> param_names;

    int n_params() const { return static_cast<int>(coef.rows()); }
    // scatter coefficients onto a symmetric matrix with zero diagonal
    Eigen::MatrixXd apply(const Eigen::VectorXd& params) const;
};

OffDiagDesign offdiag_design(Family family, int q, const CompositeParts& parts = {});
OffDiagDesign unconstrained_offdiag_design(int q);

}  // namespace qarch
