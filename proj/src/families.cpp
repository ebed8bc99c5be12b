#include "qarch/families.hpp"

#include <stdexcept>

namespace qarch {

std::string family_name(Family f) {
    switch (f) {
        case Family::Arch: return "ARCH";
        case Family::FigarchDiag: return "FIGARCH-diag";
        case Family::TwoScale: return "TwoScale";
        case Family::BorlandBouchaud: return "BB";
        case Family::Zumbach: return "Zumbach";
        case Family::LongTrend: return "LongTrend";
        case Family::Composite: return "Composite";
    }
    return "?";
}

int family_param_count(const FamilySpec& spec) {
    const int q = spec.q;
    switch (spec.family) {
        case Family::Arch: return q;
        case Family::FigarchDiag: return 3;
        case Family::TwoScale: return 2 * q - 1;
        case Family::BorlandBouchaud: return q;
        case Family::Zumbach: return q + q / 2;
        case Family::LongTrend: return 2 * q - 1;
        case Family::Composite: {
            int n = q;
            if (spec.parts.two_scale) n += q - 1;
            if (spec.parts.borland_bouchaud) n += q - 1;
            if (spec.parts.zumbach) n += q / 2;
            if (spec.parts.long_trend) n += q - 1;
            return n;
        }
    }
    return 0;
}

namespace {

void check_param_count(const FamilySpec& spec) {
    if (spec.q <= 0) throw std::invalid_argument("family spec: q must be positive");
    const int want = family_param_count(spec);
    if (spec.params.size() != want)
        throw std::invalid_argument("family spec " + family_name(spec.family) + ": expected " +
                                    std::to_string(want) + " parameters, got " +
                                    std::to_string(spec.params.size()));
}

}  // namespace

FeedbackKernel build_from_spec(const FamilySpec& spec) {
    check_param_count(spec);
    const int q = spec.q;
    const Eigen::VectorXd& p = spec.params;
    switch (spec.family) {
        case Family::Arch:
            return build_arch(p, spec.s2);
        case Family::FigarchDiag:
            return build_figarch_diag(p[0], p[1], p[2], q, spec.s2);
        case Family::TwoScale:
            return build_two_scale(p.head(q), p.tail(q - 1), spec.s2);
        case Family::BorlandBouchaud:
            return build_bb(p, spec.s2);
        case Family::Zumbach:
            return build_zumbach(p.head(q), p.tail(q / 2), spec.s2);
        case Family::LongTrend:
            return build_long_trend(p.head(q), p.tail(q - 1), spec.s2);
        case Family::Composite: {
            OffDiagDesign design = offdiag_design(Family::Composite, q, spec.parts);
            Eigen::MatrixXd K = design.apply(p.tail(p.size() - q));
            K.diagonal() = p.head(q);
            return make_kernel(q, spec.s2, Eigen::VectorXd::Zero(q), std::move(K));
        }
    }
    throw std::invalid_argument("unknown family");
}

int n_kernel_entries(int q) { return q * (q + 1) / 2; }
int n_offdiag_entries(int q) { return q * (q - 1) / 2; }

int diag_entry_index(int tau, int q) {
    if (tau < 1 || tau > q) throw std::out_of_range("diag_entry_index");
    return tau - 1;
}

int offdiag_entry_index(int a, int b, int q) {
    if (a < 1 || b <= a || b > q) throw std::out_of_range("offdiag_entry_index");
    // row-major upper triangle: offset of row a plus column position
    const int before = (a - 1) * q - (a - 1) * a / 2;  // entries in rows 1..a-1
    return before + (b - a - 1);
}

Eigen::MatrixXd DesignMatrix::apply(const Eigen::VectorXd& params) const {
    if (params.size() != coef.rows()) throw std::invalid_argument("design apply: size mismatch");
    Eigen::VectorXd entries = coef.transpose() * params;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    for (int t = 1; t <= q; ++t) K(t - 1, t - 1) = entries[diag_entry_index(t, q)];
    for (int a = 1; a <= q; ++a)
        for (int b = a + 1; b <= q; ++b) {
            const double v = entries[q + offdiag_entry_index(a, b, q)];
            K(a - 1, b - 1) = K(b - 1, a - 1) = v;
        }
    return K;
}

DesignMatrix family_design_matrix(const FamilySpec& spec) {
    check_param_count(spec);
    const int q = spec.q;
    const int ne = n_kernel_entries(q);
    DesignMatrix d;
    d.q = q;
    auto od = [&](int a, int b) { return q + offdiag_entry_index(a, b, q); };
    switch (spec.family) {
        case Family::Arch: {
            d.coef = Eigen::MatrixXd::Zero(q, ne);
            for (int t = 1; t <= q; ++t) d.coef(t - 1, diag_entry_index(t, q)) = 1.0;
            return d;
        }
        case Family::TwoScale: {
            d.coef = Eigen::MatrixXd::Zero(2 * q - 1, ne);
            for (int t = 1; t <= q; ++t) d.coef(t - 1, diag_entry_index(t, q)) = 1.0;
            for (int j = 0; j < q - 1; ++j) {
                const int row = q + j;
                d.coef(row, diag_entry_index(j + 1, q)) += 1.0;
                d.coef(row, diag_entry_index(j + 2, q)) += 1.0;
                d.coef(row, od(j + 1, j + 2)) = 1.0;
            }
            return d;
        }
        case Family::BorlandBouchaud: {
            d.coef = Eigen::MatrixXd::Zero(q, ne);
            // g_bb(l) enters every entry of the leading l x l block
            for (int l = 1; l <= q; ++l) {
                for (int a = 1; a <= l; ++a) {
                    d.coef(l - 1, diag_entry_index(a, q)) = 1.0;
                    for (int b = a + 1; b <= l; ++b) d.coef(l - 1, od(a, b)) = 1.0;
                }
            }
            return d;
        }
        case Family::Zumbach: {
            const int nz = q / 2;
            d.coef = Eigen::MatrixXd::Zero(q + nz, ne);
            for (int t = 1; t <= q; ++t) d.coef(t - 1, diag_entry_index(t, q)) = 1.0;
            for (int a = 1; a <= q; ++a)
                for (int b = a + 1; b <= q; ++b) {
                    const int lo = std::max(a, (b + 1) / 2);
                    const int hi = std::min(b - 1, nz);
                    for (int l = lo; l <= hi; ++l) d.coef(q + l - 1, od(a, b)) += 1.0;
                }
            return d;
        }
        case Family::LongTrend: {
            d.coef = Eigen::MatrixXd::Zero(2 * q - 1, ne);
            for (int t = 1; t <= q; ++t) d.coef(t - 1, diag_entry_index(t, q)) = 1.0;
            for (int j = 1; j <= q - 1; ++j) d.coef(q + j - 1, od(1, j + 1)) = 0.5;
            return d;
        }
        case Family::Composite: {
            OffDiagDesign off = offdiag_design(Family::Composite, q, spec.parts);
            d.coef = Eigen::MatrixXd::Zero(q + off.n_params(), ne);
            for (int t = 1; t <= q; ++t) d.coef(t - 1, diag_entry_index(t, q)) = 1.0;
            d.coef.bottomRightCorner(off.n_params(), n_offdiag_entries(q)) = off.coef;
            return d;
        }
        case Family::FigarchDiag:
            throw std::invalid_argument(
                "family_design_matrix: FIGARCH-diag parameters (g, alpha, q0) enter the kernel "
                "nonlinearly; no design matrix exists");
    }
    throw std::invalid_argument("unknown family");
}

Eigen::MatrixXd OffDiagDesign::apply(const Eigen::VectorXd& params) const {
    if (params.size() != coef.rows())
        throw std::invalid_argument("offdiag apply: size mismatch");
    Eigen::VectorXd entries = coef.transpose() * params;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q, q);
    for (int a = 1; a <= q; ++a)
        for (int b = a + 1; b <= q; ++b) {
            const double v = entries[offdiag_entry_index(a, b, q)];
            K(a - 1, b - 1) = K(b - 1, a - 1) = v;
        }
    return K;
}

OffDiagDesign offdiag_design(Family family, int q, const CompositeParts& parts) {
    if (q <= 0) throw std::invalid_argument("offdiag_design: q must be positive");
    const int ne = n_offdiag_entries(q);
    OffDiagDesign d;
    d.q = q;
    switch (family) {
        case Family::Arch:
        case Family::FigarchDiag: {
            d.coef = Eigen::MatrixXd::Zero(0, ne);
            return d;
        }
        case Family::TwoScale: {
            d.coef = Eigen::MatrixXd::Zero(q - 1, ne);
            for (int j = 0; j < q - 1; ++j) {
                d.coef(j, offdiag_entry_index(j + 1, j + 2, q)) = 1.0;
                d.param_names.push_back("g2(" + std::to_string(j) + ")");
            }
            return d;
        }
        case Family::BorlandBouchaud: {
            // mixed model: off-diagonal K(a,b) = G[max(a,b)], parameters G[2..q]
            d.coef = Eigen::MatrixXd::Zero(q - 1, ne);
            for (int m = 2; m <= q; ++m) {
                for (int a = 1; a < m; ++a) d.coef(m - 2, offdiag_entry_index(a, m, q)) = 1.0;
                d.param_names.push_back("G(" + std::to_string(m) + ")");
            }
            return d;
        }
        case Family::Zumbach: {
            const int nz = q / 2;
            d.coef = Eigen::MatrixXd::Zero(nz, ne);
            for (int a = 1; a <= q; ++a)
                for (int b = a + 1; b <= q; ++b) {
                    const int lo = std::max(a, (b + 1) / 2);
                    const int hi = std::min(b - 1, nz);
                    for (int l = lo; l <= hi; ++l)
                        d.coef(l - 1, offdiag_entry_index(a, b, q)) += 1.0;
                }
            for (int l = 1; l <= nz; ++l) d.param_names.push_back("gZ(" + std::to_string(l) + ")");
            return d;
        }
        case Family::LongTrend: {
            d.coef = Eigen::MatrixXd::Zero(q - 1, ne);
            for (int j = 1; j <= q - 1; ++j) {
                d.coef(j - 1, offdiag_entry_index(1, j + 1, q)) = 0.5;
                d.param_names.push_back("gLT(" + std::to_string(j) + ")");
            }
            return d;
        }
        case Family::Composite: {
            std::vector<OffDiagDesign> blocks;
            if (parts.two_scale) blocks.push_back(offdiag_design(Family::TwoScale, q));
            if (parts.borland_bouchaud)
                blocks.push_back(offdiag_design(Family::BorlandBouchaud, q));
            if (parts.zumbach) blocks.push_back(offdiag_design(Family::Zumbach, q));
            if (parts.long_trend) blocks.push_back(offdiag_design(Family::LongTrend, q));
            int rows = 0;
            for (const auto& b : blocks) rows += b.n_params();
            d.coef = Eigen::MatrixXd::Zero(rows, ne);
            int at = 0;
            for (const auto& b : blocks) {
                d.coef.middleRows(at, b.n_params()) = b.coef;
                d.param_names.insert(d.param_names.end(), b.param_names.begin(),
                                     b.param_names.end());
                at += b.n_params();
            }
            return d;
        }
    }
    throw std::invalid_argument("unknown family");
}

OffDiagDesign unconstrained_offdiag_design(int q) {
    const int ne = n_offdiag_entries(q);
    OffDiagDesign d;
    d.q = q;
    d.coef = Eigen::MatrixXd::Identity(ne, ne);
    for (int a = 1; a <= q; ++a)
        for (int b = a + 1; b <= q; ++b)
            d.param_names.push_back("K(" + std::to_string(a) + "," + std::to_string(b) + ")");
    return d;
}

}  // namespace qarch
