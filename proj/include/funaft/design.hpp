/**
 * Per-subject quadrature that collapses a sampled functional covariate into
 * spline features,
 *
 *   C_ik = sum_j q_ij X_i(s_ij) B_k(s_ij)                        (linear)
 *   C_i,jk = sum_m q_im B_j(s_im) B_k(X_i(s_im))                 (additive)
 *
 * joined with an intercept column and the scalar covariates.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "funaft/basis.hpp"
#include "funaft/dataset.hpp"
#include "funaft/errors.hpp"

namespace funaft {

enum class Quadrature { automatic, riemann, trapezoid };

inline std::string to_string(Quadrature q) {
    switch (q) {
        case Quadrature::automatic: return "auto";
        case Quadrature::riemann: return "riemann";
        case Quadrature::trapezoid: return "trapezoid";
    }
    return "auto";
}

inline Quadrature parse_quadrature(const std::string& name) {
    if (name == "auto") return Quadrature::automatic;
    if (name == "riemann") return Quadrature::riemann;
    if (name == "trapezoid") return Quadrature::trapezoid;
    throw ConfigError("unknown quadrature rule '" + name + "' (expected auto, riemann or trapezoid)");
}

/// True when consecutive spacings agree within rel_tol of the mean spacing.
inline bool is_even_grid(const std::vector<double>& grid, double rel_tol = 1e-9) {
    if (grid.size() < 2) return false;
    const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
    for (std::size_t j = 1; j < grid.size(); ++j) {
        if (std::abs((grid[j] - grid[j - 1]) - h) > rel_tol * h) return false;
    }
    return true;
}

inline Quadrature resolve_rule(const std::vector<double>& grid, Quadrature rule) {
    if (rule != Quadrature::automatic) return rule;
    return is_even_grid(grid) ? Quadrature::riemann : Quadrature::trapezoid;
}

inline std::vector<double> quadrature_weights(const std::vector<double>& grid, Quadrature kind) {
    const std::size_t p = grid.size();
    if (p < 2) throw ValidationError("quadrature needs at least 2 grid points");
    for (std::size_t j = 1; j < p; ++j) {
        if (!(grid[j] > grid[j - 1])) throw ValidationError("quadrature grid must be strictly increasing");
    }
    kind = resolve_rule(grid, kind);
    std::vector<double> q(p);
    if (kind == Quadrature::riemann) {
        std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(p));
        return q;
    }
    q[0] = 0.5 * (grid[1] - grid[0]);
    q[p - 1] = 0.5 * (grid[p - 1] - grid[p - 2]);
    for (std::size_t j = 1; j + 1 < p; ++j) q[j] = 0.5 * (grid[j + 1] - grid[j - 1]);
    return q;
}

struct DesignMatrix {
    Eigen::MatrixXd scalar_block;      // n x (d + 1), intercept first
    Eigen::MatrixXd functional_block;  // n x K (centered for additive designs)
    Eigen::RowVectorXd column_centers; // additive designs only
    Eigen::MatrixXd penalty;           // (d + 1 + K) square, zero outside the functional block
    int penalty_null_dim = 0;          // null-space dimension of the functional penalty
    double penalty_scale = 1.0;        // factor already applied to `penalty`

    Eigen::Index rows() const { return scalar_block.rows(); }
    Eigen::Index num_scalar() const { return scalar_block.cols(); }
    Eigen::Index num_functional() const { return functional_block.cols(); }
    Eigen::Index num_columns() const { return num_scalar() + num_functional(); }

    Eigen::MatrixXd full() const {
        Eigen::MatrixXd c(rows(), num_columns());
        c << scalar_block, functional_block;
        return c;
    }
};

inline Eigen::MatrixXd pad_penalty(const PenaltyMatrix& p, Eigen::Index num_scalar) {
    const Eigen::Index k = p.matrix.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_scalar + k, num_scalar + k);
    out.bottomRightCorner(k, k) = p.matrix;
    return out;
}

/// Factor that puts the functional penalty on the scale of one observation's
/// information: tr(C'C) / (n tr(D)) over the functional block. With it, lambda
/// reads as a count of observation-equivalents and the same lambda grid suits
/// designs whose columns differ in magnitude by orders (tensor versus linear).
inline double penalty_scale_for(const DesignMatrix& dm) {
    const Eigen::Index nf = dm.num_functional();
    const double tr_d = dm.penalty.bottomRightCorner(nf, nf).trace() / dm.penalty_scale;
    const double tr_c = dm.functional_block.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(dm.rows(), 1));
    if (!(tr_d > 0.0) || !(tr_c > 0.0)) return 1.0;
    return tr_c / tr_d;
}

/// Rescales the penalty so that its total factor becomes `scale`.
inline void set_penalty_scale(DesignMatrix& dm, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("penalty scale must be positive and finite");
    dm.penalty *= scale / dm.penalty_scale;
    dm.penalty_scale = scale;
}

inline Eigen::MatrixXd scalar_design(const SurvivalDataset& data) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto d = static_cast<Eigen::Index>(data.num_scalars());
    Eigen::MatrixXd z(n, d + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = data.subjects[static_cast<std::size_t>(i)];
        z(i, 0) = 1.0;
        for (Eigen::Index c = 0; c < d; ++c) z(i, c + 1) = s.scalars[static_cast<std::size_t>(c)];
    }
    return z;
}

/// Linear features for one subject whose grid is already on the basis domain.
inline Eigen::RowVectorXd linear_row(const Subject& subj, const SplineBasis& basis, Quadrature rule,
                                     ClampCounter* clamps = nullptr) {
    const auto q = quadrature_weights(subj.grid, rule);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(basis.num_basis);
    double local[32];
    for (std::size_t j = 0; j < subj.grid.size(); ++j) {
        const double s = clamp_to_domain(basis, subj.grid[j], clamps);
        const int first = eval_nonzero(basis, s, local);
        const double w = q[j] * subj.values[j];
        for (int r = 0; r <= basis.degree; ++r) row[first + r] += w * local[r];
    }
    return row;
}

/// Uncentered additive features for one subject.
inline Eigen::RowVectorXd additive_row(const Subject& subj, const TensorBasis& tb, Quadrature rule,
                                       ClampCounter* clamps = nullptr) {
    const auto q = quadrature_weights(subj.grid, rule);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(tb.num_basis());
    double bs[32];
    double bx[32];
    for (std::size_t m = 0; m < subj.grid.size(); ++m) {
        const double s = clamp_to_domain(tb.s_basis, subj.grid[m], clamps);
        const double x = clamp_to_domain(tb.x_basis, subj.values[m], clamps);
        const int fs = eval_nonzero(tb.s_basis, s, bs);
        const int fx = eval_nonzero(tb.x_basis, x, bx);
        for (int a = 0; a <= tb.s_basis.degree; ++a) {
            const double w = q[m] * bs[a];
            for (int c = 0; c <= tb.x_basis.degree; ++c) row[tb.column(fs + a, fx + c)] += w * bx[c];
        }
    }
    return row;
}

inline void require_unit_domain(const SurvivalDataset& data) {
    if (data.domain.lo < -1e-12 || data.domain.hi > 1.0 + 1e-12) {
        throw ValidationError("functional domain must be normalized to [0,1] before building a design");
    }
}

inline DesignMatrix build_linear_design(const SurvivalDataset& data, const SplineBasis& basis, Quadrature rule) {
    require_unit_domain(data);
    DesignMatrix dm;
    dm.scalar_block = scalar_design(data);
    dm.functional_block.resize(static_cast<Eigen::Index>(data.size()), basis.num_basis);
    for (std::size_t i = 0; i < data.size(); ++i) {
        dm.functional_block.row(static_cast<Eigen::Index>(i)) = linear_row(data.subjects[i], basis, rule);
    }
    const auto pen = make_penalty(basis.num_basis);
    dm.penalty = pad_penalty(pen, dm.num_scalar());
    dm.penalty_null_dim = pen.null_space_dim;
    return dm;
}

/// Additive design. Columns are centered over subjects so the fitted surface
/// meets the empirical mean-zero constraint; the intercept absorbs the shift.
inline DesignMatrix build_additive_design(const SurvivalDataset& data, const TensorBasis& tb, Quadrature rule,
                                          bool center = true) {
    require_unit_domain(data);
    const auto& xd = tb.x_basis.domain;
    for (const auto& s : data.subjects) {
        for (double x : s.values) {
            if (!xd.contains(x)) {
                throw ValidationError("subject '" + s.id + "': functional value " + detail::format_double(x) +
                                      " lies outside the x-basis domain");
            }
        }
    }
    DesignMatrix dm;
    dm.scalar_block = scalar_design(data);
    dm.functional_block.resize(static_cast<Eigen::Index>(data.size()), tb.num_basis());
    for (std::size_t i = 0; i < data.size(); ++i) {
        dm.functional_block.row(static_cast<Eigen::Index>(i)) = additive_row(data.subjects[i], tb, rule);
    }
    if (center) {
        dm.column_centers = dm.functional_block.colwise().mean();
        dm.functional_block.rowwise() -= dm.column_centers;
    } else {
        dm.column_centers = Eigen::RowVectorXd::Zero(tb.num_basis());
    }
    const auto pen = make_tensor_penalty(tb);
    dm.penalty = pad_penalty(pen, dm.num_scalar());
    dm.penalty_null_dim = pen.null_space_dim;
    return dm;
}

/// Design restricted to a subset of rows (with repetition), as used by resampling.
inline DesignMatrix select_rows(const DesignMatrix& dm, const std::vector<std::size_t>& rows) {
    DesignMatrix out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.scalar_block.resize(n, dm.num_scalar());
    out.functional_block.resize(n, dm.num_functional());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        out.scalar_block.row(i) = dm.scalar_block.row(r);
        out.functional_block.row(i) = dm.functional_block.row(r);
    }
    out.column_centers = dm.column_centers;
    out.penalty = dm.penalty;
    out.penalty_null_dim = dm.penalty_null_dim;
    out.penalty_scale = dm.penalty_scale;
    return out;
}

}  // namespace funaft
