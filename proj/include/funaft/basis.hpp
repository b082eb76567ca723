/**
 * Clamped B-spline bases on an interval, tensor products of two such bases,
 * and second-order difference penalties on their coefficients.
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <vector>

#include "funaft/dataset.hpp"
#include "funaft/errors.hpp"

namespace funaft {

struct SplineBasis {
    int degree = 3;
    int num_basis = 0;
    std::vector<double> knots;  // num_basis + degree + 1 entries, ends replicated degree + 1 times
    Interval domain;

    std::vector<double> interior_knots() const {
        return {knots.begin() + degree + 1, knots.end() - degree - 1};
    }
};

struct TensorBasis {
    SplineBasis s_basis;
    SplineBasis x_basis;

    int num_basis() const { return s_basis.num_basis * x_basis.num_basis; }
    // column of coefficient b_jk in the flattened layout
    int column(int j, int k) const { return j * x_basis.num_basis + k; }
};

struct PenaltyMatrix {
    Eigen::MatrixXd matrix;
    int null_space_dim = 0;
};

/// Counts evaluations that fell outside the basis domain and were clamped.
struct ClampCounter {
    std::size_t count = 0;
};

/// Knot vector with K - degree - 1 equally spaced interior knots.
inline SplineBasis make_bspline_basis(Interval domain, int num_basis, int degree = 3) {
    if (degree < 0) throw ConfigError("spline degree must be nonnegative");
    if (num_basis < degree + 1) {
        throw ConfigError("number of basis functions (" + std::to_string(num_basis) +
                          ") must be at least degree + 1 = " + std::to_string(degree + 1));
    }
    if (!(domain.length() > 0.0)) throw ConfigError("spline domain must have positive length");
    SplineBasis b;
    b.degree = degree;
    b.num_basis = num_basis;
    b.domain = domain;
    const int interior = num_basis - degree - 1;
    b.knots.reserve(static_cast<std::size_t>(num_basis + degree + 1));
    for (int i = 0; i <= degree; ++i) b.knots.push_back(domain.lo);
    for (int i = 1; i <= interior; ++i) {
        b.knots.push_back(domain.lo + domain.length() * static_cast<double>(i) / (interior + 1));
    }
    for (int i = 0; i <= degree; ++i) b.knots.push_back(domain.hi);
    return b;
}

/// Rebuilds a basis from serialized knots.
inline SplineBasis bspline_from_knots(std::vector<double> knots, int degree) {
    if (knots.size() < static_cast<std::size_t>(2 * degree + 2)) throw ConfigError("knot vector too short");
    if (!std::is_sorted(knots.begin(), knots.end())) throw ConfigError("knot vector must be nondecreasing");
    SplineBasis b;
    b.degree = degree;
    b.num_basis = static_cast<int>(knots.size()) - degree - 1;
    b.domain = {knots.front(), knots.back()};
    b.knots = std::move(knots);
    return b;
}

/// Knot span index mu with knots[mu] <= s < knots[mu + 1], restricted to the
/// spans that carry basis functions.
inline int find_span(const SplineBasis& b, double s) {
    const int last = b.num_basis - 1;
    if (s >= b.knots[static_cast<std::size_t>(last + 1)]) return last;
    auto it = std::upper_bound(b.knots.begin() + b.degree, b.knots.begin() + last + 1, s);
    return static_cast<int>(it - b.knots.begin()) - 1;
}

/// Nonzero basis values at s written into out[0..degree]; they belong to basis
/// functions span - degree .. span. Cox-de Boor triangle, no allocation beyond
/// the two small work arrays.
inline int eval_nonzero(const SplineBasis& b, double s, double* out) {
    const int p = b.degree;
    const int span = find_span(b, s);
    const auto& t = b.knots;
    double left[32];
    double right[32];
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = s - t[static_cast<std::size_t>(span + 1 - j)];
        right[j] = t[static_cast<std::size_t>(span + j)] - s;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double tmp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        out[j] = saved;
    }
    return span - p;
}

inline double clamp_to_domain(const SplineBasis& b, double s, ClampCounter* clamps) {
    if (s < b.domain.lo || s > b.domain.hi) {
        if (clamps) ++clamps->count;
        return std::clamp(s, b.domain.lo, b.domain.hi);
    }
    return s;
}

/// All K basis values at s. Points outside the domain are clamped to it.
inline Eigen::VectorXd eval_basis(const SplineBasis& b, double s, ClampCounter* clamps = nullptr) {
    if (b.degree > 30) throw ConfigError("spline degree above 30 is not supported");
    s = clamp_to_domain(b, s, clamps);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.num_basis);
    double local[32];
    const int first = eval_nonzero(b, s, local);
    for (int r = 0; r <= b.degree; ++r) v[first + r] = local[r];
    return v;
}

/// Basis matrix with one row per evaluation point.
inline Eigen::MatrixXd eval_basis_matrix(const SplineBasis& b, const std::vector<double>& points,
                                         ClampCounter* clamps = nullptr) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), b.num_basis);
    for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = eval_basis(b, points[i], clamps);
    return m;
}

/// (K-2) x K second-difference operator.
inline Eigen::MatrixXd second_difference(int num_basis) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(num_basis - 2, num_basis);
    for (int r = 0; r < num_basis - 2; ++r) {
        d(r, r) = 1.0;
        d(r, r + 1) = -2.0;
        d(r, r + 2) = 1.0;
    }
    return d;
}

inline PenaltyMatrix make_penalty(int num_basis) {
    if (num_basis < 3) throw ConfigError("second-difference penalty needs at least 3 basis functions");
    const Eigen::MatrixXd d2 = second_difference(num_basis);
    return {d2.transpose() * d2, 2};
}

inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// Kronecker-sum penalty D_S (x) I + I (x) D_X for coefficients laid out as
/// b[j * K_X + k]. Its null space is spanned by 1, j, k and j*k.
inline PenaltyMatrix make_tensor_penalty(const TensorBasis& tb) {
    const int ks = tb.s_basis.num_basis;
    const int kx = tb.x_basis.num_basis;
    if (ks < 3 || kx < 3) throw ConfigError("tensor penalty needs at least 3 basis functions in each direction");
    const auto ds = make_penalty(ks).matrix;
    const auto dx = make_penalty(kx).matrix;
    PenaltyMatrix p;
    p.matrix = kronecker(ds, Eigen::MatrixXd::Identity(kx, kx)) + kronecker(Eigen::MatrixXd::Identity(ks, ks), dx);
    if (p.matrix.rows() != tb.num_basis()) throw std::logic_error("tensor penalty dimension mismatch");
    p.null_space_dim = 4;
    return p;
}

/// Basis over the observed range of x values widened by 1% of the range on each side.
inline SplineBasis make_x_basis(double x_min, double x_max, int num_basis, int degree = 3) {
    double width = x_max - x_min;
    if (!(width > 0.0)) width = std::max(1.0, std::abs(x_min));
    const double pad = 0.01 * width;
    return make_bspline_basis({x_min - pad, x_max + pad}, num_basis, degree);
}

}  // namespace funaft
