/**
 * Fit orchestration for the linear (lfAFT) and additive (afAFT) functional
 * AFT models: penalized maximum likelihood by BFGS at each smoothing
 * parameter on a log-spaced grid, with the smoothing parameter chosen by
 *
 *   GCV(lambda) = -(1/n) l_np(theta_lambda) / (1 - df(lambda)/n)^2,
 *   df(lambda)  = tr((C'WC + lambda D)^-1 C'WC).
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "funaft/basis.hpp"
#include "funaft/bfgs.hpp"
#include "funaft/dataset.hpp"
#include "funaft/design.hpp"
#include "funaft/errors.hpp"
#include "funaft/likelihood.hpp"
#include "funaft/log.hpp"

namespace funaft {

enum class ModelKind { linear, additive };

inline std::string to_string(ModelKind k) { return k == ModelKind::linear ? "lfaft" : "afaft"; }

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "lfaft") return ModelKind::linear;
    if (s == "afaft") return ModelKind::additive;
    throw ConfigError("unknown model '" + s + "' (expected lfaft or afaft)");
}

struct FitOptions {
    int k = 20;       // lfAFT basis size
    int ks = 10;      // afAFT basis size along s
    int kx = 10;      // afAFT basis size along x
    int degree = 3;
    Quadrature quadrature = Quadrature::automatic;
    int lambda_grid = 20;
    double lambda_min = 1.0;
    double lambda_max = 1e4;
    bool center_x = false;
    bool warm_start = true;
    bool scale_penalty = true;  // see penalty_scale_for
    OptimizerSettings optimizer;
};

/// Mean of B_k(X_i(s)) over training subjects on a reference s grid; turns the
/// fitted tensor surface into one whose empirical mean over subjects is zero at each s.
struct XMarginal {
    std::vector<double> grid;
    Eigen::MatrixXd basis_means;  // grid.size() x K_X

    bool empty() const { return grid.empty(); }

    Eigen::RowVectorXd at(double s) const {
        if (s <= grid.front()) return basis_means.row(0);
        if (s >= grid.back()) return basis_means.row(basis_means.rows() - 1);
        auto it = std::upper_bound(grid.begin(), grid.end(), s);
        const auto j = static_cast<Eigen::Index>(it - grid.begin());
        const double w = (s - grid[static_cast<std::size_t>(j - 1)]) /
                         (grid[static_cast<std::size_t>(j)] - grid[static_cast<std::size_t>(j - 1)]);
        return (1.0 - w) * basis_means.row(j - 1) + w * basis_means.row(j);
    }
};

/// Everything needed to turn a raw subject into a design row.
struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    Family family = Family::log_normal;
    SplineBasis s_basis;
    SplineBasis x_basis;  // additive only
    Quadrature quadrature = Quadrature::automatic;
    DomainMap domain_map;
    MeanCurve x_mean;  // subtracted from X when fitted with centering
    Eigen::RowVectorXd column_centers;
    std::vector<std::string> scalar_names;
    XMarginal x_marginal;
    double penalty_scale = 1.0;

    TensorBasis tensor() const { return {s_basis, x_basis}; }
    Eigen::Index num_scalar() const { return static_cast<Eigen::Index>(scalar_names.size()) + 1; }
    Eigen::Index num_functional() const {
        return kind == ModelKind::linear ? s_basis.num_basis : s_basis.num_basis * x_basis.num_basis;
    }
};

struct GcvPoint {
    double lambda = 0.0;
    double gcv = std::numeric_limits<double>::infinity();
    double df = 0.0;
    double loglik = 0.0;  // unpenalized, at the penalized estimate
    bool converged = false;
};

struct FittedModel {
    ModelSpec spec;
    ParamVector params;
    double lambda = 0.0;
    double df = 0.0;
    double loglik = 0.0;            // unpenalized
    double penalized_loglik = 0.0;
    std::vector<GcvPoint> gcv_path;
    bool converged = false;
    int n_iter = 0;
    std::size_t n_subjects = 0;

    Family family() const { return spec.family; }
    ModelKind kind() const { return spec.kind; }
};

/// Subject (on the original functional scale) to its full design row [1, Z, C].
inline Eigen::RowVectorXd design_row(const ModelSpec& spec, const Subject& subj, ClampCounter* clamps = nullptr) {
    if (subj.scalars.size() != spec.scalar_names.size()) {
        throw ValidationError("subject '" + subj.id + "': expected " + std::to_string(spec.scalar_names.size()) +
                              " scalar covariates, found " + std::to_string(subj.scalars.size()));
    }
    Subject s = subj;
    for (auto& v : s.grid) v = spec.domain_map.to_unit(v);
    if (!spec.x_mean.empty()) {
        for (std::size_t j = 0; j < s.grid.size(); ++j) s.values[j] -= spec.x_mean(s.grid[j]);
    }
    Eigen::RowVectorXd f;
    if (spec.kind == ModelKind::linear) {
        f = linear_row(s, spec.s_basis, spec.quadrature, clamps);
    } else {
        f = additive_row(s, spec.tensor(), spec.quadrature, clamps);
        if (spec.column_centers.size() == f.size()) f -= spec.column_centers;
    }
    Eigen::RowVectorXd row(spec.num_scalar() + f.size());
    row[0] = 1.0;
    for (std::size_t c = 0; c < s.scalars.size(); ++c) row[static_cast<Eigen::Index>(c) + 1] = s.scalars[c];
    row.tail(f.size()) = f;
    return row;
}

inline double linear_predictor(const FittedModel& model, const Subject& subj, ClampCounter* clamps = nullptr) {
    const auto row = design_row(model.spec, subj, clamps);
    Eigen::VectorXd beta(model.params.gamma.size() + model.params.b.size());
    beta << model.params.gamma, model.params.b;
    return row.dot(beta);
}

/// Starting point: intercept and log-scale from event-only moments of log Y.
inline Eigen::VectorXd initial_theta(const Response& resp, Eigen::Index num_scalar, Eigen::Index num_functional) {
    std::vector<double> logs;
    for (Eigen::Index i = 0; i < resp.size(); ++i) {
        if (resp.event[i] > 0.5) logs.push_back(std::log(resp.time[i]));
    }
    if (logs.empty()) throw ValidationError("all observations censored");
    double mean = 0.0;
    for (double v : logs) mean += v;
    mean /= static_cast<double>(logs.size());
    double var = 0.0;
    for (double v : logs) var += (v - mean) * (v - mean);
    double sd = logs.size() > 1 ? std::sqrt(var / static_cast<double>(logs.size() - 1)) : 1.0;
    if (!(sd > 1e-8)) sd = 1.0;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(num_scalar + num_functional + 1);
    theta[0] = mean;
    theta[theta.size() - 1] = std::log(sd);
    return theta;
}

/// Penalized maximum likelihood at one smoothing parameter.
inline OptimResult fit_fixed_lambda(const DesignMatrix& design, const Response& resp, Family family, double lambda,
                                    const Eigen::VectorXd& init, const OptimizerSettings& settings = {}) {
    const AftObjective obj(design, resp, family, lambda);
    auto fn = [&obj](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return obj.value_and_gradient(x, g); };
    return bfgs_maximize(fn, init, settings);
}

/// Trace of (C'WC + lambda D)^-1 C'WC with W the per-subject curvature in eta.
inline double effective_df(const DesignMatrix& design, const Response& resp, const ParamVector& params, Family family,
                           double lambda) {
    const AftObjective obj(design, resp, family, lambda);
    const Eigen::VectorXd theta = params.pack();
    const Eigen::VectorXd w = obj.curvature_weights(theta);
    const Eigen::MatrixXd& c = obj.full_design();
    const Eigen::MatrixXd a = c.transpose() * w.asDiagonal() * c;
    Eigen::MatrixXd m = a + lambda * design.penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    const auto diag = ldlt.vectorD().cwiseAbs();
    const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                          diag.minCoeff() <= 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    if (singular) {
        warn("C'WC + lambda D is singular; adding ridge jitter 1e-10 * trace");
        m.diagonal().array() += 1e-10 * m.trace();
        ldlt.compute(m);
    }
    return ldlt.solve(a).trace();
}

inline double effective_df(const DesignMatrix& design, const SurvivalDataset& data, const ParamVector& params,
                           Family family, double lambda) {
    return effective_df(design, make_response(data), params, family, lambda);
}

/// GCV from an unpenalized log-likelihood and effective df; +inf once df >= n.
inline double gcv_value(double loglik, double df, double n) {
    if (!(df < n)) return std::numeric_limits<double>::infinity();
    const double r = 1.0 - df / n;
    return -(loglik / n) / (r * r);
}

struct GcvFit {
    GcvPoint point;
    ParamVector params;
    double penalized = 0.0;
    int iterations = 0;
};

inline GcvFit gcv_score(const DesignMatrix& design, const Response& resp, Family family, double lambda,
                        const Eigen::VectorXd& init, const OptimizerSettings& settings = {}) {
    const auto opt = fit_fixed_lambda(design, resp, family, lambda, init, settings);
    const AftObjective obj(design, resp, family, lambda);
    GcvFit out;
    out.params = ParamVector::unpack(opt.argmax, design.num_scalar());
    out.penalized = opt.value;
    out.iterations = opt.iterations;
    out.point.lambda = lambda;
    out.point.converged = opt.converged;
    out.point.loglik = obj.loglik(opt.argmax);
    out.point.df = effective_df(design, resp, out.params, family, lambda);
    out.point.gcv = gcv_value(out.point.loglik, out.point.df, static_cast<double>(resp.size()));
    return out;
}

inline std::vector<double> lambda_grid(double lo, double hi, int size) {
    if (size < 2) throw ConfigError("lambda grid needs at least 2 points");
    if (!(lo > 0.0 && hi > lo)) throw ConfigError("lambda grid bounds must satisfy 0 < min < max");
    std::vector<double> g(static_cast<std::size_t>(size));
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < size; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (size - 1.0));
    return g;
}

struct LambdaSelection {
    std::vector<GcvPoint> path;
    GcvFit best;
};

/// Fits along the ascending lambda grid (warm-started by default) and keeps the GCV minimizer.
inline LambdaSelection select_lambda(const DesignMatrix& design, const Response& resp, Family family,
                                     const FitOptions& opt) {
    const auto grid = lambda_grid(opt.lambda_min, opt.lambda_max, opt.lambda_grid);
    const Eigen::VectorXd cold = initial_theta(resp, design.num_scalar(), design.num_functional());
    LambdaSelection sel;
    Eigen::VectorXd start = cold;
    bool have_best = false;
    std::string failures;
    for (double lambda : grid) {
        try {
            auto fit = gcv_score(design, resp, family, lambda, opt.warm_start ? start : cold, opt.optimizer);
            sel.path.push_back(fit.point);
            if (opt.warm_start) start = fit.params.pack();
            if (!have_best || fit.point.gcv < sel.best.point.gcv) {
                sel.best = fit;
                have_best = true;
            }
        } catch (const std::exception& e) {
            failures += " lambda=" + detail::format_double(lambda) + ": " + e.what() + ";";
            GcvPoint bad;
            bad.lambda = lambda;
            bad.loglik = std::numeric_limits<double>::quiet_NaN();
            bad.df = std::numeric_limits<double>::quiet_NaN();
            sel.path.push_back(bad);
        }
    }
    if (!have_best) throw NumericalError("every smoothing-parameter fit failed:" + failures);
    return sel;
}

inline FittedModel assemble_model(ModelSpec spec, const LambdaSelection& sel, std::size_t n) {
    FittedModel m;
    m.spec = std::move(spec);
    m.params = sel.best.params;
    m.lambda = sel.best.point.lambda;
    m.df = sel.best.point.df;
    m.loglik = sel.best.point.loglik;
    m.penalized_loglik = sel.best.penalized;
    m.gcv_path = sel.path;
    m.converged = sel.best.point.converged;
    m.n_iter = sel.best.iterations;
    m.n_subjects = n;
    return m;
}

namespace detail {

// Normalizes the domain and optionally centers X; records both in spec.
inline SurvivalDataset prepare_data(const SurvivalDataset& raw, ModelSpec& spec, bool center_x) {
    if (raw.num_events() == 0) throw ValidationError("all observations censored");
    SurvivalDataset data = normalize_domain(raw);
    spec.domain_map = data.domain_map;
    spec.scalar_names = data.scalar_names;
    if (center_x) {
        spec.x_mean = pointwise_mean(data);
        data = subtract_mean(data, spec.x_mean);
    }
    return data;
}

inline XMarginal x_marginal(const SurvivalDataset& data, const SplineBasis& xb) {
    XMarginal xm;
    const MeanCurve ref = pointwise_mean(data);  // only its grid is used
    xm.grid = ref.grid;
    xm.basis_means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xm.grid.size()), xb.num_basis);
    const bool shared = shares_grid(data);
    for (const auto& s : data.subjects) {
        for (std::size_t j = 0; j < xm.grid.size(); ++j) {
            const double x = shared ? s.values[j] : interpolate_curve(s, xm.grid[j]);
            xm.basis_means.row(static_cast<Eigen::Index>(j)) += eval_basis(xb, x).transpose();
        }
    }
    xm.basis_means /= static_cast<double>(data.size());
    return xm;
}

}  // namespace detail

/// Design matrix for `raw` under a frozen model specification. For the
/// training data this reproduces the fitting design exactly.
inline DesignMatrix design_for(const ModelSpec& spec, const SurvivalDataset& raw) {
    DesignMatrix dm;
    const auto n = static_cast<Eigen::Index>(raw.size());
    const Eigen::Index ns = spec.num_scalar();
    const Eigen::Index nf = spec.num_functional();
    dm.scalar_block.resize(n, ns);
    dm.functional_block.resize(n, nf);
    ClampCounter clamps;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = design_row(spec, raw.subjects[static_cast<std::size_t>(i)], &clamps);
        dm.scalar_block.row(i) = row.head(ns);
        dm.functional_block.row(i) = row.tail(nf);
    }
    if (clamps.count > 0) warn(std::to_string(clamps.count) + " basis evaluations clamped to the basis domain");
    dm.column_centers = spec.column_centers;
    if (spec.kind == ModelKind::linear) {
        const auto pen = make_penalty(spec.s_basis.num_basis);
        dm.penalty = pad_penalty(pen, ns);
        dm.penalty_null_dim = pen.null_space_dim;
    } else {
        const auto pen = make_tensor_penalty(spec.tensor());
        dm.penalty = pad_penalty(pen, ns);
        dm.penalty_null_dim = pen.null_space_dim;
    }
    set_penalty_scale(dm, spec.penalty_scale);
    return dm;
}

/// Linear functional AFT: log T = [1,Z]'gamma + int X(s) beta(s) ds + sigma eps.
inline FittedModel fit_lfaft(const SurvivalDataset& raw, Family family, const FitOptions& opt = {}) {
    ModelSpec spec;
    spec.kind = ModelKind::linear;
    spec.family = family;
    spec.quadrature = opt.quadrature;
    const SurvivalDataset data = detail::prepare_data(raw, spec, opt.center_x);
    if (opt.k < 3) throw ConfigError("K must be at least 3 for the difference penalty");
    spec.s_basis = make_bspline_basis({0.0, 1.0}, opt.k, opt.degree);
    DesignMatrix dm = build_linear_design(data, spec.s_basis, opt.quadrature);
    if (opt.scale_penalty) set_penalty_scale(dm, penalty_scale_for(dm));
    spec.penalty_scale = dm.penalty_scale;
    const Response resp = make_response(data);
    const auto sel = select_lambda(dm, resp, family, opt);
    return assemble_model(std::move(spec), sel, data.size());
}

/// Additive functional AFT: log T = [1,Z]'gamma + int F(s, X(s)) ds + sigma eps.
inline FittedModel fit_afaft(const SurvivalDataset& raw, Family family, const FitOptions& opt = {}) {
    if (opt.ks < 3 || opt.kx < 3) throw ConfigError("K_S and K_X must both be at least 3");
    ModelSpec spec;
    spec.kind = ModelKind::additive;
    spec.family = family;
    spec.quadrature = opt.quadrature;
    const SurvivalDataset data = detail::prepare_data(raw, spec, opt.center_x);
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -std::numeric_limits<double>::infinity();
    for (const auto& s : data.subjects) {
        for (double x : s.values) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
        }
    }
    spec.s_basis = make_bspline_basis({0.0, 1.0}, opt.ks, opt.degree);
    spec.x_basis = make_x_basis(xmin, xmax, opt.kx, opt.degree);
    DesignMatrix dm = build_additive_design(data, spec.tensor(), opt.quadrature, true);
    if (opt.scale_penalty) set_penalty_scale(dm, penalty_scale_for(dm));
    spec.penalty_scale = dm.penalty_scale;
    spec.column_centers = dm.column_centers;
    spec.x_marginal = detail::x_marginal(data, spec.x_basis);
    const Response resp = make_response(data);
    const auto sel = select_lambda(dm, resp, family, opt);
    return assemble_model(std::move(spec), sel, data.size());
}

inline FittedModel fit_model(const SurvivalDataset& raw, ModelKind kind, Family family, const FitOptions& opt = {}) {
    return kind == ModelKind::linear ? fit_lfaft(raw, family, opt) : fit_afaft(raw, family, opt);
}

}  // namespace funaft
