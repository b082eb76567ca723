/**
 * Coefficient reconstruction, survival prediction and interval estimation
 * for fitted functional AFT models.
 *
 * Coefficient functions are reported on the original functional scale: with
 * s = (u - offset) / scale the contribution int X(u) beta_u(u) du equals
 * int X(s) beta(s) ds when beta_u(u) = beta(s) / scale.
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "funaft/fitter.hpp"
#include "funaft/log.hpp"
#include "funaft/parallel.hpp"

namespace funaft {

struct CoefficientCurve {
    std::vector<double> s_grid;
    std::vector<double> beta_hat;
    std::vector<double> lower95;  // empty when no interval was computed
    std::vector<double> upper95;
    double exp_integral = 1.0;    // exp(int beta(s) ds), trapezoid on s_grid

    bool has_intervals() const { return !lower95.empty(); }
};

struct CoefficientSurface {
    std::vector<double> s_grid;
    std::vector<double> x_grid;
    Eigen::MatrixXd f_hat;  // rows follow s_grid, columns follow x_grid
};

struct SurvivalCurve {
    std::string id;
    std::vector<double> t_grid;
    std::vector<double> s_hat;
};

struct ParamInterval {
    std::string name;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct IntervalResult {
    CoefficientCurve curve;
    std::vector<ParamInterval> params;  // gamma entries, then sigma
    std::string method;
    std::size_t redraws = 0;          // bootstrap resamples redrawn for lack of events
    std::size_t nonconverged = 0;     // bootstrap refits that stopped early
};

inline std::vector<double> unit_grid(int n_points) {
    if (n_points < 2) throw ConfigError("need at least 2 grid points");
    std::vector<double> g(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n_points - 1.0);
    return g;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double total = 0.0;
    for (std::size_t j = 1; j < x.size(); ++j) total += 0.5 * (x[j] - x[j - 1]) * (y[j] + y[j - 1]);
    return total;
}

inline void require_linear(const FittedModel& m, const char* what) {
    if (m.kind() != ModelKind::linear) throw ModelTypeError(std::string(what) + " requires a linear (lfaft) model");
}

/// beta(s) on the normalized scale at each grid point of [0,1].
inline std::vector<double> beta_on_unit_grid(const SplineBasis& basis, const Eigen::VectorXd& b,
                                             const std::vector<double>& grid01) {
    std::vector<double> out(grid01.size());
    for (std::size_t j = 0; j < grid01.size(); ++j) out[j] = eval_basis(basis, grid01[j]).dot(b);
    return out;
}

inline CoefficientCurve coef_curve(const FittedModel& model, int n_points = 101) {
    require_linear(model, "coef_curve");
    const auto grid01 = unit_grid(n_points);
    const auto beta01 = beta_on_unit_grid(model.spec.s_basis, model.params.b, grid01);
    const auto& map = model.spec.domain_map;
    CoefficientCurve c;
    c.s_grid.resize(grid01.size());
    c.beta_hat.resize(grid01.size());
    for (std::size_t j = 0; j < grid01.size(); ++j) {
        c.s_grid[j] = map.to_original(grid01[j]);
        c.beta_hat[j] = beta01[j] / map.scale;
    }
    c.exp_integral = std::exp(trapezoid(c.s_grid, c.beta_hat));
    return c;
}

/// Surface with the empirical x-marginal mean removed at every s.
inline CoefficientSurface coef_surface(const FittedModel& model, int n_s = 51, int n_x = 51,
                                       ClampCounter* clamps = nullptr) {
    if (model.kind() != ModelKind::additive) throw ModelTypeError("coef_surface requires an additive (afaft) model");
    const auto& sb = model.spec.s_basis;
    const auto& xb = model.spec.x_basis;
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> coef(
        model.params.b.data(), sb.num_basis, xb.num_basis);
    const auto s01 = unit_grid(n_s);
    CoefficientSurface out;
    out.x_grid.resize(static_cast<std::size_t>(n_x));
    for (int k = 0; k < n_x; ++k) {
        out.x_grid[static_cast<std::size_t>(k)] = xb.domain.lo + xb.domain.length() * k / (n_x - 1.0);
    }
    Eigen::MatrixXd bx(n_x, xb.num_basis);
    for (int k = 0; k < n_x; ++k) bx.row(k) = eval_basis(xb, out.x_grid[static_cast<std::size_t>(k)], clamps).transpose();
    out.f_hat.resize(n_s, n_x);
    const double scale = model.spec.domain_map.scale;
    for (int j = 0; j < n_s; ++j) {
        const double s = s01[static_cast<std::size_t>(j)];
        out.s_grid.push_back(model.spec.domain_map.to_original(s));
        const Eigen::RowVectorXd w = eval_basis(sb, s).transpose() * coef;  // length K_X
        double shift = 0.0;
        if (!model.spec.x_marginal.empty()) shift = w.dot(model.spec.x_marginal.at(s));
        for (int k = 0; k < n_x; ++k) out.f_hat(j, k) = (w.dot(bx.row(k)) - shift) / scale;
    }
    return out;
}

/// Fitted survival curve for one subject; t = 0 maps to 1.
inline SurvivalCurve predict_survival(const FittedModel& model, const Subject& subject, const std::vector<double>& t_grid,
                                      ClampCounter* clamps = nullptr) {
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        if (t_grid[j] < 0.0 || !std::isfinite(t_grid[j])) throw ValidationError("prediction times must be nonnegative");
        if (j > 0 && !(t_grid[j] > t_grid[j - 1])) throw ValidationError("prediction times must be increasing");
    }
    const double eta = linear_predictor(model, subject, clamps);
    const double sigma = model.params.sigma();
    SurvivalCurve c;
    c.id = subject.id;
    c.t_grid = t_grid;
    c.s_hat.reserve(t_grid.size());
    for (double t : t_grid) c.s_hat.push_back(survival(model.family(), t, eta, sigma));
    return c;
}

/// Type-7 sample quantile of an unsorted vector.
inline double quantile(std::vector<double> v, double prob) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace detail {

inline std::vector<ParamInterval> point_params(const FittedModel& m) {
    std::vector<ParamInterval> out;
    for (Eigen::Index c = 0; c < m.params.gamma.size(); ++c) {
        const std::string name = c == 0 ? "intercept" : m.spec.scalar_names[static_cast<std::size_t>(c - 1)];
        out.push_back({name, m.params.gamma[c], m.params.gamma[c], m.params.gamma[c]});
    }
    out.push_back({"sigma", m.params.sigma(), m.params.sigma(), m.params.sigma()});
    return out;
}

}  // namespace detail

/// Nonparametric bootstrap over subjects with the smoothing parameter held at
/// the fitted value. Percentile 95% intervals. Resample r draws from its own
/// generator derived from (seed, r), so results do not depend on `jobs`.
inline IntervalResult bootstrap_ci(const FittedModel& model, const SurvivalDataset& data, int num_resamples,
                                   std::uint64_t seed, int jobs = 1, int n_points = 101) {
    if (num_resamples < 50) throw ConfigError("bootstrap needs at least 50 resamples");
    if (data.size() != model.n_subjects && model.n_subjects != 0) {
        warn("bootstrap data size differs from the training set size recorded in the model");
    }
    const DesignMatrix design = design_for(model.spec, data);
    const Response resp = make_response(data);
    const std::size_t n = data.size();
    Eigen::VectorXd start(model.params.size());
    start = model.params.pack();

    std::vector<Eigen::VectorXd> thetas(static_cast<std::size_t>(num_resamples));
    std::vector<std::size_t> redraws(thetas.size(), 0);
    std::vector<char> converged(thetas.size(), 1);
    parallel_for(thetas.size(), jobs, [&](std::size_t r) {
        auto rng = stream_rng(seed, r);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> rows(n);
        for (;;) {
            bool any_event = false;
            for (auto& i : rows) {
                i = pick(rng);
                any_event = any_event || resp.event[static_cast<Eigen::Index>(i)] > 0.5;
            }
            if (any_event) break;
            ++redraws[r];
        }
        const DesignMatrix boot = select_rows(design, rows);
        Response br;
        br.time.resize(static_cast<Eigen::Index>(n));
        br.event.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            br.time[static_cast<Eigen::Index>(i)] = resp.time[static_cast<Eigen::Index>(rows[i])];
            br.event[static_cast<Eigen::Index>(i)] = resp.event[static_cast<Eigen::Index>(rows[i])];
        }
        const auto opt = fit_fixed_lambda(boot, br, model.family(), model.lambda, start);
        thetas[r] = opt.argmax;
        converged[r] = opt.converged ? 1 : 0;
    });

    IntervalResult res;
    res.method = "bootstrap-percentile";
    for (auto c : redraws) res.redraws += c;
    for (auto c : converged) res.nonconverged += c ? 0 : 1;
    if (res.redraws > 0) warn(std::to_string(res.redraws) + " bootstrap resamples redrawn for lack of events");

    const Eigen::Index ns = model.params.gamma.size();
    auto interval = [&](auto&& extract) {
        std::vector<double> v;
        v.reserve(thetas.size());
        for (const auto& t : thetas) v.push_back(extract(t));
        return std::pair{quantile(v, 0.025), quantile(v, 0.975)};
    };
    res.params = detail::point_params(model);
    for (Eigen::Index c = 0; c < ns; ++c) {
        auto [lo, hi] = interval([&](const Eigen::VectorXd& t) { return t[c]; });
        res.params[static_cast<std::size_t>(c)].lower = lo;
        res.params[static_cast<std::size_t>(c)].upper = hi;
    }
    {
        auto [lo, hi] = interval([](const Eigen::VectorXd& t) { return std::exp(t[t.size() - 1]); });
        res.params.back().lower = lo;
        res.params.back().upper = hi;
    }
    if (model.kind() == ModelKind::linear) {
        res.curve = coef_curve(model, n_points);
        const auto grid01 = unit_grid(n_points);
        const Eigen::MatrixXd basis = eval_basis_matrix(model.spec.s_basis, grid01);
        const Eigen::Index nb = model.params.b.size();
        Eigen::MatrixXd curves(static_cast<Eigen::Index>(thetas.size()), n_points);
        for (std::size_t r = 0; r < thetas.size(); ++r) {
            curves.row(static_cast<Eigen::Index>(r)) = (basis * thetas[r].segment(ns, nb)).transpose() /
                                                       model.spec.domain_map.scale;
        }
        for (Eigen::Index j = 0; j < n_points; ++j) {
            std::vector<double> col(curves.col(j).data(), curves.col(j).data() + curves.rows());
            res.curve.lower95.push_back(quantile(col, 0.025));
            res.curve.upper95.push_back(quantile(col, 0.975));
        }
    }
    return res;
}

/// Wald intervals from the observed information of the penalized
/// log-likelihood at the fitted smoothing parameter.
inline IntervalResult wald_ci(const FittedModel& model, const SurvivalDataset& data, int n_points = 101) {
    const DesignMatrix design = design_for(model.spec, data);
    const Response resp = make_response(data);
    const AftObjective obj(design, resp, model.family(), model.lambda);
    const Eigen::MatrixXd info = -obj.hessian(model.params.pack());
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Hessian of the penalized log-likelihood is not negative definite; use bootstrap intervals");
    }
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    constexpr double z975 = 1.959963984540054;

    IntervalResult res;
    res.method = "wald";
    res.params = detail::point_params(model);
    const Eigen::Index ns = model.params.gamma.size();
    for (Eigen::Index c = 0; c < ns; ++c) {
        const double se = std::sqrt(std::max(0.0, cov(c, c)));
        res.params[static_cast<std::size_t>(c)].lower = model.params.gamma[c] - z975 * se;
        res.params[static_cast<std::size_t>(c)].upper = model.params.gamma[c] + z975 * se;
    }
    const Eigen::Index last = cov.rows() - 1;
    const double se_ls = std::sqrt(std::max(0.0, cov(last, last)));
    res.params.back().lower = std::exp(model.params.log_sigma - z975 * se_ls);
    res.params.back().upper = std::exp(model.params.log_sigma + z975 * se_ls);

    if (model.kind() == ModelKind::linear) {
        res.curve = coef_curve(model, n_points);
        const auto grid01 = unit_grid(n_points);
        const Eigen::Index nb = model.params.b.size();
        const Eigen::MatrixXd cov_b = cov.block(ns, ns, nb, nb);
        const double scale = model.spec.domain_map.scale;
        for (std::size_t j = 0; j < grid01.size(); ++j) {
            const Eigen::VectorXd row = eval_basis(model.spec.s_basis, grid01[j]);
            const double var = std::max(0.0, row.dot(cov_b * row));
            const double se = std::sqrt(var) / scale;
            res.curve.lower95.push_back(res.curve.beta_hat[j] - z975 * se);
            res.curve.upper95.push_back(res.curve.beta_hat[j] + z975 * se);
        }
    }
    return res;
}

}  // namespace funaft
