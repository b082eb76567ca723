/**
 * Synthetic data under five data-generating models:
 *
 *   lfaft_lognormal    log T = 0.5 + int X beta + 0.5 eps,   eps ~ N(0,1)
 *   lfaft_loglogistic  log T = 0.5 + int X beta + 0.5 eps,   eps ~ Logistic(0,1)
 *   cox_linear         S(t) = exp(-exp(eta) L0(t)),  eta = int X beta
 *   afaft_lognormal    log T = 0.5 + int F(s, X(s)) ds + 0.5 eps,  F = 0.05 x^2 s
 *   cox_additive       S(t) = exp(-exp(eta) L0(t)),  eta = int F(s, X(s)) ds, F = -0.05 x^2 s
 *
 * with beta(s) = 0.3 - (s - 0.2)^2, Weibull cumulative baseline
 * L0(t) = (t / b)^a, integrals by 1/p weights on the even p-point grid over
 * [0,1], and censoring C ~ Uniform(0, u).
 *
 * Functional covariates are Karhunen-Loeve expansions with independent
 * normal scores.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "funaft/basis.hpp"
#include "funaft/dataset.hpp"
#include "funaft/errors.hpp"
#include "funaft/likelihood.hpp"
#include "funaft/parallel.hpp"

namespace funaft {

enum class Dgp { lfaft_lognormal, lfaft_loglogistic, cox_linear, afaft_lognormal, cox_additive };

inline const std::vector<std::string>& dgp_names() {
    static const std::vector<std::string> names{"lfaft_lognormal", "lfaft_loglogistic", "cox_linear",
                                                "afaft_lognormal", "cox_additive"};
    return names;
}

inline std::string to_string(Dgp d) { return dgp_names()[static_cast<std::size_t>(d)]; }

inline Dgp parse_dgp(const std::string& name) {
    const auto& names = dgp_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Dgp>(i);
    }
    std::string valid;
    for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown data-generating model '" + name + "'; valid names: " + valid);
}

inline bool has_linear_truth(Dgp d) {
    return d == Dgp::lfaft_lognormal || d == Dgp::lfaft_loglogistic || d == Dgp::cox_linear;
}

inline bool is_cox(Dgp d) { return d == Dgp::cox_linear || d == Dgp::cox_additive; }

/// Fourier function number m on [0,1]: 1, sqrt2 sin(2 pi s), sqrt2 cos(2 pi s), sqrt2 sin(4 pi s), ...
inline double fourier_function(int m, double s) {
    if (m == 0) return 1.0;
    const int k = (m + 1) / 2;
    const double arg = 2.0 * std::numbers::pi * k * s;
    return std::numbers::sqrt2 * (m % 2 == 1 ? std::sin(arg) : std::cos(arg));
}

struct FpcGenerator {
    std::function<double(double)> mean;                         // empty means zero
    std::vector<std::function<double(double)>> eigenfunctions;  // empty means Fourier
    std::vector<double> eigenvalues;
    double noise_sd = 0.0;

    int num_components() const { return static_cast<int>(eigenvalues.size()); }

    double eigenfunction(int m, double s) const {
        if (eigenfunctions.empty()) return fourier_function(m, s);
        return eigenfunctions[static_cast<std::size_t>(m)](s);
    }

    double mean_at(double s) const { return mean ? mean(s) : 0.0; }

    void validate() const {
        if (eigenvalues.empty()) throw ConfigError("generator needs at least one eigenvalue");
        for (std::size_t m = 0; m < eigenvalues.size(); ++m) {
            if (!(eigenvalues[m] > 0.0)) throw ConfigError("eigenvalues must be strictly positive");
            if (m > 0 && eigenvalues[m] > eigenvalues[m - 1]) throw ConfigError("eigenvalues must be nonincreasing");
        }
        if (!eigenfunctions.empty() && eigenfunctions.size() != eigenvalues.size()) {
            throw ConfigError("eigenfunction and eigenvalue counts differ");
        }
        if (noise_sd < 0.0) throw ConfigError("noise_sd must be nonnegative");
    }

    /// J Fourier eigenfunctions with eigenvalues leading * ratio^m.
    static FpcGenerator fourier(int num_components = 8, double leading = 100.0, double ratio = 0.5) {
        FpcGenerator g;
        for (int m = 0; m < num_components; ++m) g.eigenvalues.push_back(leading * std::pow(ratio, m));
        return g;
    }
};

/// Generator calibrated so the default censoring bounds give roughly 30%
/// censoring: the linear AFT models use a constant mean curve of 25.
inline FpcGenerator default_generator(Dgp dgp) {
    auto g = FpcGenerator::fourier();
    if (dgp == Dgp::lfaft_lognormal || dgp == Dgp::lfaft_loglogistic) g.mean = [](double) { return 25.0; };
    return g;
}

inline std::vector<double> even_grid(int p) {
    std::vector<double> g(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) g[static_cast<std::size_t>(j)] = static_cast<double>(j) / (p - 1.0);
    return g;
}

struct FunctionalSample {
    std::vector<double> grid;
    Eigen::MatrixXd curves;  // n x p
    Eigen::MatrixXd scores;  // n x J
};

inline FunctionalSample gen_functional(const FpcGenerator& gen, int n, int p, std::mt19937_64& rng) {
    gen.validate();
    if (n < 1 || p < 2) throw ConfigError("need n >= 1 curves on p >= 2 points");
    const int nc = gen.num_components();
    FunctionalSample out;
    out.grid = even_grid(p);
    Eigen::MatrixXd phi(nc, p);
    Eigen::RowVectorXd mu(p);
    for (int j = 0; j < p; ++j) {
        const double s = out.grid[static_cast<std::size_t>(j)];
        mu[j] = gen.mean_at(s);
        for (int m = 0; m < nc; ++m) phi(m, j) = gen.eigenfunction(m, s);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    out.scores.resize(n, nc);
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < nc; ++m) out.scores(i, m) = normal(rng) * std::sqrt(gen.eigenvalues[static_cast<std::size_t>(m)]);
    }
    out.curves = out.scores * phi;
    out.curves.rowwise() += mu;
    if (gen.noise_sd > 0.0) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) out.curves(i, j) += gen.noise_sd * normal(rng);
        }
    }
    return out;
}

inline FunctionalSample gen_functional(const FpcGenerator& gen, int n, int p, std::uint64_t seed) {
    auto rng = stream_rng(seed, 0, 1);
    return gen_functional(gen, n, p, rng);
}

struct Truth {
    std::function<double(double)> beta;             // linear models
    std::function<double(double, double)> surface;  // additive models
};

inline double default_beta(double s) { return 0.3 - (s - 0.2) * (s - 0.2); }

inline Truth default_truth(Dgp dgp) {
    Truth t;
    switch (dgp) {
        case Dgp::lfaft_lognormal:
        case Dgp::lfaft_loglogistic:
        case Dgp::cox_linear: t.beta = default_beta; break;
        case Dgp::afaft_lognormal: t.surface = [](double s, double x) { return 0.05 * x * x * s; }; break;
        case Dgp::cox_additive: t.surface = [](double s, double x) { return -0.05 * x * x * s; }; break;
    }
    return t;
}

/// beta(s) = sum_k coef_k B_k(s) on a cubic basis with equally spaced knots over [0,1].
inline Truth spline_truth(const std::vector<double>& coefs) {
    const auto basis = make_bspline_basis({0.0, 1.0}, static_cast<int>(coefs.size()), 3);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    Truth t;
    t.beta = [basis, b](double s) { return eval_basis(basis, s).dot(b); };
    return t;
}

struct SimulationConfig {
    Dgp dgp = Dgp::lfaft_lognormal;
    int n = 100;
    int p = 100;
    double u = 250.0;
    std::uint64_t seed = 1;
    Truth truth;
    double intercept = 0.5;
    double scale = 0.5;
    double weibull_shape = 1.5;
    double weibull_scale = 50.0;

    /// Defaults for a model: u = 250 for linear, 2000 for additive models.
    static SimulationConfig defaults(Dgp dgp, int n = 100, int p = 100, std::uint64_t seed = 1) {
        SimulationConfig c;
        c.dgp = dgp;
        c.n = n;
        c.p = p;
        c.u = has_linear_truth(dgp) ? 250.0 : 2000.0;
        c.seed = seed;
        c.truth = default_truth(dgp);
        return c;
    }

    void validate() const {
        if (n < 10) throw ConfigError("simulation needs n >= 10");
        if (p < 10) throw ConfigError("simulation needs p >= 10");
        if (!(u > 0.0)) throw ConfigError("censoring bound u must be positive");
        if (has_linear_truth(dgp) && !truth.beta) throw ConfigError("linear model needs a beta(s) truth");
        if (!has_linear_truth(dgp) && !truth.surface) throw ConfigError("additive model needs an F(s,x) truth");
        if (!(weibull_shape > 0.0 && weibull_scale > 0.0)) throw ConfigError("Weibull baseline must be positive");
    }
};

/// True survival probability at t given the generating linear predictor.
inline double true_survival(const SimulationConfig& cfg, double eta, double t) {
    if (t <= 0.0) return 1.0;
    switch (cfg.dgp) {
        case Dgp::lfaft_lognormal:
        case Dgp::afaft_lognormal: return survival(Family::log_normal, t, eta, cfg.scale);
        case Dgp::lfaft_loglogistic: return survival(Family::log_logistic, t, eta, cfg.scale);
        case Dgp::cox_linear:
        case Dgp::cox_additive:
            return std::exp(-std::exp(eta) * std::pow(t / cfg.weibull_scale, cfg.weibull_shape));
    }
    return 1.0;
}

struct SimulatedData {
    SurvivalDataset data;
    Eigen::VectorXd eta;         // AFT location (with intercept) or Cox log relative hazard
    Eigen::VectorXd event_time;  // uncensored T
    FunctionalSample sample;
    double censoring_rate = 0.0;
};

/// Functional part of the true linear predictor by 1/p weights.
inline double true_functional_effect(const SimulationConfig& cfg, const std::vector<double>& grid,
                                     const Eigen::RowVectorXd& curve) {
    const double q = 1.0 / static_cast<double>(grid.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = curve[static_cast<Eigen::Index>(j)];
        acc += has_linear_truth(cfg.dgp) ? x * cfg.truth.beta(grid[j]) : cfg.truth.surface(grid[j], x);
    }
    return q * acc;
}

inline SimulatedData simulate_dgp(const SimulationConfig& cfg, const FpcGenerator& gen) {
    cfg.validate();
    SimulatedData out;
    auto curve_rng = stream_rng(cfg.seed, 0, 1);
    auto time_rng = stream_rng(cfg.seed, 0, 2);
    auto cens_rng = stream_rng(cfg.seed, 0, 3);
    out.sample = gen_functional(gen, cfg.n, cfg.p, curve_rng);
    out.eta.resize(cfg.n);
    out.event_time.resize(cfg.n);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Subject> subjects;
    subjects.reserve(static_cast<std::size_t>(cfg.n));
    std::size_t censored = 0;
    for (int i = 0; i < cfg.n; ++i) {
        const double effect = true_functional_effect(cfg, out.sample.grid, out.sample.curves.row(i));
        double t = 0.0;
        if (is_cox(cfg.dgp)) {
            out.eta[i] = effect;
            double v = unif(time_rng);
            while (v <= 0.0) v = unif(time_rng);
            t = cfg.weibull_scale * std::pow(-std::log(v) * std::exp(-effect), 1.0 / cfg.weibull_shape);
        } else {
            out.eta[i] = cfg.intercept + effect;
            double eps;
            if (cfg.dgp == Dgp::lfaft_loglogistic) {
                double v = unif(time_rng);
                while (v <= 0.0) v = unif(time_rng);
                eps = std::log(v / (1.0 - v));
            } else {
                eps = normal(time_rng);
            }
            t = std::exp(out.eta[i] + cfg.scale * eps);
        }
        out.event_time[i] = t;
        double c = cfg.u * unif(cens_rng);
        while (c <= 0.0) c = cfg.u * unif(cens_rng);
        Subject s;
        char id[32];
        std::snprintf(id, sizeof id, "S%05d", i + 1);
        s.id = id;
        s.event = t <= c;
        s.time = s.event ? t : c;
        if (!s.event) ++censored;
        s.grid = out.sample.grid;
        s.values.resize(static_cast<std::size_t>(cfg.p));
        for (int j = 0; j < cfg.p; ++j) s.values[static_cast<std::size_t>(j)] = out.sample.curves(i, j);
        subjects.push_back(std::move(s));
    }
    out.censoring_rate = static_cast<double>(censored) / cfg.n;
    out.data = make_dataset(std::move(subjects), {}, false);
    return out;
}

inline SimulatedData simulate_dgp(const SimulationConfig& cfg) { return simulate_dgp(cfg, default_generator(cfg.dgp)); }

}  // namespace funaft
