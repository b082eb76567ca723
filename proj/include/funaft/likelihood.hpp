/**
 * Log-normal and log-logistic AFT error families and the penalized
 * log-likelihood
 *
 *   l(theta) = sum_i [ delta_i log f(Y_i) + (1 - delta_i) log S(Y_i) ] - lambda b' D b
 *
 * with theta = (gamma, b, log sigma) and eta_i = [1, Z_i] gamma + C_i b.
 *
 * Everything is written in terms of the standardized residual
 * z = (log t - eta) / sigma, so each family only has to supply the log of its
 * standard error density and survival function together with their first two
 * z-derivatives.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "funaft/dataset.hpp"
#include "funaft/design.hpp"
#include "funaft/errors.hpp"

namespace funaft {

enum class Family { log_normal, log_logistic };

inline std::string to_string(Family f) { return f == Family::log_normal ? "lognormal" : "loglogistic"; }

inline Family parse_family(const std::string& name) {
    if (name == "lognormal" || name == "log_normal") return Family::log_normal;
    if (name == "loglogistic" || name == "log_logistic") return Family::log_logistic;
    throw ConfigError("unknown family '" + name + "' (expected lognormal or loglogistic)");
}

struct ParamVector {
    Eigen::VectorXd gamma;  // intercept first
    Eigen::VectorXd b;
    double log_sigma = 0.0;

    double sigma() const { return std::exp(log_sigma); }
    Eigen::Index size() const { return gamma.size() + b.size() + 1; }

    Eigen::VectorXd pack() const {
        Eigen::VectorXd theta(size());
        theta << gamma, b, log_sigma;
        return theta;
    }

    static ParamVector unpack(const Eigen::VectorXd& theta, Eigen::Index num_scalar) {
        ParamVector p;
        const Eigen::Index nb = theta.size() - num_scalar - 1;
        p.gamma = theta.head(num_scalar);
        p.b = theta.segment(num_scalar, nb);
        p.log_sigma = theta[theta.size() - 1];
        return p;
    }
};

/// Observed times and event flags in design-row order.
struct Response {
    Eigen::VectorXd time;
    Eigen::VectorXd event;  // 1 = event, 0 = censored

    Eigen::Index size() const { return time.size(); }
};

inline Response make_response(const SurvivalDataset& data) {
    Response r;
    r.time.resize(static_cast<Eigen::Index>(data.size()));
    r.event.resize(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        r.time[static_cast<Eigen::Index>(i)] = data.subjects[i].time;
        r.event[static_cast<Eigen::Index>(i)] = data.subjects[i].event ? 1.0 : 0.0;
    }
    return r;
}

namespace detail {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double logistic_cdf(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Mills ratio (1 - Phi(z)) / phi(z) for large positive z by its continued fraction.
inline double mills_ratio_cf(double z) {
    double acc = z;
    for (int k = 60; k >= 1; --k) acc = z + k / acc;
    return 1.0 / acc;
}

/// log of the standard normal upper tail.
inline double log_normal_tail(double z) {
    if (z > 8.0) return -0.5 * z * z - kHalfLog2Pi + std::log(mills_ratio_cf(z));
    if (z < -8.0) return std::log1p(-0.5 * std::erfc(-z / std::numbers::sqrt2));
    return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
}

/// Inverse Mills ratio phi(z) / (1 - Phi(z)).
inline double normal_hazard(double z) {
    if (z > 8.0) return 1.0 / mills_ratio_cf(z);
    return std::exp(-0.5 * z * z - kHalfLog2Pi - log_normal_tail(z));
}

// value, first and second z-derivatives of a log standard density or survival
struct ZTerm {
    double value;
    double d1;
    double d2;
};

inline ZTerm std_log_density(Family f, double z) {
    if (f == Family::log_normal) return {-0.5 * z * z - kHalfLog2Pi, -z, -1.0};
    const double p = logistic_cdf(z);
    return {z - 2.0 * softplus(z), 1.0 - 2.0 * p, -2.0 * p * (1.0 - p)};
}

inline ZTerm std_log_survival(Family f, double z) {
    if (f == Family::log_normal) {
        const double h = normal_hazard(z);
        return {log_normal_tail(z), -h, -h * (h - z)};
    }
    const double p = logistic_cdf(z);
    return {-softplus(z), -p, -p * (1.0 - p)};
}

}  // namespace detail

inline double log_density(Family family, double t, double eta, double sigma) {
    if (!(t > 0.0)) throw ValidationError("log_density: time must be positive");
    if (!(sigma > 0.0)) throw ValidationError("log_density: sigma must be positive");
    const double logt = std::log(t);
    const double z = (logt - eta) / sigma;
    return -logt - std::log(sigma) + detail::std_log_density(family, z).value;
}

inline double log_survival(Family family, double t, double eta, double sigma) {
    if (!(t > 0.0)) throw ValidationError("log_survival: time must be positive");
    if (!(sigma > 0.0)) throw ValidationError("log_survival: sigma must be positive");
    return detail::std_log_survival(family, (std::log(t) - eta) / sigma).value;
}

/// S(t); t <= 0 gives 1.
inline double survival(Family family, double t, double eta, double sigma) {
    if (t <= 0.0) return 1.0;
    return std::exp(log_survival(family, t, eta, sigma));
}

/// Per-subject contribution and its derivatives w.r.t. eta and log sigma.
struct SubjectTerm {
    double loglik;
    double d_eta;
    double d_logsigma;
    double d2_eta;  // second derivative w.r.t. eta
};

inline SubjectTerm subject_term(Family family, double t, bool event, double eta, double log_sigma) {
    const double sigma = std::exp(log_sigma);
    const double logt = std::log(t);
    const double z = (logt - eta) / sigma;
    if (event) {
        const auto g = detail::std_log_density(family, z);
        return {-logt - log_sigma + g.value, -g.d1 / sigma, -1.0 - g.d1 * z, g.d2 / (sigma * sigma)};
    }
    const auto g = detail::std_log_survival(family, z);
    return {g.value, -g.d1 / sigma, -g.d1 * z, g.d2 / (sigma * sigma)};
}

/// Penalized log-likelihood over a fixed design. Holds references; the design
/// and response must outlive it.
class AftObjective {
public:
    AftObjective(const DesignMatrix& design, const Response& response, Family family, double lambda)
        : design_(design), response_(response), family_(family), lambda_(lambda), full_(design.full()) {
        if (response.size() != design.rows()) throw std::logic_error("design and response differ in row count");
        if (!(lambda >= 0.0)) throw ValidationError("smoothing parameter must be nonnegative");
    }

    Eigen::Index num_params() const { return full_.cols() + 1; }
    Eigen::Index num_scalar() const { return design_.num_scalar(); }
    Eigen::Index num_subjects() const { return full_.rows(); }
    Family family() const { return family_; }
    double lambda() const { return lambda_; }
    const Eigen::MatrixXd& full_design() const { return full_; }
    const DesignMatrix& design() const { return design_; }
    const Response& response() const { return response_; }

    Eigen::VectorXd eta(const Eigen::VectorXd& theta) const { return full_ * theta.head(full_.cols()); }

    double penalty(const Eigen::VectorXd& theta) const {
        const auto beta = theta.head(full_.cols());
        return lambda_ * beta.dot(design_.penalty * beta);
    }

    /// Unpenalized log-likelihood; -inf when any linear predictor is not finite.
    double loglik(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd e = eta(theta);
        const double ls = theta[theta.size() - 1];
        if (!std::isfinite(ls)) return -std::numeric_limits<double>::infinity();
        double total = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            if (!std::isfinite(e[i])) return -std::numeric_limits<double>::infinity();
            total += subject_term(family_, response_.time[i], response_.event[i] > 0.5, e[i], ls).loglik;
        }
        return std::isfinite(total) ? total : -std::numeric_limits<double>::infinity();
    }

    double value(const Eigen::VectorXd& theta) const {
        const double ll = loglik(theta);
        if (!std::isfinite(ll)) return ll;
        const double v = ll - penalty(theta);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    }

    /// Analytic gradient of value(); returns the value as well.
    double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
        const Eigen::Index p = full_.cols();
        const Eigen::VectorXd e = eta(theta);
        const double ls = theta[theta.size() - 1];
        grad.setZero(theta.size());
        Eigen::VectorXd d_eta(e.size());
        double total = 0.0;
        double d_ls = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            if (!std::isfinite(e[i]) || !std::isfinite(ls)) {
                grad.setConstant(std::numeric_limits<double>::quiet_NaN());
                return -std::numeric_limits<double>::infinity();
            }
            const auto term = subject_term(family_, response_.time[i], response_.event[i] > 0.5, e[i], ls);
            total += term.loglik;
            d_eta[i] = term.d_eta;
            d_ls += term.d_logsigma;
        }
        const auto beta = theta.head(p);
        const Eigen::VectorXd pb = design_.penalty * beta;
        grad.head(p) = full_.transpose() * d_eta - 2.0 * lambda_ * pb;
        grad[p] = d_ls;
        const double v = total - lambda_ * beta.dot(pb);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd g;
        value_and_gradient(theta, g);
        return g;
    }

    /// Hessian by central differences of the analytic gradient, symmetrized.
    Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const {
        const Eigen::Index n = theta.size();
        Eigen::MatrixXd h(n, n);
        Eigen::VectorXd tp = theta;
        Eigen::VectorXd gp;
        Eigen::VectorXd gm;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double step = 1e-5 * std::max(1.0, std::abs(theta[j]));
            tp[j] = theta[j] + step;
            value_and_gradient(tp, gp);
            tp[j] = theta[j] - step;
            value_and_gradient(tp, gm);
            tp[j] = theta[j];
            h.col(j) = (gp - gm) / (2.0 * step);
        }
        return 0.5 * (h + h.transpose());
    }

    /// W_ii = -d^2 l_i / d eta_i^2 at theta, for events and censored subjects alike.
    Eigen::VectorXd curvature_weights(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd e = eta(theta);
        const double ls = theta[theta.size() - 1];
        Eigen::VectorXd w(e.size());
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            w[i] = -subject_term(family_, response_.time[i], response_.event[i] > 0.5, e[i], ls).d2_eta;
        }
        return w;
    }

private:
    const DesignMatrix& design_;
    const Response& response_;
    Family family_;
    double lambda_;
    Eigen::MatrixXd full_;
};

inline double penalized_loglik(const DesignMatrix& design, const SurvivalDataset& data, const ParamVector& params,
                               Family family, double lambda) {
    const auto resp = make_response(data);
    return AftObjective(design, resp, family, lambda).value(params.pack());
}

inline Eigen::VectorXd gradient(const DesignMatrix& design, const SurvivalDataset& data, const ParamVector& params,
                                Family family, double lambda) {
    const auto resp = make_response(data);
    return AftObjective(design, resp, family, lambda).gradient(params.pack());
}

inline Eigen::MatrixXd hessian(const DesignMatrix& design, const SurvivalDataset& data, const ParamVector& params,
                               Family family, double lambda) {
    const auto resp = make_response(data);
    return AftObjective(design, resp, family, lambda).hessian(params.pack());
}

}  // namespace funaft
