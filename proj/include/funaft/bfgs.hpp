/**
 * BFGS maximization with a strong-Wolfe line search (bracketing followed by
 * zoom with safeguarded quadratic interpolation).
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "funaft/errors.hpp"

namespace funaft {

struct OptimizerSettings {
    int max_iter = 500;
    double grad_tol = 1e-6;
    double rel_f_tol = 1e-8;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search = 50;

    void validate() const {
        if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
            throw ConfigError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
        }
        if (max_iter < 0) throw ConfigError("max_iter must be nonnegative");
    }
};

struct OptimResult {
    Eigen::VectorXd argmax;
    double value = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // objective after each accepted step, starting with the initial value
};

namespace detail {

// Minimization view of the objective along a search direction.
template <class F>
struct LineFunction {
    F& fn;
    const Eigen::VectorXd& x0;
    const Eigen::VectorXd& dir;
    Eigen::VectorXd x;
    Eigen::VectorXd g;

    // returns phi(alpha) = -f(x0 + alpha d) and stores dphi
    double eval(double alpha, double& dphi) {
        x = x0 + alpha * dir;
        const double f = fn(x, g);
        if (!std::isfinite(f) || !g.allFinite()) {
            dphi = std::numeric_limits<double>::quiet_NaN();
            return std::numeric_limits<double>::infinity();
        }
        dphi = -g.dot(dir);
        return -f;
    }
};

struct LineSearchResult {
    bool ok = false;
    double alpha = 0.0;
    double phi = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd g;  // gradient of f (maximization sign)
};

inline double interpolate_step(double lo, double phi_lo, double dphi_lo, double hi, double phi_hi) {
    const double width = hi - lo;
    double a = lo + 0.5 * width;
    if (std::isfinite(phi_hi)) {
        const double denom = 2.0 * (phi_hi - phi_lo - dphi_lo * width);
        if (denom > 0.0) a = lo - dphi_lo * width * width / denom;
    }
    const double lo_safe = std::min(lo, hi) + 0.1 * std::abs(width);
    const double hi_safe = std::max(lo, hi) - 0.1 * std::abs(width);
    if (!(a >= lo_safe && a <= hi_safe)) a = lo + 0.5 * width;
    return a;
}

template <class F>
LineSearchResult strong_wolfe(LineFunction<F>& lf, double phi0, double dphi0, double alpha_init,
                              const OptimizerSettings& s) {
    LineSearchResult out;
    const double c1 = s.wolfe_c1;
    const double c2 = s.wolfe_c2;
    auto accept = [&](double alpha, double phi) {
        out.ok = true;
        out.alpha = alpha;
        out.phi = phi;
        out.x = lf.x;
        out.g = lf.g;
        return out;
    };

    auto zoom = [&](double lo, double phi_lo, double dphi_lo, double hi, double phi_hi, int budget) {
        for (int it = 0; it < budget; ++it) {
            const double a = interpolate_step(lo, phi_lo, dphi_lo, hi, phi_hi);
            double dphi = 0.0;
            const double phi = lf.eval(a, dphi);
            if (phi > phi0 + c1 * a * dphi0 || phi >= phi_lo) {
                hi = a;
                phi_hi = phi;
            } else {
                if (std::abs(dphi) <= -c2 * dphi0) return accept(a, phi);
                if (dphi * (hi - lo) >= 0.0) {
                    hi = lo;
                    phi_hi = phi_lo;
                }
                lo = a;
                phi_lo = phi;
                dphi_lo = dphi;
            }
            if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
        }
        // fall back to the best sufficient-decrease point found, if any
        if (lo > 0.0) {
            double dphi = 0.0;
            const double phi = lf.eval(lo, dphi);
            if (phi <= phi0 + c1 * lo * dphi0) return accept(lo, phi);
        }
        out.ok = false;
        return out;
    };

    double prev_alpha = 0.0;
    double prev_phi = phi0;
    double prev_dphi = dphi0;
    double alpha = alpha_init;
    for (int i = 0; i < s.max_line_search; ++i) {
        double dphi = 0.0;
        const double phi = lf.eval(alpha, dphi);
        if (!std::isfinite(phi) || phi > phi0 + c1 * alpha * dphi0 || (i > 0 && phi >= prev_phi)) {
            return zoom(prev_alpha, prev_phi, prev_dphi, alpha, phi, s.max_line_search);
        }
        if (std::abs(dphi) <= -c2 * dphi0) return accept(alpha, phi);
        if (dphi >= 0.0) return zoom(alpha, phi, dphi, prev_alpha, prev_phi, s.max_line_search);
        prev_alpha = alpha;
        prev_phi = phi;
        prev_dphi = dphi;
        alpha *= 2.0;
    }
    out.ok = false;
    return out;
}

}  // namespace detail

/// Maximizes f. `fn(x, grad)` returns f(x) and writes its gradient.
template <class F>
OptimResult bfgs_maximize(F&& fn, const Eigen::VectorXd& init, const OptimizerSettings& settings = {}) {
    settings.validate();
    const Eigen::Index n = init.size();
    OptimResult res;
    Eigen::VectorXd x = init;
    Eigen::VectorXd g;
    double f = fn(x, g);
    if (!std::isfinite(f) || !g.allFinite()) throw NumericalError("objective is not finite at the initial point");
    res.trace.push_back(f);

    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian of -f
    bool scaled = false;
    int small_steps = 0;
    for (int iter = 0; iter < settings.max_iter; ++iter) {
        if (g.norm() < settings.grad_tol) {
            res.converged = true;
            break;
        }
        // descent direction for -f is H * grad(f)
        Eigen::VectorXd dir = h_inv * g;
        double dphi0 = -g.dot(dir);
        if (!(dphi0 < 0.0)) {
            h_inv.setIdentity();
            dir = g;
            dphi0 = -g.squaredNorm();
        }
        const double alpha0 = (iter == 0 && !scaled) ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        auto wrapped = [&fn](const Eigen::VectorXd& xx, Eigen::VectorXd& gg) { return fn(xx, gg); };
        detail::LineFunction<decltype(wrapped)> lf{wrapped, x, dir, {}, {}};
        auto ls = detail::strong_wolfe(lf, -f, dphi0, alpha0, settings);
        if (!ls.ok && !h_inv.isIdentity()) {
            // retry once along steepest ascent
            h_inv.setIdentity();
            dir = g;
            detail::LineFunction<decltype(wrapped)> lf2{wrapped, x, dir, {}, {}};
            ls = detail::strong_wolfe(lf2, -f, -g.squaredNorm(), std::min(1.0, 1.0 / g.norm()), settings);
        }
        res.iterations = iter + 1;
        if (!ls.ok) {
            res.converged = false;
            res.argmax = x;
            res.value = f;
            return res;
        }
        const Eigen::VectorXd step = ls.x - x;
        const Eigen::VectorXd y = g - ls.g;  // change in grad(-f)
        const double f_new = -ls.phi;
        const double df = std::abs(f_new - f);
        x = ls.x;
        g = ls.g;
        const double f_old = f;
        f = f_new;
        res.trace.push_back(f);

        const double sy = step.dot(y);
        if (sy > 1e-12 * step.norm() * y.norm()) {
            if (!scaled) {
                h_inv *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h_inv * y;
            // H+ = (I - rho s y') H (I - rho y s') + rho s s'
            h_inv += (rho * rho * y.dot(hy) + rho) * (step * step.transpose()) -
                     rho * (hy * step.transpose() + step * hy.transpose());
        }
        // a single tiny step can be a stall in a flat valley; require two in a row
        small_steps = df <= settings.rel_f_tol * std::max(1.0, std::abs(f_old)) ? small_steps + 1 : 0;
        if (small_steps >= 2) {
            res.converged = true;
            break;
        }
        if (g.norm() < settings.grad_tol) {
            res.converged = true;
            break;
        }
    }
    res.argmax = x;
    res.value = f;
    return res;
}

}  // namespace funaft
