/**
 * Integrated squared error and the survival Brier score.
 *
 * The Brier score uses no censoring weights: at time t a subject censored at
 * or before t has an unknown status and is left out of the time-t average.
 * Scores are averaged over subjects at each t, then over the time grid.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "funaft/errors.hpp"
#include "funaft/log.hpp"

namespace funaft {

struct MetricWindow {
    double t_max = 120.0;
    int n_t = 121;

    std::vector<double> grid() const {
        if (!(t_max > 0.0)) throw ConfigError("metric window must have t_max > 0");
        if (n_t < 2) throw ConfigError("metric window needs at least 2 time points");
        std::vector<double> g(static_cast<std::size_t>(n_t));
        for (int i = 0; i < n_t; ++i) g[static_cast<std::size_t>(i)] = t_max * i / (n_t - 1.0);
        return g;
    }
};

/// Trapezoid integral of (estimate - truth)^2 over the grid.
inline double mise(const std::vector<double>& grid, const std::vector<double>& estimate,
                   const std::vector<double>& truth) {
    if (estimate.size() != grid.size() || truth.size() != grid.size()) {
        throw ValidationError("mise: estimate, truth and grid must have equal length");
    }
    double total = 0.0;
    for (std::size_t j = 1; j < grid.size(); ++j) {
        const double a = estimate[j - 1] - truth[j - 1];
        const double b = estimate[j] - truth[j];
        total += 0.5 * (grid[j] - grid[j - 1]) * (a * a + b * b);
    }
    return total;
}

/// Integrated squared error of survival curves (rows = subjects, columns = grid), averaged over subjects.
inline double mise_survival(const std::vector<double>& grid, const Eigen::MatrixXd& estimate,
                            const Eigen::MatrixXd& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() ||
        estimate.cols() != static_cast<Eigen::Index>(grid.size())) {
        throw ValidationError("mise_survival: shape mismatch");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < estimate.rows(); ++i) {
        std::vector<double> e(grid.size());
        std::vector<double> t(grid.size());
        for (std::size_t j = 0; j < grid.size(); ++j) {
            e[j] = estimate(i, static_cast<Eigen::Index>(j));
            t[j] = truth(i, static_cast<Eigen::Index>(j));
        }
        total += mise(grid, e, t);
    }
    return total / static_cast<double>(estimate.rows());
}

/// Brier score of predicted survival (rows = subjects, columns = time grid)
/// against observed (time, event). The predicted event probability is 1 - S.
inline double brier(const Eigen::MatrixXd& predicted_survival, const std::vector<double>& time,
                    const std::vector<bool>& event, const std::vector<double>& t_grid) {
    const auto n = predicted_survival.rows();
    if (static_cast<std::size_t>(n) != time.size() || time.size() != event.size() ||
        predicted_survival.cols() != static_cast<Eigen::Index>(t_grid.size())) {
        throw ValidationError("brier: shape mismatch");
    }
    double sum_over_t = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        const double t = t_grid[j];
        double acc = 0.0;
        std::size_t count = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            double observed;
            if (time[ii] > t) {
                observed = 0.0;
            } else if (event[ii]) {
                observed = 1.0;
            } else {
                continue;  // censored before t
            }
            const double p = 1.0 - predicted_survival(i, static_cast<Eigen::Index>(j));
            acc += (p - observed) * (p - observed);
            ++count;
        }
        if (count == 0) {
            ++skipped;
            continue;
        }
        sum_over_t += acc / static_cast<double>(count);
        ++used;
    }
    if (skipped > 0) warn(std::to_string(skipped) + " Brier time points skipped with an empty risk set");
    if (used == 0) throw ValidationError("brier: no time point has a classifiable subject");
    return sum_over_t / static_cast<double>(used);
}

}  // namespace funaft
