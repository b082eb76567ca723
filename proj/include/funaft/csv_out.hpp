// Plain CSV writers for curves, surfaces, predictions, GCV paths and intervals.
#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "funaft/dataset.hpp"
#include "funaft/fitter.hpp"
#include "funaft/predict.hpp"

namespace funaft {

namespace detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write '" + path + "'");
    return out;
}

inline std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

}  // namespace detail

/// s,beta_hat,lo,hi; lo and hi are NA without intervals.
inline void write_coef_csv(std::ostream& out, const CoefficientCurve& c) {
    out << "s,beta_hat,lo,hi\n";
    for (std::size_t j = 0; j < c.s_grid.size(); ++j) {
        out << detail::csv_number(c.s_grid[j]) << ',' << detail::csv_number(c.beta_hat[j]) << ','
            << (c.has_intervals() ? detail::csv_number(c.lower95[j]) : "NA") << ','
            << (c.has_intervals() ? detail::csv_number(c.upper95[j]) : "NA") << '\n';
    }
}

inline void write_surface_csv(std::ostream& out, const CoefficientSurface& f) {
    out << "s,x,F_hat\n";
    for (std::size_t j = 0; j < f.s_grid.size(); ++j) {
        for (std::size_t k = 0; k < f.x_grid.size(); ++k) {
            out << detail::csv_number(f.s_grid[j]) << ',' << detail::csv_number(f.x_grid[k]) << ','
                << detail::csv_number(f.f_hat(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) << '\n';
        }
    }
}

inline void write_gcv_csv(std::ostream& out, const FittedModel& m) {
    out << "lambda,gcv,df,loglik,converged,selected\n";
    for (const auto& p : m.gcv_path) {
        out << detail::csv_number(p.lambda) << ',' << detail::csv_number(p.gcv) << ',' << detail::csv_number(p.df)
            << ',' << detail::csv_number(p.loglik) << ',' << (p.converged ? 1 : 0) << ','
            << (p.lambda == m.lambda ? 1 : 0) << '\n';
    }
}

inline void write_predictions_header(std::ostream& out) { out << "id,t,s_hat\n"; }

inline void write_predictions(std::ostream& out, const SurvivalCurve& c) {
    for (std::size_t j = 0; j < c.t_grid.size(); ++j) {
        out << c.id << ',' << detail::csv_number(c.t_grid[j]) << ',' << detail::csv_number(c.s_hat[j]) << '\n';
    }
}

/// parameter,estimate,lo,hi
inline void write_param_intervals_csv(std::ostream& out, const IntervalResult& r) {
    out << "parameter,estimate,lo,hi\n";
    for (const auto& p : r.params) {
        out << p.name << ',' << detail::csv_number(p.estimate) << ',' << detail::csv_number(p.lower) << ','
            << detail::csv_number(p.upper) << '\n';
    }
}

}  // namespace funaft
