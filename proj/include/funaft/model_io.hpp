// JSON form of a fitted model. Doubles are written with round-trip precision,
// so refitting the same inputs reproduces the file byte for byte.
#pragma once

#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "funaft/fitter.hpp"
#include "json.hpp"

namespace funaft {

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<double> to_std(const Eigen::RowVectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double number_or(const nlohmann::json& j, double fallback) {
    return j.is_number() ? j.get<double>() : fallback;
}

}  // namespace detail

inline nlohmann::json to_json(const FittedModel& m) {
    using nlohmann::json;
    json j;
    j["model"] = to_string(m.kind());
    j["family"] = to_string(m.family());
    j["gamma"] = detail::to_std(m.params.gamma);
    j["b"] = detail::to_std(m.params.b);
    j["log_sigma"] = m.params.log_sigma;
    j["lambda"] = m.lambda;
    j["df"] = m.df;
    j["loglik"] = m.loglik;
    j["penalized_loglik"] = m.penalized_loglik;
    j["degree"] = m.spec.s_basis.degree;
    j["knots"] = m.spec.s_basis.knots;
    if (m.kind() == ModelKind::additive) {
        j["x_degree"] = m.spec.x_basis.degree;
        j["x_knots"] = m.spec.x_basis.knots;
        j["x_marginal"] = {{"grid", m.spec.x_marginal.grid}, {"basis_means", json::array()}};
        for (Eigen::Index r = 0; r < m.spec.x_marginal.basis_means.rows(); ++r) {
            j["x_marginal"]["basis_means"].push_back(
                detail::to_std(Eigen::RowVectorXd(m.spec.x_marginal.basis_means.row(r))));
        }
    }
    j["domain"] = {{"offset", m.spec.domain_map.offset}, {"scale", m.spec.domain_map.scale}};
    j["quadrature"] = to_string(m.spec.quadrature);
    j["column_centers"] = detail::to_std(m.spec.column_centers);
    j["penalty_scale"] = m.spec.penalty_scale;
    j["scalar_names"] = m.spec.scalar_names;
    if (!m.spec.x_mean.empty()) j["x_mean"] = {{"grid", m.spec.x_mean.grid}, {"values", m.spec.x_mean.values}};
    j["gcv_path"] = json::array();
    for (const auto& p : m.gcv_path) {
        j["gcv_path"].push_back({{"lambda", p.lambda},
                                 {"gcv", detail::finite_or_null(p.gcv)},
                                 {"df", detail::finite_or_null(p.df)},
                                 {"loglik", detail::finite_or_null(p.loglik)},
                                 {"converged", p.converged}});
    }
    j["converged"] = m.converged;
    j["n_iter"] = m.n_iter;
    j["n_subjects"] = m.n_subjects;
    return j;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
    try {
        FittedModel m;
        m.spec.kind = parse_model_kind(j.at("model").get<std::string>());
        m.spec.family = parse_family(j.at("family").get<std::string>());
        m.params.gamma = detail::to_eigen(j.at("gamma").get<std::vector<double>>());
        m.params.b = detail::to_eigen(j.at("b").get<std::vector<double>>());
        m.params.log_sigma = j.at("log_sigma").get<double>();
        m.lambda = j.at("lambda").get<double>();
        m.df = j.at("df").get<double>();
        m.loglik = j.at("loglik").get<double>();
        m.penalized_loglik = j.value("penalized_loglik", 0.0);
        m.spec.s_basis = bspline_from_knots(j.at("knots").get<std::vector<double>>(), j.at("degree").get<int>());
        if (m.spec.kind == ModelKind::additive) {
            m.spec.x_basis =
                bspline_from_knots(j.at("x_knots").get<std::vector<double>>(), j.at("x_degree").get<int>());
            const auto& xm = j.at("x_marginal");
            m.spec.x_marginal.grid = xm.at("grid").get<std::vector<double>>();
            const auto rows = xm.at("basis_means").get<std::vector<std::vector<double>>>();
            m.spec.x_marginal.basis_means.resize(static_cast<Eigen::Index>(rows.size()), m.spec.x_basis.num_basis);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                m.spec.x_marginal.basis_means.row(static_cast<Eigen::Index>(r)) = detail::to_eigen(rows[r]).transpose();
            }
        }
        m.spec.domain_map.offset = j.at("domain").at("offset").get<double>();
        m.spec.domain_map.scale = j.at("domain").at("scale").get<double>();
        m.spec.quadrature = parse_quadrature(j.at("quadrature").get<std::string>());
        m.spec.column_centers = detail::to_eigen(j.at("column_centers").get<std::vector<double>>()).transpose();
        m.spec.penalty_scale = j.value("penalty_scale", 1.0);
        if (!(m.spec.penalty_scale > 0.0)) throw ValidationError("model JSON: penalty_scale must be positive");
        m.spec.scalar_names = j.at("scalar_names").get<std::vector<std::string>>();
        if (j.contains("x_mean")) {
            m.spec.x_mean.grid = j["x_mean"].at("grid").get<std::vector<double>>();
            m.spec.x_mean.values = j["x_mean"].at("values").get<std::vector<double>>();
        }
        for (const auto& p : j.at("gcv_path")) {
            GcvPoint g;
            g.lambda = p.at("lambda").get<double>();
            g.gcv = detail::number_or(p.at("gcv"), std::numeric_limits<double>::infinity());
            g.df = detail::number_or(p.at("df"), std::numeric_limits<double>::quiet_NaN());
            g.loglik = detail::number_or(p.at("loglik"), std::numeric_limits<double>::quiet_NaN());
            g.converged = p.value("converged", false);
            m.gcv_path.push_back(g);
        }
        m.converged = j.value("converged", false);
        m.n_iter = j.value("n_iter", 0);
        m.n_subjects = j.value("n_subjects", std::size_t{0});
        if (m.params.b.size() != m.spec.num_functional()) {
            throw ValidationError("model file: coefficient count does not match the basis");
        }
        if (m.params.gamma.size() != m.spec.num_scalar()) {
            throw ValidationError("model file: gamma length does not match scalar_names");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const FittedModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write model file '" + path + "'");
    out << to_json(m).dump(2) << '\n';
}

inline FittedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace funaft
