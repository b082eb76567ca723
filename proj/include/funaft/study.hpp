/**
 * Monte-Carlo study runner: for every (scenario, replicate) it simulates a
 * training set and an independent test set of the same size, fits each
 * requested estimator and records
 *
 *   mise_beta   integrated squared error of beta-hat (linear truths, lfAFT only)
 *   mise_surv   subject-averaged ISE of S-hat over the metric window (training subjects)
 *   brier       out-of-sample Brier score over the window (test subjects)
 *
 * Replicates may run in parallel; rows are emitted in (scenario, replicate,
 * estimator) order regardless of the number of jobs.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "funaft/fitter.hpp"
#include "funaft/metrics.hpp"
#include "funaft/parallel.hpp"
#include "funaft/predict.hpp"
#include "funaft/simulate.hpp"
#include "json.hpp"

namespace funaft {

enum class Estimator { lfaft_lognormal, lfaft_loglogistic, afaft_lognormal };

inline std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::lfaft_lognormal: return "lfaft_lognormal";
        case Estimator::lfaft_loglogistic: return "lfaft_loglogistic";
        case Estimator::afaft_lognormal: return "afaft_lognormal";
    }
    return "";
}

inline Estimator parse_estimator(const std::string& s) {
    if (s == "lfaft_lognormal") return Estimator::lfaft_lognormal;
    if (s == "lfaft_loglogistic") return Estimator::lfaft_loglogistic;
    if (s == "afaft_lognormal") return Estimator::afaft_lognormal;
    throw ConfigError("unknown estimator '" + s + "' (expected lfaft_lognormal, lfaft_loglogistic or afaft_lognormal)");
}

inline ModelKind estimator_kind(Estimator e) {
    return e == Estimator::afaft_lognormal ? ModelKind::additive : ModelKind::linear;
}

inline Family estimator_family(Estimator e) {
    return e == Estimator::lfaft_loglogistic ? Family::log_logistic : Family::log_normal;
}

struct StudyScenario {
    SimulationConfig sim;  // seed is ignored; replicate seeds derive from the study seed
    std::vector<Estimator> estimators;
};

struct StudyConfig {
    std::vector<StudyScenario> scenarios;
    int replicates = 1;
    std::uint64_t seed = 1;
    int jobs = 1;
    MetricWindow window;
    FitOptions fit;
    int beta_points = 101;
};

struct StudyRow {
    std::string dgp;
    int n = 0;
    int p = 0;
    std::string estimator;
    int replicate = 0;
    double mise_beta = std::numeric_limits<double>::quiet_NaN();
    double mise_surv = std::numeric_limits<double>::quiet_NaN();
    double brier = std::numeric_limits<double>::quiet_NaN();
    double fit_seconds = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    std::string error;
};

inline const char* study_csv_header() {
    return "dgp,n,p,estimator,replicate,mise_beta,mise_surv,brier,fit_seconds,converged";
}

inline std::string format_metric(double v) { return std::isfinite(v) ? detail::format_double(v) : "NA"; }

inline std::string study_csv_row(const StudyRow& r, bool include_timing = true) {
    std::ostringstream os;
    os << r.dgp << ',' << r.n << ',' << r.p << ',' << r.estimator << ',' << r.replicate << ','
       << format_metric(r.mise_beta) << ',' << format_metric(r.mise_surv) << ',' << format_metric(r.brier) << ','
       << (include_timing ? format_metric(r.fit_seconds) : "NA") << ',' << (r.converged ? 1 : 0);
    return os.str();
}

/// Seeds for the training and test sets of one replicate.
inline std::pair<std::uint64_t, std::uint64_t> replicate_seeds(std::uint64_t study_seed, std::size_t scenario,
                                                               int replicate) {
    auto rng = stream_rng(study_seed, static_cast<std::uint64_t>(replicate), static_cast<std::uint64_t>(scenario) + 17);
    const std::uint64_t a = rng();
    const std::uint64_t b = rng();
    return {a, b};
}

namespace detail {

inline Eigen::MatrixXd predicted_survival_matrix(const FittedModel& model, const SurvivalDataset& data,
                                                 const std::vector<double>& t_grid) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(t_grid.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto c = predict_survival(model, data.subjects[i], t_grid);
        for (std::size_t j = 0; j < t_grid.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.s_hat[j];
    }
    return m;
}

inline Eigen::MatrixXd true_survival_matrix(const SimulationConfig& cfg, const SimulatedData& sim,
                                            const std::vector<double>& t_grid) {
    Eigen::MatrixXd m(sim.eta.size(), static_cast<Eigen::Index>(t_grid.size()));
    for (Eigen::Index i = 0; i < sim.eta.size(); ++i) {
        for (std::size_t j = 0; j < t_grid.size(); ++j) {
            m(i, static_cast<Eigen::Index>(j)) = true_survival(cfg, sim.eta[i], t_grid[j]);
        }
    }
    return m;
}

}  // namespace detail

/// All rows for one replicate of one scenario.
inline std::vector<StudyRow> run_replicate(const StudyConfig& study, std::size_t scenario_index, int replicate) {
    const auto& sc = study.scenarios[scenario_index];
    const auto [train_seed, test_seed] = replicate_seeds(study.seed, scenario_index, replicate);
    SimulationConfig train_cfg = sc.sim;
    train_cfg.seed = train_seed;
    SimulationConfig test_cfg = sc.sim;
    test_cfg.seed = test_seed;
    const FpcGenerator gen = default_generator(sc.sim.dgp);
    const auto train = simulate_dgp(train_cfg, gen);
    const auto test = simulate_dgp(test_cfg, gen);
    const auto t_grid = study.window.grid();

    std::vector<double> beta_grid;
    std::vector<double> beta_truth;
    if (has_linear_truth(sc.sim.dgp)) {
        beta_grid = unit_grid(study.beta_points);
        for (double s : beta_grid) beta_truth.push_back(sc.sim.truth.beta(s));
    }
    const Eigen::MatrixXd s_true = detail::true_survival_matrix(train_cfg, train, t_grid);
    std::vector<double> test_time;
    std::vector<bool> test_event;
    for (const auto& s : test.data.subjects) {
        test_time.push_back(s.time);
        test_event.push_back(s.event);
    }

    std::vector<StudyRow> rows;
    for (Estimator est : sc.estimators) {
        StudyRow row;
        row.dgp = to_string(sc.sim.dgp);
        row.n = sc.sim.n;
        row.p = sc.sim.p;
        row.estimator = to_string(est);
        row.replicate = replicate;
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const FittedModel model = fit_model(train.data, estimator_kind(est), estimator_family(est), study.fit);
            row.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            row.converged = model.converged;
            if (has_linear_truth(sc.sim.dgp) && model.kind() == ModelKind::linear) {
                const auto curve = coef_curve(model, study.beta_points);
                row.mise_beta = mise(beta_grid, curve.beta_hat, beta_truth);
            }
            row.mise_surv = mise_survival(t_grid, detail::predicted_survival_matrix(model, train.data, t_grid), s_true);
            row.brier = brier(detail::predicted_survival_matrix(model, test.data, t_grid), test_time, test_event, t_grid);
        } catch (const std::exception& e) {
            row.error = e.what();
            row.converged = false;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Runs every (scenario, replicate). `sink` receives rows in deterministic
/// order as soon as all earlier tasks have finished.
inline std::vector<StudyRow> run_study(const StudyConfig& study,
                                       const std::function<void(const StudyRow&)>& sink = {}) {
    if (study.replicates < 1) throw ConfigError("study needs at least one replicate");
    for (const auto& sc : study.scenarios) {
        sc.sim.validate();
        if (sc.estimators.empty()) throw ConfigError("scenario without estimators");
    }
    const std::size_t tasks = study.scenarios.size() * static_cast<std::size_t>(study.replicates);
    std::vector<std::vector<StudyRow>> results(tasks);
    std::vector<char> done(tasks, 0);
    std::size_t flushed = 0;
    std::mutex mu;
    parallel_for(tasks, study.jobs, [&](std::size_t t) {
        const std::size_t sc = t / static_cast<std::size_t>(study.replicates);
        const int rep = static_cast<int>(t % static_cast<std::size_t>(study.replicates));
        auto rows = run_replicate(study, sc, rep);
        std::lock_guard<std::mutex> lock(mu);
        results[t] = std::move(rows);
        done[t] = 1;
        while (flushed < tasks && done[flushed]) {
            if (sink) {
                for (const auto& r : results[flushed]) sink(r);
            }
            ++flushed;
        }
    });
    std::vector<StudyRow> all;
    for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
    return all;
}

struct SummaryRow {
    std::string dgp;
    int n = 0;
    int p = 0;
    std::string estimator;
    std::string metric;
    std::size_t count = 0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

/// Median and quartiles per (dgp, n, p, estimator) of log MISE, Brier and fit time.
inline std::vector<SummaryRow> summarize_study(const std::vector<StudyRow>& rows) {
    using Key = std::tuple<std::string, int, int, std::string>;
    std::vector<Key> order;
    std::map<Key, std::map<std::string, std::vector<double>>> cells;
    const std::vector<std::string> metrics{"log_mise_beta", "log_mise_surv", "brier", "log_brier", "fit_seconds"};
    for (const auto& r : rows) {
        Key k{r.dgp, r.n, r.p, r.estimator};
        if (!cells.count(k)) order.push_back(k);
        auto& c = cells[k];
        auto add = [&](const std::string& name, double v) {
            if (std::isfinite(v)) c[name].push_back(v);
        };
        add("log_mise_beta", r.mise_beta > 0.0 ? std::log(r.mise_beta) : std::numeric_limits<double>::quiet_NaN());
        add("log_mise_surv", r.mise_surv > 0.0 ? std::log(r.mise_surv) : std::numeric_limits<double>::quiet_NaN());
        add("brier", r.brier);
        add("log_brier", r.brier > 0.0 ? std::log(r.brier) : std::numeric_limits<double>::quiet_NaN());
        add("fit_seconds", r.fit_seconds);
    }
    std::vector<SummaryRow> out;
    for (const auto& k : order) {
        const auto& c = cells[k];
        for (const auto& m : metrics) {
            auto it = c.find(m);
            if (it == c.end() || it->second.empty()) continue;
            SummaryRow s;
            std::tie(s.dgp, s.n, s.p, s.estimator) = k;
            s.metric = m;
            s.count = it->second.size();
            s.median = quantile(it->second, 0.5);
            s.q25 = quantile(it->second, 0.25);
            s.q75 = quantile(it->second, 0.75);
            out.push_back(s);
        }
    }
    return out;
}

inline const char* summary_csv_header() { return "dgp,n,p,estimator,metric,count,median,q25,q75,iqr"; }

inline std::string summary_csv_row(const SummaryRow& s) {
    std::ostringstream os;
    os << s.dgp << ',' << s.n << ',' << s.p << ',' << s.estimator << ',' << s.metric << ',' << s.count << ','
       << detail::format_double(s.median) << ',' << detail::format_double(s.q25) << ','
       << detail::format_double(s.q75) << ',' << detail::format_double(s.q75 - s.q25);
    return os.str();
}

namespace detail {

template <class T>
std::vector<T> scalar_or_list(const nlohmann::json& j) {
    if (j.is_array()) return j.get<std::vector<T>>();
    return {j.get<T>()};
}

}  // namespace detail

/// Study definition as JSON:
///
///   { "replicates": 50, "seed": 7, "t_max": 120, "n_t": 121,
///     "k": 20, "ks": 10, "kx": 10, "lambda_grid": 20,
///     "estimators": ["lfaft_lognormal", "lfaft_loglogistic"],
///     "scenarios": [ { "dgp": "lfaft_lognormal", "n": [100, 500], "p": 100, "u": 250 } ] }
///
/// Scenario entries take scalars or lists for dgp, n and p (expanded as a
/// cross product) and may override "estimators" and "u".
inline StudyConfig study_from_json(const nlohmann::json& j) {
    try {
        StudyConfig cfg;
        cfg.replicates = j.value("replicates", 1);
        cfg.seed = j.value("seed", std::uint64_t{1});
        cfg.window.t_max = j.value("t_max", 120.0);
        cfg.window.n_t = j.value("n_t", 121);
        cfg.fit.k = j.value("k", 20);
        cfg.fit.ks = j.value("ks", 10);
        cfg.fit.kx = j.value("kx", 10);
        cfg.fit.lambda_grid = j.value("lambda_grid", 20);
        cfg.fit.quadrature = parse_quadrature(j.value("quadrature", std::string("auto")));
        std::vector<Estimator> default_est;
        for (const auto& e : detail::scalar_or_list<std::string>(
                 j.value("estimators", nlohmann::json::array({"lfaft_lognormal", "lfaft_loglogistic"})))) {
            default_est.push_back(parse_estimator(e));
        }
        for (const auto& s : j.at("scenarios")) {
            std::vector<Estimator> est = default_est;
            if (s.contains("estimators")) {
                est.clear();
                for (const auto& e : detail::scalar_or_list<std::string>(s["estimators"])) est.push_back(parse_estimator(e));
            }
            for (const auto& dgp : detail::scalar_or_list<std::string>(s.at("dgp"))) {
                for (int n : detail::scalar_or_list<int>(s.value("n", nlohmann::json(100)))) {
                    for (int p : detail::scalar_or_list<int>(s.value("p", nlohmann::json(100)))) {
                        StudyScenario sc;
                        sc.sim = SimulationConfig::defaults(parse_dgp(dgp), n, p);
                        if (s.contains("u")) sc.sim.u = s["u"].get<double>();
                        sc.estimators = est;
                        cfg.scenarios.push_back(std::move(sc));
                    }
                }
            }
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("study config: ") + e.what());
    }
}

inline StudyConfig load_study_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open study config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return study_from_json(j);
}

}  // namespace funaft
