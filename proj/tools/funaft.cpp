// funaft command-line front end.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 optimizer did
// not converge (outputs are still written), 1 anything else.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "funaft/funaft.hpp"

namespace {

using namespace funaft;

constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

std::string replace_suffix(const std::string& path, const std::string& suffix) {
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of('/');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? path.substr(0, dot) : path) + suffix;
}

/// Explicit --seed, else FUNAFT_SEED, else 1.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("FUNAFT_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(std::string("FUNAFT_SEED is not a nonnegative integer: '") + env + "'");
        }
    }
    return 1;
}

/// "a:b:n" (n evenly spaced points from a to b) or a comma-separated list.
std::vector<double> parse_t_grid(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        const auto parts = detail::split_csv_line([&] {
            std::string s = spec;
            for (auto& c : s) c = c == ':' ? ',' : c;
            return s;
        }());
        if (parts.size() != 3) throw ConfigError("--t-grid expects START:END:COUNT");
        const double a = detail::parse_double(parts[0], "--t-grid");
        const double b = detail::parse_double(parts[1], "--t-grid");
        const double n = detail::parse_double(parts[2], "--t-grid");
        if (n < 2 || n != std::floor(n)) throw ConfigError("--t-grid COUNT must be an integer >= 2");
        if (!(b > a)) throw ConfigError("--t-grid END must exceed START");
        const int count = static_cast<int>(n);
        for (int i = 0; i < count; ++i) out.push_back(a + (b - a) * i / (count - 1.0));
    } else {
        for (const auto& p : detail::split_csv_line(spec)) out.push_back(detail::parse_double(p, "--t-grid"));
    }
    if (out.empty()) throw ConfigError("--t-grid is empty");
    return out;
}

void check_schema(const FittedModel& model, const SurvivalDataset& data) {
    if (data.scalar_names != model.spec.scalar_names) {
        std::string want;
        for (const auto& n : model.spec.scalar_names) want += (want.empty() ? "" : ",") + n;
        throw ValidationError("scalar covariate columns do not match the model (expected [" + want + "])");
    }
}

struct FitArgs {
    std::string subjects, functional, model = "lfaft", family = "lognormal", quadrature = "auto", out;
    std::string coef_out, gcv_out;
    int k = 20, ks = 10, kx = 10, lambda_grid = 20;
    double lambda_min = 1.0, lambda_max = 1e4;
    bool center_x = false;
};

int cmd_fit(const FitArgs& a) {
    const auto data = load_dataset(a.subjects, a.functional);
    FitOptions opt;
    opt.k = a.k;
    opt.ks = a.ks;
    opt.kx = a.kx;
    opt.lambda_grid = a.lambda_grid;
    opt.lambda_min = a.lambda_min;
    opt.lambda_max = a.lambda_max;
    opt.center_x = a.center_x;
    opt.quadrature = parse_quadrature(a.quadrature);
    const auto kind = parse_model_kind(a.model);
    const auto model = fit_model(data, kind, parse_family(a.family), opt);
    save_model(model, a.out);
    {
        const std::string path =
            a.coef_out.empty() ? replace_suffix(a.out, kind == ModelKind::linear ? "_coef.csv" : "_surface.csv")
                               : a.coef_out;
        auto out = detail::open_output(path);
        if (kind == ModelKind::linear) {
            write_coef_csv(out, coef_curve(model));
        } else {
            ClampCounter clamps;
            write_surface_csv(out, coef_surface(model, 51, 51, &clamps));
        }
    }
    {
        auto out = detail::open_output(a.gcv_out.empty() ? replace_suffix(a.out, "_gcv.csv") : a.gcv_out);
        write_gcv_csv(out, model);
    }
    std::cerr << "fitted " << a.model << " (" << a.family << "): lambda=" << model.lambda << " df=" << model.df
              << " loglik=" << model.loglik << " sigma=" << model.params.sigma() << '\n';
    if (!model.converged) {
        std::cerr << "warning: optimizer did not converge at the selected lambda; model written and flagged\n";
        return kExitNonConvergence;
    }
    return 0;
}

struct PredictArgs {
    std::string model, subjects, functional, t_grid = "0:120:121", out;
};

int cmd_predict(const PredictArgs& a) {
    const auto model = load_model(a.model);
    const auto data = load_dataset(a.subjects, a.functional, false);
    check_schema(model, data);
    const auto grid = parse_t_grid(a.t_grid);
    auto out = detail::open_output(a.out);
    write_predictions_header(out);
    ClampCounter clamps;
    for (const auto& s : data.subjects) write_predictions(out, predict_survival(model, s, grid, &clamps));
    if (clamps.count > 0) {
        std::cerr << "warning: " << clamps.count << " basis evaluations fell outside the fitted range and were clamped\n";
    }
    return 0;
}

struct BootstrapArgs {
    std::string model, subjects, functional, out, params_out, method = "bootstrap";
    int b = 2000, jobs = 1, points = 101;
    std::optional<std::uint64_t> seed;
};

int cmd_bootstrap(const BootstrapArgs& a) {
    const auto model = load_model(a.model);
    const auto data = load_dataset(a.subjects, a.functional);
    check_schema(model, data);
    IntervalResult res;
    if (a.method == "bootstrap") {
        res = bootstrap_ci(model, data, a.b, resolve_seed(a.seed), a.jobs, a.points);
    } else if (a.method == "wald") {
        res = wald_ci(model, data, a.points);
    } else {
        throw ConfigError("--method must be bootstrap or wald");
    }
    if (model.kind() == ModelKind::linear) {
        auto out = detail::open_output(a.out);
        write_coef_csv(out, res.curve);
    } else {
        std::cerr << "note: additive model; only parameter intervals are written\n";
    }
    {
        auto out = detail::open_output(a.params_out.empty() ? replace_suffix(a.out, "_params.csv") : a.params_out);
        write_param_intervals_csv(out, res);
    }
    std::cerr << "intervals: " << res.method;
    if (a.method == "bootstrap") {
        std::cerr << " B=" << a.b << " redraws=" << res.redraws << " nonconverged=" << res.nonconverged;
    }
    std::cerr << '\n';
    return 0;
}

struct SimulateArgs {
    std::string dgp, out_prefix;
    int n = 100, p = 100;
    std::optional<double> u;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
    const Dgp dgp = parse_dgp(a.dgp);
    auto cfg = SimulationConfig::defaults(dgp, a.n, a.p, resolve_seed(a.seed));
    if (a.u) cfg.u = *a.u;
    const auto sim = simulate_dgp(cfg);
    write_dataset(sim.data, a.out_prefix + "_subjects.csv", a.out_prefix + "_functional.csv");

    nlohmann::json truth;
    truth["dgp"] = to_string(dgp);
    truth["n"] = cfg.n;
    truth["p"] = cfg.p;
    truth["u"] = cfg.u;
    truth["seed"] = cfg.seed;
    truth["censoring_rate"] = sim.censoring_rate;
    if (is_cox(dgp)) {
        truth["baseline"] = {{"kind", "weibull"}, {"shape", cfg.weibull_shape}, {"scale", cfg.weibull_scale}};
    } else {
        truth["intercept"] = cfg.intercept;
        truth["scale"] = cfg.scale;
        truth["error"] = dgp == Dgp::lfaft_loglogistic ? "logistic" : "normal";
    }
    const auto grid = even_grid(cfg.p);
    if (has_linear_truth(dgp)) {
        std::vector<double> beta;
        for (double s : grid) beta.push_back(cfg.truth.beta(s));
        truth["beta"] = {{"s", grid}, {"value", beta}};
    } else {
        truth["surface"] = dgp == Dgp::afaft_lognormal ? "0.05*x^2*s" : "-0.05*x^2*s";
    }
    nlohmann::json eta = nlohmann::json::object();
    for (std::size_t i = 0; i < sim.data.size(); ++i) eta[sim.data.subjects[i].id] = sim.eta[static_cast<Eigen::Index>(i)];
    truth["eta"] = eta;
    auto out = detail::open_output(a.out_prefix + "_truth.json");
    out << truth.dump(2) << '\n';
    std::cerr << "simulated " << cfg.n << " subjects, censoring rate " << sim.censoring_rate << '\n';
    return 0;
}

struct StudyArgs {
    std::string config, out, summary_out;
    std::optional<int> replicates;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool no_timing = false;
};

int cmd_study(const StudyArgs& a) {
    auto cfg = load_study_config(a.config);
    if (a.replicates) cfg.replicates = *a.replicates;
    if (a.seed || std::getenv("FUNAFT_SEED")) cfg.seed = resolve_seed(a.seed);
    cfg.jobs = a.jobs;
    auto out = detail::open_output(a.out);
    out << study_csv_header() << '\n';
    std::size_t failures = 0;
    const auto rows = run_study(cfg, [&](const StudyRow& r) {
        out << study_csv_row(r, !a.no_timing) << '\n';
        out.flush();
        if (!r.error.empty()) {
            ++failures;
            std::cerr << "replicate " << r.replicate << " (" << r.dgp << ", n=" << r.n << ", " << r.estimator
                      << ") failed: " << r.error << '\n';
        }
    });
    auto sum = detail::open_output(a.summary_out.empty() ? replace_suffix(a.out, "_summary.csv") : a.summary_out);
    sum << summary_csv_header() << '\n';
    for (const auto& s : summarize_study(rows)) {
        if (a.no_timing && s.metric == "fit_seconds") continue;
        sum << summary_csv_row(s) << '\n';
    }
    std::cerr << "study: " << rows.size() << " rows, " << failures << " failed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional accelerated failure time models"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("--quiet", quiet, "Suppress numerical warnings");

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Fit an lfAFT or afAFT model with GCV smoothing selection");
    c_fit->add_option("--subjects", fit.subjects, "Subjects CSV (id,time,status,z...)")->required();
    c_fit->add_option("--functional", fit.functional, "Functional CSV (id,s,x)")->required();
    c_fit->add_option("--model", fit.model, "lfaft or afaft")->check(CLI::IsMember({"lfaft", "afaft"}));
    c_fit->add_option("--family", fit.family, "lognormal or loglogistic")
        ->check(CLI::IsMember({"lognormal", "loglogistic"}));
    c_fit->add_option("--k", fit.k, "Basis size for lfAFT");
    c_fit->add_option("--ks", fit.ks, "Basis size along s for afAFT");
    c_fit->add_option("--kx", fit.kx, "Basis size along x for afAFT");
    c_fit->add_option("--quadrature", fit.quadrature, "auto, riemann or trapezoid")
        ->check(CLI::IsMember({"auto", "riemann", "trapezoid"}));
    c_fit->add_option("--lambda-grid", fit.lambda_grid, "Number of log-spaced smoothing values");
    c_fit->add_option("--lambda-min", fit.lambda_min, "Smallest smoothing value");
    c_fit->add_option("--lambda-max", fit.lambda_max, "Largest smoothing value");
    c_fit->add_option("--center-x", fit.center_x, "Subtract the pointwise mean curve before fitting (true/false)");
    c_fit->add_option("--out", fit.out, "Model JSON path")->required();
    c_fit->add_option("--coef-out", fit.coef_out, "Coefficient curve or surface CSV (default derived from --out)");
    c_fit->add_option("--gcv-out", fit.gcv_out, "GCV path CSV (default derived from --out)");

    PredictArgs pred;
    auto* c_pred = app.add_subcommand("predict", "Predict survival curves from a fitted model");
    c_pred->add_option("--model", pred.model, "Model JSON")->required();
    c_pred->add_option("--subjects", pred.subjects, "Subjects CSV")->required();
    c_pred->add_option("--functional", pred.functional, "Functional CSV")->required();
    c_pred->add_option("--t-grid", pred.t_grid, "START:END:COUNT or comma list");
    c_pred->add_option("--out", pred.out, "Prediction CSV (id,t,s_hat)")->required();

    BootstrapArgs boot;
    auto* c_boot = app.add_subcommand("bootstrap", "Pointwise intervals by bootstrap or Wald");
    c_boot->add_option("--model", boot.model, "Model JSON")->required();
    c_boot->add_option("--subjects", boot.subjects, "Training subjects CSV")->required();
    c_boot->add_option("--functional", boot.functional, "Training functional CSV")->required();
    c_boot->add_option("--b", boot.b, "Bootstrap resamples (>= 50)");
    c_boot->add_option("--seed", boot.seed, "Seed (falls back to FUNAFT_SEED)");
    c_boot->add_option("--jobs", boot.jobs, "Worker threads")->check(CLI::PositiveNumber);
    c_boot->add_option("--method", boot.method, "bootstrap or wald")->check(CLI::IsMember({"bootstrap", "wald"}));
    c_boot->add_option("--points", boot.points, "Grid points for the coefficient curve");
    c_boot->add_option("--out", boot.out, "Coefficient CSV (s,beta_hat,lo,hi)")->required();
    c_boot->add_option("--params-out", boot.params_out, "Intercept, scalar and sigma intervals CSV");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate a dataset from one of the data-generating models");
    c_sim->add_option("--dgp", sim.dgp, "lfaft_lognormal, lfaft_loglogistic, cox_linear, afaft_lognormal, cox_additive")
        ->required();
    c_sim->add_option("--n", sim.n, "Subjects");
    c_sim->add_option("--p", sim.p, "Grid points per curve");
    c_sim->add_option("--u", sim.u, "Censoring upper bound (default 250 linear, 2000 additive)");
    c_sim->add_option("--seed", sim.seed, "Seed (falls back to FUNAFT_SEED)");
    c_sim->add_option("--out-prefix", sim.out_prefix, "Prefix for _subjects.csv, _functional.csv, _truth.json")
        ->required();

    StudyArgs study;
    auto* c_study = app.add_subcommand("study", "Run a simulation study from a JSON config");
    c_study->add_option("--config", study.config, "Study config JSON")->required();
    c_study->add_option("--replicates", study.replicates, "Override the replicate count");
    c_study->add_option("--jobs", study.jobs, "Worker threads")->check(CLI::PositiveNumber);
    c_study->add_option("--seed", study.seed, "Override the study seed (falls back to FUNAFT_SEED)");
    c_study->add_option("--out", study.out, "Results CSV")->required();
    c_study->add_option("--summary-out", study.summary_out, "Summary CSV (default derived from --out)");
    c_study->add_flag("--no-timing", study.no_timing, "Write NA for fit_seconds so outputs are reproducible");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }
    verbose_warnings() = !quiet;

    try {
        if (c_fit->parsed()) return cmd_fit(fit);
        if (c_pred->parsed()) return cmd_predict(pred);
        if (c_boot->parsed()) return cmd_bootstrap(boot);
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_study->parsed()) return cmd_study(study);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ModelTypeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
