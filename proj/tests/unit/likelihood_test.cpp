#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"

using namespace funaft;
using testutil::make_subject;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Adaptive Simpson on [a, b].
template <class F>
double simpson(F&& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-10) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 60);
}

}  // namespace

TEST(LogDensity, LogNormalAtMedian) {
    const double eta = 1.3, sigma = 0.7;
    EXPECT_NEAR(log_density(Family::log_normal, std::exp(eta), eta, sigma), -eta - std::log(sigma) - 0.5 * kLog2Pi, 1e-14);
}

TEST(LogDensity, LogLogisticUnitCase) {
    EXPECT_NEAR(log_density(Family::log_logistic, 1.0, 0.0, 1.0), std::log(0.25), 1e-15);
}

TEST(LogDensity, MatchesPaperFormulaForLogLogistic) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int i = 0; i < 50; ++i) {
        const double t = u(rng) * 10.0, eta = u(rng) - 1.0, sigma = u(rng) * 0.5;
        const double alpha = std::exp(eta), kappa = 1.0 / sigma;
        const double direct = std::log(kappa) - std::log(alpha) + (kappa - 1.0) * (std::log(t) - std::log(alpha)) -
                              2.0 * std::log1p(std::pow(t / alpha, kappa));
        EXPECT_NEAR(log_density(Family::log_logistic, t, eta, sigma), direct, 1e-11 * std::max(1.0, std::abs(direct)));
        const double s_direct = -std::log1p(std::pow(t / alpha, kappa));
        EXPECT_NEAR(log_survival(Family::log_logistic, t, eta, sigma), s_direct, 1e-12 * std::max(1.0, std::abs(s_direct)));
    }
}

TEST(LogDensity, IsMinusDerivativeOfSurvival) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Family f : {Family::log_normal, Family::log_logistic}) {
        for (int i = 0; i < 40; ++i) {
            const double eta = 3.0 * u(rng) - 1.0, sigma = 0.2 + u(rng);
            const double t = std::exp(eta + sigma * (2.0 * u(rng) - 1.0));
            const double h = 1e-5 * t;
            const double fd = -(survival(f, t + h, eta, sigma) - survival(f, t - h, eta, sigma)) / (2.0 * h);
            const double dens = std::exp(log_density(f, t, eta, sigma));
            EXPECT_NEAR(fd, dens, 1e-6 * dens) << to_string(f);
        }
    }
}

TEST(LogSurvival, MediansGiveHalf) {
    EXPECT_NEAR(log_survival(Family::log_normal, std::exp(0.8), 0.8, 0.4), std::log(0.5), 1e-15);
    EXPECT_NEAR(log_survival(Family::log_logistic, std::exp(-1.1), -1.1, 2.0), std::log(0.5), 1e-15);
}

TEST(LogSurvival, NormalTailAgainstHighPrecisionValues) {
    // log(erfc(z / sqrt 2) / 2) from 40-digit arithmetic
    EXPECT_NEAR(log_survival(Family::log_normal, std::exp(10.0), 0.0, 1.0), -53.231285150512470578, 1e-11);
    EXPECT_NEAR(log_survival(Family::log_normal, std::exp(3.0), 0.0, 1.0), -6.6077262215103495433, 1e-12);
    EXPECT_NEAR(log_survival(Family::log_normal, std::exp(-2.5), 0.0, 1.0), -0.0062290254858600024, 1e-15);
    EXPECT_NEAR(log_survival(Family::log_normal, std::exp(40.0), 0.0, 1.0), -804.60844201375378817, 1e-9);
    // continuity where the tail switches to the continued fraction
    const double below = detail::log_normal_tail(8.0 - 1e-9);
    const double above = detail::log_normal_tail(8.0 + 1e-9);
    EXPECT_NEAR(below, above, 1e-7);
}

TEST(LogSurvival, RejectsNonPositiveArguments) {
    EXPECT_THROW(log_survival(Family::log_normal, 0.0, 0.0, 1.0), ValidationError);
    EXPECT_THROW(log_density(Family::log_logistic, -1.0, 0.0, 1.0), ValidationError);
    EXPECT_THROW(log_density(Family::log_normal, 1.0, 0.0, 0.0), ValidationError);
    EXPECT_EQ(survival(Family::log_normal, 0.0, 0.0, 1.0), 1.0);
}

TEST(Survival, StrictlyDecreasingWithCorrectLimits) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Family f : {Family::log_normal, Family::log_logistic}) {
        for (int r = 0; r < 100; ++r) {
            const double eta = 6.0 * u(rng) - 3.0, sigma = 0.05 + 2.0 * u(rng);
            double prev = 1.0;
            for (int j = -40; j <= 40; ++j) {
                const double t = std::exp(eta + sigma * 0.1 * j);
                const double s = survival(f, t, eta, sigma);
                EXPECT_LT(s, prev);
                EXPECT_GE(s, 0.0);
                prev = s;
            }
            EXPECT_NEAR(survival(f, std::exp(eta - 60.0 * sigma), eta, sigma), 1.0, 1e-12);
            EXPECT_LT(survival(f, std::exp(eta + 60.0 * sigma), eta, sigma), 1e-12);
        }
    }
}

TEST(Density, IntegratesToOne) {
    for (Family f : {Family::log_normal, Family::log_logistic}) {
        for (double sigma : {0.3, 0.5, 1.0}) {
            const double eta = 1.2;
            // substitute t = exp(u) so the heavy log-logistic tail is finite on a bounded range
            auto g = [&](double u) { return std::exp(log_density(f, std::exp(u), eta, sigma) + u); };
            const double span = f == Family::log_normal ? 12.0 * sigma : 45.0 * sigma;
            const double total = integrate(g, eta - span, eta + span);
            EXPECT_NEAR(total, 1.0, 1e-4) << to_string(f) << " sigma=" << sigma;
        }
    }
}

TEST(Family, ParsesNames) {
    EXPECT_EQ(parse_family("lognormal"), Family::log_normal);
    EXPECT_EQ(parse_family("loglogistic"), Family::log_logistic);
    EXPECT_THROW(parse_family("weibull"), ConfigError);
}

TEST(PenalizedLoglik, ThreeSubjectHandComputation) {
    const std::vector<double> g{0.0, 0.5, 1.0};
    const auto data = make_dataset({make_subject("a", 2.0, true, g, {1.0, 0.0, -1.0}, {0.5}),
                                    make_subject("b", 0.7, false, g, {0.2, 0.4, 0.8}, {-1.0}),
                                    make_subject("c", 5.0, true, g, {2.0, 1.0, 0.0}, {0.0})},
                                   {"z"});
    const auto basis = make_bspline_basis({0, 1}, 4, 3);
    const auto dm = build_linear_design(data, basis, Quadrature::trapezoid);
    ParamVector p;
    p.gamma = Eigen::Vector2d(0.3, -0.4);
    p.b = Eigen::Vector4d(0.5, -0.2, 0.1, 0.7);
    p.log_sigma = std::log(0.8);
    const double lambda = 2.5;

    // Bernstein cubics at 0, 1/2, 1 with trapezoid weights (1/4, 1/2, 1/4)
    const double b_half[4] = {0.125, 0.375, 0.375, 0.125};
    auto feature = [&](const std::vector<double>& x, int k) {
        const double at0 = k == 0 ? 1.0 : 0.0;
        const double at1 = k == 3 ? 1.0 : 0.0;
        return 0.25 * x[0] * at0 + 0.5 * x[1] * b_half[k] + 0.25 * x[2] * at1;
    };
    const std::vector<std::vector<double>> xs{{1.0, 0.0, -1.0}, {0.2, 0.4, 0.8}, {2.0, 1.0, 0.0}};
    const double z[3] = {0.5, -1.0, 0.0};
    const double t[3] = {2.0, 0.7, 5.0};
    const bool ev[3] = {true, false, true};
    const double sigma = 0.8;
    for (Family f : {Family::log_normal, Family::log_logistic}) {
        double ll = 0.0;
        for (int i = 0; i < 3; ++i) {
            double eta = 0.3 - 0.4 * z[i];
            for (int k = 0; k < 4; ++k) eta += p.b[k] * feature(xs[static_cast<std::size_t>(i)], k);
            const double w = (std::log(t[i]) - eta) / sigma;
            if (f == Family::log_normal) {
                ll += ev[i] ? -std::log(t[i]) - std::log(sigma) - 0.5 * kLog2Pi - 0.5 * w * w
                            : std::log(0.5 * std::erfc(w / std::numbers::sqrt2));
            } else {
                const double alpha = std::exp(eta), kappa = 1.0 / sigma;
                ll += ev[i] ? std::log(kappa) - std::log(alpha) + (kappa - 1.0) * (std::log(t[i]) - std::log(alpha)) -
                                  2.0 * std::log(1.0 + std::pow(t[i] / alpha, kappa))
                            : -std::log(1.0 + std::pow(t[i] / alpha, kappa));
            }
        }
        // b' D b with D = diff'diff for K = 4: rows (1,-2,1,0), (0,1,-2,1)
        const double d1 = p.b[0] - 2 * p.b[1] + p.b[2];
        const double d2 = p.b[1] - 2 * p.b[2] + p.b[3];
        const double expected = ll - lambda * (d1 * d1 + d2 * d2);
        EXPECT_NEAR(penalized_loglik(dm, data, p, f, lambda), expected, 1e-10) << to_string(f);
        EXPECT_NEAR(penalized_loglik(dm, data, p, f, 0.0), ll, 1e-10);
    }
}

TEST(PenalizedLoglik, AllCensoredReducesToSurvivalTerms) {
    auto sim = simulate_dgp(SimulationConfig::defaults(Dgp::lfaft_lognormal, 15, 20, 1));
    for (auto& s : sim.data.subjects) s.event = false;
    const auto basis = make_bspline_basis({0, 1}, 6, 3);
    const auto dm = build_linear_design(sim.data, basis, Quadrature::automatic);
    ParamVector p;
    p.gamma = Eigen::VectorXd::Constant(1, 0.5);
    p.b = Eigen::VectorXd::LinSpaced(6, -0.02, 0.03);
    p.log_sigma = std::log(0.6);
    const Eigen::VectorXd eta = dm.full() * (Eigen::VectorXd(7) << p.gamma, p.b).finished();
    double expected = 0.0;
    for (std::size_t i = 0; i < sim.data.size(); ++i)
        expected += log_survival(Family::log_normal, sim.data.subjects[i].time, eta[static_cast<Eigen::Index>(i)], 0.6);
    expected -= 3.0 * p.b.dot(make_penalty(6).matrix * p.b);
    EXPECT_NEAR(penalized_loglik(dm, sim.data, p, Family::log_normal, 3.0), expected, 1e-9);
}

TEST(PenalizedLoglik, OverflowingPredictorIsMinusInfinity) {
    const auto d = make_dataset({make_subject("a", 1.0, true, {0, 1}, {1, 1})}, {});
    const auto dm = build_linear_design(d, make_bspline_basis({0, 1}, 4, 3), Quadrature::automatic);
    ParamVector p;
    p.gamma = Eigen::VectorXd::Constant(1, 1e308);
    p.b = Eigen::VectorXd::Constant(4, 1e308);
    p.log_sigma = 0.0;
    EXPECT_EQ(penalized_loglik(dm, d, p, Family::log_normal, 0.0), -std::numeric_limits<double>::infinity());
}

TEST(Gradient, MatchesCentralDifferencesAtRandomPoints) {
    const auto sim = testutil::full_rank_sample(60, 12, 40);
    auto data = sim.data;
    // one scalar covariate to exercise the gamma block
    std::vector<Subject> subs = data.subjects;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& s : subs) s.scalars = {nd(rng)};
    data = make_dataset(subs, {"z"});
    const auto basis = make_bspline_basis({0, 1}, 8, 3);
    const auto dm = build_linear_design(data, basis, Quadrature::automatic);
    const auto resp = make_response(data);
    for (Family f : {Family::log_normal, Family::log_logistic}) {
        const AftObjective obj(dm, resp, f, 4.0);
        for (int r = 0; r < 20; ++r) {
            Eigen::VectorXd theta = testutil::random_theta(rng, obj.num_params(), 0.05);
            theta[0] = 3.0 + nd(rng) * 0.3;
            theta[theta.size() - 1] = std::log(0.4 + 0.6 * std::abs(nd(rng)));
            const Eigen::VectorXd g = obj.gradient(theta);
            for (Eigen::Index j = 0; j < theta.size(); ++j) {
                const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
                Eigen::VectorXd tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                const double fd = (obj.value(tp) - obj.value(tm)) / (2.0 * h);
                const double denom = std::max(std::abs(fd), 1e-2 * g.norm());
                EXPECT_LT(std::abs(g[j] - fd) / denom, 1e-5) << to_string(f) << " r=" << r << " j=" << j;
            }
        }
    }
}

TEST(Gradient, ScoreAtTruthIsCentred) {
    const auto sim = simulate_dgp(SimulationConfig::defaults(Dgp::lfaft_lognormal, 5000, 100, 77));
    const auto basis = make_bspline_basis({0, 1}, 20, 3);
    const auto dm = build_linear_design(sim.data, basis, Quadrature::automatic);
    // the quadratic truth lies in the cubic spline space, so the projection is exact
    const auto grid = even_grid(400);
    const Eigen::MatrixXd bm = eval_basis_matrix(basis, grid);
    Eigen::VectorXd target(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 0; j < grid.size(); ++j) target[static_cast<Eigen::Index>(j)] = default_beta(grid[j]);
    ParamVector p;
    p.gamma = Eigen::VectorXd::Constant(1, 0.5);
    p.b = bm.colPivHouseholderQr().solve(target);
    p.log_sigma = std::log(0.5);
    ASSERT_LT((bm * p.b - target).cwiseAbs().maxCoeff(), 1e-10);

    // standardized score g' J^-1 g against chi-square(22); J is the outer product of subject scores
    const Eigen::MatrixXd c = dm.full();
    const Eigen::VectorXd theta = p.pack();
    const Eigen::VectorXd eta = c * theta.head(c.cols());
    Eigen::MatrixXd jmat = Eigen::MatrixXd::Zero(theta.size(), theta.size());
    Eigen::VectorXd si(theta.size());
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        const auto& s = sim.data.subjects[static_cast<std::size_t>(i)];
        const auto term = subject_term(Family::log_normal, s.time, s.event, eta[i], p.log_sigma);
        si.head(c.cols()) = c.row(i).transpose() * term.d_eta;
        si[c.cols()] = term.d_logsigma;
        jmat += si * si.transpose();
    }
    const Eigen::VectorXd g = gradient(dm, sim.data, p, Family::log_normal, 0.0);
    const double stat = g.dot(jmat.ldlt().solve(g));
    EXPECT_LT(stat, 48.27);  // 0.999 quantile of chi-square with 22 df
    // the per-subject mean score is small relative to its own spread
    EXPECT_LT(g.norm() / 5000.0, 3.0 * std::sqrt(jmat.trace()) / 5000.0);
}

TEST(Hessian, SymmetricAndMatchesPenaltyBlock) {
    const auto sim = testutil::full_rank_sample(40, 5, 30);
    const auto dm = build_linear_design(sim.data, make_bspline_basis({0, 1}, 6, 3), Quadrature::automatic);
    ParamVector p;
    p.gamma = Eigen::VectorXd::Constant(1, 3.0);
    p.b = Eigen::VectorXd::Constant(6, 0.01);
    p.log_sigma = std::log(0.7);
    const auto h0 = hessian(dm, sim.data, p, Family::log_normal, 0.0);
    const auto h1 = hessian(dm, sim.data, p, Family::log_normal, 10.0);
    EXPECT_LT((h0 - h0.transpose()).cwiseAbs().maxCoeff(), 1e-8);
    // the penalty adds exactly -2 lambda D to the b block
    const Eigen::MatrixXd diff = h1 - h0;
    const double scale = h0.cwiseAbs().maxCoeff();
    EXPECT_LT((diff.block(1, 1, 6, 6) + 20.0 * make_penalty(6).matrix).cwiseAbs().maxCoeff(), 1e-7 * scale);
}

TEST(Hessian, LogNormalCoefficientBlockIsNegativeSemidefinite) {
    std::mt19937_64 rng(8);
    const auto sim = testutil::full_rank_sample(50, 6, 30);
    const auto dm = build_linear_design(sim.data, make_bspline_basis({0, 1}, 6, 3), Quadrature::automatic);
    const auto resp = make_response(sim.data);
    const AftObjective obj(dm, resp, Family::log_normal, 1.0);
    for (int r = 0; r < 10; ++r) {
        Eigen::VectorXd theta = testutil::random_theta(rng, obj.num_params(), 0.05);
        theta[0] = 3.5;
        const Eigen::MatrixXd h = obj.hessian(theta).topLeftCorner(7, 7);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-6 * es.eigenvalues().cwiseAbs().maxCoeff());
    }
}

TEST(CurvatureWeights, MatchSecondDerivativeInEta) {
    const auto sim = simulate_dgp(SimulationConfig::defaults(Dgp::lfaft_loglogistic, 30, 20, 3));
    for (Family f : {Family::log_normal, Family::log_logistic}) {
        for (const auto& s : sim.data.subjects) {
            const double eta = 3.0, ls = std::log(0.6), h = 1e-4;
            const double fd = (subject_term(f, s.time, s.event, eta + h, ls).d_eta -
                               subject_term(f, s.time, s.event, eta - h, ls).d_eta) /
                              (2.0 * h);
            EXPECT_NEAR(subject_term(f, s.time, s.event, eta, ls).d2_eta, fd, 1e-6);
        }
    }
}
