#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rankcf/rankcf.hpp"

using namespace rankcf;
using Catch::Matchers::WithinAbs;

namespace {

const MetricsRow& find_row(const MetricsTable& table, const std::string& est,
                           const std::string& param) {
    for (const auto& r : table.rows)
        if (r.estimator == est && r.parameter == param) return r;
    throw std::runtime_error("row not found: " + est + "/" + param);
}

} // namespace

TEST_CASE("summary moments by hand", "[mc_harness]") {
    Eigen::VectorXd v(2);
    v << 0.0, 2.0;
    Summary s = summarize(v, 1.0);
    REQUIRE_THAT(s.mean, WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(s.std_dev, WithinAbs(std::sqrt(2.0), 1e-15));
    REQUIRE_THAT(s.rmse, WithinAbs(1.0, 1e-15));

    Eigen::VectorXd one(1);
    one << 3.0;
    Summary s1 = summarize(one, 1.0);
    REQUIRE(s1.std_dev == 0.0);
    REQUIRE_THAT(s1.rmse, WithinAbs(2.0, 1e-15));

    REQUIRE_THROWS_AS(summarize(Eigen::VectorXd(), 0.0), domain_error);
}

TEST_CASE("rmse decomposes into bias and variance", "[mc_harness]") {
    Rng rng(70);
    Eigen::VectorXd v(37);
    for (Eigen::Index i = 0; i < 37; ++i) v[i] = 0.3 + 0.8 * rng.normal();
    double truth = 0.1;
    Summary s = summarize(v, truth);
    double r = 37.0;
    double bias = s.mean - truth;
    double want = bias * bias + (r - 1.0) / r * s.std_dev * s.std_dev;
    REQUIRE_THAT(s.rmse * s.rmse, WithinAbs(want, 1e-10));
}

TEST_CASE("rejection rate skips missing tests", "[mc_harness]") {
    Eigen::VectorXd r(4);
    r << 1, 0, 0, 0;
    REQUIRE_THAT(rejection_rate(r), WithinAbs(0.25, 1e-15));
    double nan = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd mixed(3);
    mixed << 1, nan, 0;
    REQUIRE_THAT(rejection_rate(mixed), WithinAbs(0.5, 1e-15));
    Eigen::VectorXd none(2);
    none << nan, nan;
    REQUIRE(std::isnan(rejection_rate(none)));
    REQUIRE(std::isnan(rejection_rate(Eigen::VectorXd())));
}

TEST_CASE("population average structural function truth", "[mc_harness]") {
    DgpConfig cfg;
    cfg.rho = 0.5;
    cfg.pi_shape = PiShape::linear;
    double truth = population_asf_truth(cfg, 1);
    // Linear design: E[Z] = E[D] = 0, so the truth is the analytic value.
    REQUIRE_THAT(truth, WithinAbs(true_asf(cfg, 0.0, 0.0), 0.002));

    cfg.pi_shape = PiShape::quadratic;
    double truth_q = population_asf_truth(cfg, 1);
    // Quadratic design: E[D] = E[Z^2 / 2] = 1/2.
    REQUIRE_THAT(truth_q, WithinAbs(true_asf(cfg, 0.0, 0.5), 0.002));
}

TEST_CASE("experiment config validation", "[mc_harness]") {
    ExperimentConfig cfg;
    cfg.estimators = {EstimatorKind::ml};
    cfg.replications = 0;
    REQUIRE_THROWS_AS(run_experiment(cfg), config_error);
    cfg.replications = 1;
    cfg.estimators = {};
    REQUIRE_THROWS_AS(run_experiment(cfg), config_error);
    cfg.estimators = {EstimatorKind::ml};
    cfg.boot_parametric = -1;
    REQUIRE_THROWS_AS(run_experiment(cfg), config_error);
}

TEST_CASE("single replication study emits a full table", "[mc_harness]") {
    ExperimentConfig cfg;
    cfg.dgp.rho = 0.0;
    cfg.dgp.n = 200;
    cfg.replications = 1;
    cfg.estimators = {EstimatorKind::ml};
    cfg.boot_parametric = 0;
    MetricsTable table = run_experiment(cfg);
    REQUIRE(table.replications == 1);
    REQUIRE(table.rows.size() == 4); // alpha_0, alpha_1, beta, asf
    const MetricsRow& beta = find_row(table, "ml", "beta");
    REQUIRE(beta.truth == 1.0);
    REQUIRE(beta.n_success == 1);
    REQUIRE(beta.std_dev == 0.0);
    REQUIRE(beta.n_tests == 1); // information-matrix test needs no bootstrap
    const MetricsRow& asf = find_row(table, "ml", "asf");
    REQUIRE(asf.truth == table.asf_truth);
    REQUIRE(std::isfinite(asf.mean));
    REQUIRE(table.diagnostics.size() == 1);
    REQUIRE(table.diagnostics[0].estimator == "ml");
    REQUIRE(table.diagnostics[0].max_design_condition > 1.0);
}

TEST_CASE("experiments are reproducible and thread invariant", "[mc_harness]") {
    ExperimentConfig cfg;
    cfg.dgp.rho = 0.5;
    cfg.dgp.n = 100;
    cfg.replications = 4;
    cfg.estimators = {EstimatorKind::ml, EstimatorKind::cf0};
    cfg.boot_parametric = 0;
    MetricsTable a = run_experiment(cfg, 1);
    MetricsTable b = run_experiment(cfg, 1);
    MetricsTable c = run_experiment(cfg, 2);
    REQUIRE(a.rows.size() == b.rows.size());
    REQUIRE(a.rows.size() == c.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        REQUIRE(a.rows[i].mean == b.rows[i].mean);
        REQUIRE(a.rows[i].std_dev == b.rows[i].std_dev);
        REQUIRE(a.rows[i].mean == c.rows[i].mean);
        REQUIRE(a.rows[i].std_dev == c.rows[i].std_dev);
    }
}

TEST_CASE("rank and linear first stages agree on an identified design",
          "[mc_harness]") {
    // Linear projection with gamma errors: both the nonparametric and the
    // linear first stage are correctly specified, and the rank transform is
    // informative because the error law is not the normal.
    ExperimentConfig cfg;
    cfg.dgp.rho = 0.5;
    cfg.dgp.pi_shape = PiShape::linear;
    cfg.dgp.v_dist = VDist::centered_gamma22;
    cfg.dgp.n = 300;
    cfg.replications = 50;
    cfg.estimators = {EstimatorKind::mw1, EstimatorKind::mw2};
    cfg.boot_parametric = 0;
    MetricsTable table = run_experiment(cfg);
    const MetricsRow& b1 = find_row(table, "mw1", "beta");
    const MetricsRow& b2 = find_row(table, "mw2", "beta");
    REQUIRE(b1.n_success >= 45);
    REQUIRE(b2.n_success >= 45);
    // Identification rests on the non-normal error shape alone, so the
    // estimator spread in this cell is wide; the bands are about three Monte
    // Carlo standard errors at 50 replications.
    REQUIRE_THAT(b1.mean, WithinAbs(1.05, 0.3));
    REQUIRE_THAT(b2.mean, WithinAbs(1.05, 0.3));
    REQUIRE_THAT(b1.mean, WithinAbs(b2.mean, 0.15));
    const MetricsRow& r1 = find_row(table, "mw1", "rho");
    REQUIRE_THAT(r1.mean, WithinAbs(0.48, 0.25));
    // Without a bootstrap the rank estimators carry no tests.
    REQUIRE(b1.n_tests == 0);
    REQUIRE(std::isnan(b1.size));
}

TEST_CASE("semiparametric rows report the normalized slope", "[mc_harness]") {
    ExperimentConfig cfg;
    cfg.dgp.rho = 0.5;
    cfg.dgp.n = 150;
    cfg.replications = 2;
    cfg.estimators = {EstimatorKind::np_mw1};
    cfg.boot_semiparametric = 0;
    MetricsTable table = run_experiment(cfg);
    // beta, rho, asf: the pinned exogenous slope is not a reported parameter.
    REQUIRE(table.rows.size() == 3);
    const MetricsRow& beta = find_row(table, "np_mw1", "beta");
    REQUIRE(beta.n_success + beta.n_failed == 2);
    for (const auto& row : table.rows)
        REQUIRE((row.parameter == "beta" || row.parameter == "rho" ||
                 row.parameter == "asf"));
}
