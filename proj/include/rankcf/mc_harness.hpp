#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rankcf/dgp.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/estimators.hpp"
#include "rankcf/inference.hpp"
#include "rankcf/parallel.hpp"
#include "rankcf/rng.hpp"

namespace rankcf {

struct ExperimentConfig {
    DgpConfig dgp;
    int replications = 1000;
    std::vector<EstimatorKind> estimators;
    int boot_parametric = 499;    // pairs bootstrap size, parametric link fits
    int boot_semiparametric = 99; // pairs bootstrap size, semiparametric fits
    std::uint64_t base_seed = 1;
    PipelineOptions pipeline;

    void validate() const {
        dgp.validate();
        if (replications < 1) throw config_error("experiment: replications must be positive");
        if (estimators.empty()) throw config_error("experiment: no estimators selected");
        if (boot_parametric < 0 || boot_semiparametric < 0)
            throw config_error("experiment: bootstrap sizes must be non-negative");
    }
};

struct Summary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_dev = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
};

// Moments of a column of estimates against its truth: mean, standard
// deviation with divisor R-1, and root mean squared error around the truth.
inline Summary summarize(const Eigen::VectorXd& estimates, double truth) {
    Eigen::Index r = estimates.size();
    if (r == 0) throw domain_error("summarize: no estimates");
    Summary s;
    s.mean = estimates.mean();
    s.rmse = std::sqrt((estimates.array() - truth).square().mean());
    s.std_dev = r > 1 ? std::sqrt((estimates.array() - s.mean).square().sum() /
                                  static_cast<double>(r - 1))
                      : 0.0;
    return s;
}

// Rejection frequency over valid test indicators (entries outside {0,1} are
// treated as missing tests).
inline double rejection_rate(const Eigen::VectorXd& rejections) {
    Eigen::Index valid = 0;
    double hits = 0.0;
    for (Eigen::Index i = 0; i < rejections.size(); ++i) {
        if (rejections[i] == 0.0 || rejections[i] == 1.0) {
            ++valid;
            hits += rejections[i];
        }
    }
    if (valid == 0) return std::numeric_limits<double>::quiet_NaN();
    return hits / static_cast<double>(valid);
}

struct MetricsRow {
    std::string estimator;
    std::string parameter;
    double truth = 0.0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_dev = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double size = std::numeric_limits<double>::quiet_NaN();
    int n_success = 0;
    int n_failed = 0;
    int n_tests = 0;
};

struct EstimatorDiagnostics {
    std::string estimator;
    int failures = 0;
    int unreliable_bootstraps = 0;
    double max_design_condition = 0.0;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::vector<EstimatorDiagnostics> diagnostics;
    int replications = 0;
    double asf_truth = std::numeric_limits<double>::quiet_NaN();
};

// Population mean of (Z, D) under the design by simulation, then the ASF
// truth Phi((a0 + a1 E[Z] + b E[D]) / sqrt(1 + rho^2)) at that point.
inline double population_asf_truth(const DgpConfig& cfg, std::uint64_t seed,
                                   Eigen::Index draws = 1000000) {
    Rng rng(derive_seed(seed, 0x415346ULL));
    double sum_z = 0.0, sum_d = 0.0;
    for (Eigen::Index i = 0; i < draws; ++i) {
        double z = rng.normal();
        double v = cfg.v_dist == VDist::std_normal ? rng.normal()
                                                   : rng.gamma22() - 1.0;
        sum_z += z;
        sum_d += pi_of_z(cfg.pi_shape, z) + v;
    }
    double nz = sum_z / static_cast<double>(draws);
    double nd = sum_d / static_cast<double>(draws);
    return true_asf(cfg, nz, nd);
}

namespace detail {

struct RepOutcome {
    bool failed = true;
    Eigen::VectorXd estimate;   // flat theta
    double asf = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd reject;     // per parameter then asf; NaN = missing test
    double design_condition = 0.0;
    bool unreliable_bootstrap = false;
};

} // namespace detail

// Runs the full simulation study for one design cell. Per replication and
// estimator: simulate, estimate, test each component against its truth at the
// 5 percent level, and evaluate the ASF at the replication's sample mean of
// (Z, D). Failures (estimation errors, non-convergence, or any component
// above 100 in absolute value) are excluded from the moments; replications
// whose bootstrap is unreliable keep their estimates but drop their tests.
inline MetricsTable run_experiment(const ExperimentConfig& cfg, int threads = 1) {
    cfg.validate();
    int reps = cfg.replications;
    size_t n_est = cfg.estimators.size();

    double asf_truth = population_asf_truth(cfg.dgp, cfg.base_seed);
    MetricsTable table;
    table.replications = reps;
    table.asf_truth = asf_truth;

    std::vector<std::vector<detail::RepOutcome>> all(
        n_est, std::vector<detail::RepOutcome>(static_cast<size_t>(reps)));

    parallel_for(reps, threads, [&](Eigen::Index r) {
        DgpConfig dgp = cfg.dgp;
        dgp.seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(r));
        SimSample sample = generate(dgp);
        const Dataset& data = sample.dataset;
        Eigen::Index n = data.n_obs();
        Eigen::Index k = data.n_exog();
        Eigen::Index m = data.n_endog();

        Eigen::VectorXd x_mean(k + m);
        for (Eigen::Index j = 0; j < k; ++j) x_mean[j] = data.z.col(j).mean();
        for (Eigen::Index j = 0; j < m; ++j) x_mean[k + j] = data.d.col(j).mean();

        for (size_t e = 0; e < n_est; ++e) {
            EstimatorKind kind = cfg.estimators[e];
            detail::RepOutcome& slot = all[e][static_cast<size_t>(r)];
            Eigen::MatrixXd true_m = sample.m_v_true;
            try {
                PipelineRun run = run_pipeline(data, kind, cfg.pipeline, &true_m);
                const Eigen::MatrixXd& eta = run.eta;
                FitResult& fr = run.fit;
                if (!fr.converged)
                    throw numerical_error("experiment: fit did not converge");
                Eigen::VectorXd flat = fr.theta.flat();
                if (flat.cwiseAbs().maxCoeff() > 100.0)
                    throw numerical_error("experiment: estimate diverged");

                slot.design_condition = fr.design_condition;
                slot.estimate = flat;
                slot.failed = false;
                Eigen::Index p = flat.size();

                // Truth per component: structural parameters, rho per control.
                Eigen::VectorXd truth = Eigen::VectorXd::Zero(p);
                truth[0] = cfg.dgp.alpha0;
                truth[1] = cfg.dgp.alpha1;
                truth[k] = cfg.dgp.beta;
                for (Eigen::Index l = k + m; l < p; ++l) truth[l] = cfg.dgp.rho;
                if (is_semiparametric(kind)) {
                    truth[0] = 0.0;
                    truth[1] = 1.0;
                }

                slot.asf = is_semiparametric(kind)
                               ? asf_nonparam(fr.theta, data, eta, x_mean,
                                              cfg.pipeline.semiparam)
                               : asf_parametric(fr.theta, x_mean);

                slot.reject = Eigen::VectorXd::Constant(
                    p + 1, std::numeric_limits<double>::quiet_NaN());

                bool fisher_based =
                    kind == EstimatorKind::ml || kind == EstimatorKind::cf0;
                int b_reps = is_semiparametric(kind) ? cfg.boot_semiparametric
                                                     : cfg.boot_parametric;
                if (fisher_based) {
                    CovarianceEstimate cov = fisher_covariance(fr, n);
                    TStatistics ts = t_statistics(flat, cov, truth);
                    for (Eigen::Index j = 0; j < p; ++j)
                        slot.reject[j] = std::abs(ts.t[j]) > 1.96 ? 1.0 : 0.0;
                    AsfEstimate asf_est =
                        delta_method_asf(fr.theta, cov, x_mean);
                    if (asf_est.se > 0.0)
                        slot.reject[p] =
                            std::abs(asf_est.value - asf_truth) / asf_est.se > 1.96
                                ? 1.0
                                : 0.0;
                } else if (b_reps >= 2) {
                    std::uint64_t boot_seed = derive_seed(
                        dgp.seed, 0xB000ULL + static_cast<std::uint64_t>(kind));
                    try {
                        if (!is_semiparametric(kind)) {
                            PointEstimator est = [&](const Dataset& d) {
                                FitResult b = run_estimator(d, kind, cfg.pipeline);
                                if (!b.converged)
                                    throw numerical_error("bootstrap fit stalled");
                                return b.theta.flat();
                            };
                            CovarianceEstimate cov =
                                pairs_bootstrap(data, est, b_reps, boot_seed);
                            TStatistics ts = t_statistics(flat, cov, truth);
                            for (Eigen::Index j = 0; j < p; ++j)
                                slot.reject[j] =
                                    std::abs(ts.t[j]) > 1.96 ? 1.0 : 0.0;
                            AsfEstimate asf_est =
                                delta_method_asf(fr.theta, cov, x_mean);
                            if (asf_est.se > 0.0)
                                slot.reject[p] = std::abs(slot.asf - asf_truth) /
                                                             asf_est.se >
                                                         1.96
                                                     ? 1.0
                                                     : 0.0;
                        } else {
                            PointEstimator est = [&](const Dataset& d) {
                                PipelineRun b = run_pipeline(d, kind, cfg.pipeline);
                                if (!b.fit.converged)
                                    throw numerical_error("bootstrap fit stalled");
                                Eigen::VectorXd out(b.fit.theta.size() + 1);
                                out << b.fit.theta.flat(),
                                    asf_nonparam(b.fit.theta, d, b.eta, x_mean,
                                                 cfg.pipeline.semiparam);
                                return out;
                            };
                            CovarianceEstimate cov =
                                pairs_bootstrap(data, est, b_reps, boot_seed);
                            Eigen::VectorXd ext(p + 1);
                            ext << flat, slot.asf;
                            Eigen::VectorXd ext_truth(p + 1);
                            ext_truth << truth, asf_truth;
                            TStatistics ts = t_statistics(ext, cov, ext_truth);
                            for (Eigen::Index j = 0; j < p + 1; ++j)
                                if (!ts.zero_se[static_cast<size_t>(j)])
                                    slot.reject[j] =
                                        std::abs(ts.t[j]) > 1.96 ? 1.0 : 0.0;
                        }
                    } catch (const unreliable_bootstrap_error&) {
                        slot.unreliable_bootstrap = true;
                    }
                }
            } catch (const numerical_error&) {
                slot.failed = true;
            } catch (const config_error&) {
                slot.failed = true;
            }
        }
    });

    // Aggregate. The simulated design always has two exogenous columns
    // (intercept, z) and one endogenous regressor.
    Eigen::Index k = 2, m = 1;
    for (size_t e = 0; e < n_est; ++e) {
        EstimatorKind kind = cfg.estimators[e];
        const auto& slots = all[e];

        EstimatorDiagnostics diag;
        diag.estimator = to_string(kind);
        for (const auto& s : slots) {
            if (s.failed) ++diag.failures;
            if (s.unreliable_bootstrap) ++diag.unreliable_bootstraps;
            diag.max_design_condition =
                std::max(diag.max_design_condition, s.design_condition);
        }
        table.diagnostics.push_back(diag);

        std::vector<Eigen::Index> param_idx;
        std::vector<std::string> param_name;
        std::vector<double> param_truth;
        Eigen::Index p = 0;
        for (const auto& s : slots)
            if (!s.failed) { p = s.estimate.size(); break; }
        if (p == 0) {
            // Every replication failed; emit a single diagnostic row.
            MetricsRow row;
            row.estimator = to_string(kind);
            row.parameter = "beta";
            row.truth = cfg.dgp.beta;
            row.n_failed = diag.failures;
            table.rows.push_back(row);
            continue;
        }
        bool np = is_semiparametric(kind);
        if (!np) {
            param_idx = {0, 1, k};
            param_name = {"alpha_0", "alpha_1", "beta"};
            param_truth = {cfg.dgp.alpha0, cfg.dgp.alpha1, cfg.dgp.beta};
        } else {
            param_idx = {k};
            param_name = {"beta"};
            param_truth = {cfg.dgp.beta};
        }
        for (Eigen::Index l = k + m; l < p; ++l) {
            param_idx.push_back(l);
            param_name.push_back(p - (k + m) > 1
                                     ? "rho_" + std::to_string(l - (k + m) + 1)
                                     : "rho");
            param_truth.push_back(cfg.dgp.rho);
        }
        param_idx.push_back(-1); // asf sentinel
        param_name.push_back("asf");
        param_truth.push_back(asf_truth);

        for (size_t q = 0; q < param_idx.size(); ++q) {
            std::vector<double> vals;
            std::vector<double> rej;
            for (const auto& s : slots) {
                if (s.failed) continue;
                double v = param_idx[q] < 0 ? s.asf : s.estimate[param_idx[q]];
                vals.push_back(v);
                Eigen::Index ri = param_idx[q] < 0 ? s.estimate.size()
                                                   : param_idx[q];
                rej.push_back(s.reject[ri]);
            }
            MetricsRow row;
            row.estimator = to_string(kind);
            row.parameter = param_name[q];
            row.truth = param_truth[q];
            row.n_success = static_cast<int>(vals.size());
            row.n_failed = diag.failures;
            if (!vals.empty()) {
                Eigen::VectorXd ev =
                    Eigen::Map<Eigen::VectorXd>(vals.data(),
                                                static_cast<Eigen::Index>(vals.size()));
                Summary s = summarize(ev, row.truth);
                row.mean = s.mean;
                row.std_dev = s.std_dev;
                row.rmse = s.rmse;
                Eigen::VectorXd rv = Eigen::Map<Eigen::VectorXd>(
                    rej.data(), static_cast<Eigen::Index>(rej.size()));
                row.size = rejection_rate(rv);
                for (double x : rej)
                    if (x == 0.0 || x == 1.0) ++row.n_tests;
            }
            table.rows.push_back(row);
        }
    }
    return table;
}

} // namespace rankcf
