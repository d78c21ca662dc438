#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/parametric_liml.hpp"
#include "rankcf/rng.hpp"

namespace rankcf {

// Covariance on the n-scale: sigma estimates n Var(theta_hat), so standard
// errors are sqrt(sigma_jj / n_obs).
struct CovarianceEstimate {
    Eigen::MatrixXd sigma;
    Eigen::Index n_obs = 0;
    int b_used = 0;
    int b_failed = 0;
};

using PointEstimator = std::function<Eigen::VectorXd(const Dataset&)>;

// Pairs bootstrap of a full estimation pipeline: resample rows with
// replacement, re-run the estimator, and average outer products around the
// original-sample estimate, sigma = (n / B) sum_b (t_b - t)(t_b - t)'.
// Replications that throw estimation errors are dropped and counted; more
// than 20 percent of them makes the bootstrap unreliable.
inline CovarianceEstimate pairs_bootstrap(const Dataset& data,
                                          const PointEstimator& estimator,
                                          int b_reps, std::uint64_t seed) {
    if (b_reps < 2) throw config_error("bootstrap: need at least two replications");
    Eigen::Index n = data.n_obs();
    Eigen::VectorXd center = estimator(data);
    Eigen::Index p = center.size();

    CovarianceEstimate out;
    out.n_obs = n;
    out.sigma = Eigen::MatrixXd::Zero(p, p);

    for (int b = 0; b < b_reps; ++b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        Dataset resample;
        resample.y.resize(n);
        resample.z.resize(n, data.z.cols());
        resample.d.resize(n, data.d.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index r = static_cast<Eigen::Index>(
                rng.index(static_cast<std::uint64_t>(n)));
            resample.y[i] = data.y[r];
            resample.z.row(i) = data.z.row(r);
            resample.d.row(i) = data.d.row(r);
        }
        try {
            Eigen::VectorXd est = estimator(resample);
            if (est.size() != p)
                throw shape_error("bootstrap: estimator changed dimension");
            if (!est.allFinite()) throw numerical_error("bootstrap: non-finite estimate");
            Eigen::VectorXd dev = est - center;
            out.sigma.noalias() += dev * dev.transpose();
            ++out.b_used;
        } catch (const numerical_error&) {
            ++out.b_failed;
        } catch (const config_error&) {
            ++out.b_failed;
        }
    }
    if (out.b_used < 2 || out.b_failed * 5 > b_reps)
        throw unreliable_bootstrap_error(
            "bootstrap: " + std::to_string(out.b_failed) + " of " +
                std::to_string(b_reps) + " replications failed",
            out.b_failed, b_reps);
    out.sigma *= static_cast<double>(n) / static_cast<double>(out.b_used);
    return out;
}

// Delta-method standard error of the probit ASF at covariate row x. With
// c = (alpha'z + beta'd)/s and s = sqrt(1 + |rho|^2), the gradient in
// (alpha, beta, rho) is phi(c) (x/s, -c rho/s^2) and
// se = sqrt(grad' sigma grad / n).
struct AsfEstimate {
    double value = 0.0;
    double se = 0.0;
    Eigen::VectorXd gradient;
};

inline Eigen::VectorXd asf_gradient(const Theta& theta, const Eigen::VectorXd& x) {
    Eigen::Index k = theta.alpha.size();
    Eigen::Index m = theta.beta.size();
    Eigen::Index c = theta.rho.size();
    if (x.size() != k + m) throw shape_error("asf_gradient: covariate length mismatch");
    double s2 = 1.0 + theta.rho.squaredNorm();
    double s = std::sqrt(s2);
    double cc = (theta.alpha.dot(x.head(k)) + theta.beta.dot(x.tail(m))) / s;
    Eigen::VectorXd grad(k + m + c);
    grad.head(k + m) = x / s;
    grad.tail(c) = -cc / s2 * theta.rho;
    grad *= norm_pdf(cc);
    return grad;
}

inline AsfEstimate delta_method_asf(const Theta& theta,
                                    const CovarianceEstimate& cov,
                                    const Eigen::VectorXd& x) {
    if (cov.sigma.rows() != theta.size() || cov.sigma.cols() != theta.size())
        throw shape_error("delta_method_asf: covariance dimension mismatch");
    if (cov.n_obs < 1) throw config_error("delta_method_asf: missing sample size");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.sigma,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw numerical_error("delta_method_asf: covariance is not psd");
    AsfEstimate out;
    out.value = asf_parametric(theta, x);
    out.gradient = asf_gradient(theta, x);
    double quad = out.gradient.dot(cov.sigma * out.gradient);
    out.se = std::sqrt(std::max(quad, 0.0) / static_cast<double>(cov.n_obs));
    return out;
}

// Wald statistics (estimate - null) / se with se = sqrt(sigma_jj / n). A zero
// se yields an infinite statistic and a raised flag rather than an exception.
struct TStatistics {
    Eigen::VectorXd t;
    std::vector<bool> zero_se;
};

inline TStatistics t_statistics(const Eigen::VectorXd& estimate,
                                const CovarianceEstimate& cov,
                                const Eigen::VectorXd& nulls) {
    if (estimate.size() != nulls.size() || cov.sigma.rows() != estimate.size())
        throw shape_error("t_statistics: dimension mismatch");
    if (cov.n_obs < 1) throw config_error("t_statistics: missing sample size");
    TStatistics out;
    out.t.resize(estimate.size());
    out.zero_se.assign(static_cast<size_t>(estimate.size()), false);
    for (Eigen::Index j = 0; j < estimate.size(); ++j) {
        double se = std::sqrt(std::max(cov.sigma(j, j), 0.0) /
                              static_cast<double>(cov.n_obs));
        double num = estimate[j] - nulls[j];
        if (se == 0.0) {
            out.zero_se[static_cast<size_t>(j)] = true;
            out.t[j] = num == 0.0 ? 0.0
                                  : std::copysign(
                                        std::numeric_limits<double>::infinity(), num);
        } else {
            out.t[j] = num / se;
        }
    }
    return out;
}

// Fisher-information covariance of a converged fit lifted to the n-scale.
inline CovarianceEstimate fisher_covariance(const FitResult& fit, Eigen::Index n) {
    CovarianceEstimate cov;
    cov.sigma = fit.fisher_cov * static_cast<double>(n);
    cov.n_obs = n;
    return cov;
}

} // namespace rankcf
