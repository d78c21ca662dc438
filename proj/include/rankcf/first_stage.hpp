#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rankcf/errors.hpp"

namespace rankcf {

enum class FirstStageKind { ols, local_linear };

struct FirstStageFit {
    FirstStageKind kind = FirstStageKind::ols;
    Eigen::VectorXd coefficients; // OLS only
    double bandwidth = 0.0;       // local-linear only
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
};

// Normal-reference rule of thumb, 1.06 * sd * n^{-1/5}.
inline double rot_bandwidth(const Eigen::VectorXd& x) {
    Eigen::Index n = x.size();
    double sd = std::sqrt((x.array() - x.mean()).square().sum() /
                          static_cast<double>(n - 1));
    return 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
}

namespace detail {

// Local linear mean of (x, y) at each entry of eval with Gaussian weights.
inline Eigen::VectorXd local_linear_smooth(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& y, double h,
                                           const Eigen::VectorXd& eval) {
    if (h <= 0.0 || !std::isfinite(h))
        throw bandwidth_error("local_linear: bandwidth must be positive");
    Eigen::Index n = x.size();
    Eigen::VectorXd out(eval.size());
    Eigen::ArrayXd xa = x.array();
    Eigen::ArrayXd ya = y.array();
    for (Eigen::Index i = 0; i < eval.size(); ++i) {
        Eigen::ArrayXd t = xa - eval[i];
        // Sparse regions (tail evaluation points) double the local bandwidth
        // until the effective sample supports a linear fit; a bandwidth that
        // stays starved after 20 doublings is reported as too small.
        double hi = h;
        Eigen::ArrayXd w;
        double sw = 0.0;
        for (int widen = 0;; ++widen) {
            w = (-0.5 / (hi * hi) * t.square()).exp();
            sw = w.sum();
            double sw2 = w.square().sum();
            double ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
            if (ess >= 3.0) break;
            if (widen >= 20)
                throw bandwidth_error(
                    "local_linear: effective local sample below 3, widen the bandwidth");
            hi *= 2.0;
        }
        Eigen::ArrayXd wt = w * t;
        double s1 = wt.sum();
        double s2 = (wt * t).sum();
        double t0 = (w * ya).sum();
        double t1 = (wt * ya).sum();
        double denom = sw * s2 - s1 * s1;
        if (!(denom > 0.0) || !std::isfinite(denom))
            throw bandwidth_error("local_linear: degenerate local design");
        out[i] = (s2 * t0 - s1 * t1) / denom;
    }
    return out;
}

} // namespace detail

// Linear first stage d ~ z by least squares.
inline FirstStageFit fit_ols(const Eigen::MatrixXd& z, const Eigen::VectorXd& d) {
    if (z.rows() != d.size()) throw shape_error("fit_ols: row counts disagree");
    if (z.rows() < z.cols()) throw config_error("fit_ols: more columns than rows");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double tol = static_cast<double>(z.rows()) *
                 std::numeric_limits<double>::epsilon() * sv[0];
    double smin = sv[sv.size() - 1];
    if (!(smin > tol)) {
        double cond = smin > 0.0 ? sv[0] / smin
                                 : std::numeric_limits<double>::infinity();
        throw singular_design_error("fit_ols: rank-deficient design, condition " +
                                        std::to_string(cond),
                                    cond);
    }
    FirstStageFit fit;
    fit.kind = FirstStageKind::ols;
    fit.coefficients = svd.solve(d);
    fit.fitted = z * fit.coefficients;
    fit.residuals = d - fit.fitted;
    return fit;
}

// Nonparametric first stage: local linear regression of d on the non-intercept
// columns of z, additive with backfitting when there is more than one. The
// bandwidth applies to every component; pass 0 for the rule of thumb.
inline FirstStageFit fit_local_linear(const Eigen::MatrixXd& z,
                                      const Eigen::VectorXd& d,
                                      double bandwidth = 0.0) {
    Eigen::Index n = z.rows();
    if (n != d.size()) throw shape_error("fit_local_linear: row counts disagree");
    if (z.cols() < 2)
        throw config_error("fit_local_linear: no non-intercept regressor");
    Eigen::Index p = z.cols() - 1;
    for (Eigen::Index j = 1; j < z.cols(); ++j)
        if ((z.col(j).array() == z(0, j)).all())
            throw config_error("fit_local_linear: regressor without variation");

    FirstStageFit fit;
    fit.kind = FirstStageKind::local_linear;

    if (p == 1) {
        Eigen::VectorXd x = z.col(1);
        double h = bandwidth > 0.0 ? bandwidth : rot_bandwidth(x);
        fit.bandwidth = h;
        fit.fitted = detail::local_linear_smooth(x, d, h, x);
    } else {
        // Backfitting over additive components, each smoothed on its own column.
        double mean_d = d.mean();
        std::vector<Eigen::VectorXd> comp(p, Eigen::VectorXd::Zero(n));
        std::vector<double> hs(p);
        for (Eigen::Index j = 0; j < p; ++j)
            hs[j] = bandwidth > 0.0 ? bandwidth : rot_bandwidth(z.col(j + 1));
        fit.bandwidth = hs[0];
        Eigen::VectorXd fitted = Eigen::VectorXd::Constant(n, mean_d);
        for (int sweep = 0; sweep < 50; ++sweep) {
            double delta = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                Eigen::VectorXd partial = d - Eigen::VectorXd::Constant(n, mean_d);
                for (Eigen::Index l = 0; l < p; ++l)
                    if (l != j) partial -= comp[l];
                Eigen::VectorXd next =
                    detail::local_linear_smooth(z.col(j + 1), partial, hs[j],
                                                z.col(j + 1));
                next.array() -= next.mean();
                delta = std::max(delta, (next - comp[j]).cwiseAbs().maxCoeff());
                comp[j] = next;
            }
            if (delta < 1e-8) break;
        }
        fitted = Eigen::VectorXd::Constant(n, mean_d);
        for (Eigen::Index j = 0; j < p; ++j) fitted += comp[j];
        fit.fitted = fitted;
    }
    fit.residuals = d - fit.fitted;
    return fit;
}

} // namespace rankcf
