#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rankcf/control_function.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/link.hpp"

namespace rankcf {

// Parameter block in estimation order (alpha', beta', rho'). rho is empty for
// fits without control columns and has one entry per control otherwise.
struct Theta {
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
    Eigen::VectorXd rho;

    Eigen::Index size() const { return alpha.size() + beta.size() + rho.size(); }

    Eigen::VectorXd flat() const {
        Eigen::VectorXd out(size());
        out << alpha, beta, rho;
        return out;
    }

    static Theta from_flat(const Eigen::VectorXd& v, Eigen::Index k,
                           Eigen::Index m, Eigen::Index c) {
        if (v.size() != k + m + c) throw shape_error("theta: flat length mismatch");
        Theta t;
        t.alpha = v.head(k);
        t.beta = v.segment(k, m);
        t.rho = v.tail(c);
        return t;
    }
};

struct FitResult {
    Theta theta;
    double loglik = 0.0;
    double score_norm = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd hessian;
    Eigen::MatrixXd fisher_cov;
    int iterations = 0;
    bool converged = false;
    double design_condition = 0.0;
};

struct FitOptions {
    double score_tol = 1e-8;
    int max_iterations = 100;
    int max_halvings = 30;
    double condition_limit = 1e8;
};

namespace detail {

// Condition number through thin QR: cond(W) equals cond(R).
inline double design_condition_of(const Eigen::MatrixXd& w) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    Eigen::MatrixXd r = qr.matrixQR()
                            .topRows(w.cols())
                            .triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const auto& sv = svd.singularValues();
    double smin = sv[sv.size() - 1];
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return sv[0] / smin;
}

inline double mean_loglik(const LinkFamily& link, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w) {
    constexpr double floor_p = 1e-12;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double p = link.cdf(w[i]);
        p = std::min(std::max(p, floor_p), 1.0 - floor_p);
        acc += y[i] == 1.0 ? std::log(p) : std::log1p(-p);
    }
    return acc / static_cast<double>(y.size());
}

} // namespace detail

// Mean log-likelihood at linear index values w = W theta.
inline double loglik(const LinkFamily& link, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& w_mat, const Eigen::VectorXd& theta) {
    if (w_mat.rows() != y.size() || w_mat.cols() != theta.size())
        throw shape_error("loglik: dimension mismatch");
    return detail::mean_loglik(link, y, w_mat * theta);
}

// Mean score n^{-1} sum_i W_i psi_i.
inline Eigen::VectorXd score(const LinkFamily& link, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& w_mat,
                             const Eigen::VectorXd& theta) {
    if (w_mat.rows() != y.size() || w_mat.cols() != theta.size())
        throw shape_error("score: dimension mismatch");
    Eigen::VectorXd w = w_mat * theta;
    Eigen::VectorXd psi(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        psi[i] = psi_weight(link, y[i], w[i]);
    return w_mat.transpose() * psi / static_cast<double>(y.size());
}

// Mean Hessian n^{-1} sum_i W_i W_i' dpsi_i, negative semidefinite on
// identified designs since dpsi < 0.
inline Eigen::MatrixXd hessian(const LinkFamily& link, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& w_mat,
                               const Eigen::VectorXd& theta) {
    if (w_mat.rows() != y.size() || w_mat.cols() != theta.size())
        throw shape_error("hessian: dimension mismatch");
    Eigen::VectorXd w = w_mat * theta;
    Eigen::VectorXd dpsi(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        dpsi[i] = psi_weight_dot(link, y[i], w[i]);
    return w_mat.transpose() * dpsi.asDiagonal() * w_mat /
           static_cast<double>(y.size());
}

namespace detail {

struct NewtonResult {
    Eigen::VectorXd theta;
    double loglik;
    double score_norm;
    Eigen::MatrixXd hess;
    int iterations = 0;
    bool converged = false;
};

inline NewtonResult newton_fit(const LinkFamily& link, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& w_mat,
                               Eigen::VectorXd theta, const FitOptions& opts) {
    NewtonResult res;
    double ll = mean_loglik(link, y, w_mat * theta);
    Eigen::Index p = w_mat.cols();
    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd s = score(link, y, w_mat, theta);
        res.iterations = it;
        if (s.norm() < opts.score_tol) {
            res.converged = true;
            break;
        }
        Eigen::MatrixXd h = hessian(link, y, w_mat, theta);
        // Ascent step (-H)^{-1} s with a ridge fallback when -H loses rank.
        Eigen::MatrixXd neg_h = -h;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
        Eigen::VectorXd step;
        double ridge = 1e-10 * (neg_h.trace() / static_cast<double>(p) + 1.0);
        for (int tries = 0;; ++tries) {
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                step = ldlt.solve(s);
                if (step.allFinite()) break;
            }
            if (tries >= 10)
                throw numerical_error("fit: cannot factor the Hessian");
            ldlt.compute(neg_h + ridge * Eigen::MatrixXd::Identity(p, p));
            ridge *= 10.0;
        }
        double scale = 1.0;
        double ll_new = mean_loglik(link, y, w_mat * (theta + step));
        int halvings = 0;
        while (ll_new <= ll && halvings < opts.max_halvings) {
            scale *= 0.5;
            ll_new = mean_loglik(link, y, w_mat * (theta + scale * step));
            ++halvings;
        }
        if (ll_new <= ll) break; // no ascent direction left at this precision
        theta += scale * step;
        ll = ll_new;
    }
    res.theta = theta;
    res.loglik = ll;
    Eigen::VectorXd s = score(link, y, w_mat, theta);
    res.score_norm = s.norm();
    if (res.score_norm < opts.score_tol) res.converged = true;
    res.hess = hessian(link, y, w_mat, theta);
    return res;
}

} // namespace detail

// Maximum likelihood fit of Y on [z, d, eta] by Newton ascent with step
// halving. eta may have zero columns (plain binary response fit). Control
// columns that are exactly zero are dropped from the optimization and their
// rho entries reported as 0. fisher_cov is -H^{-1}/n at the optimum.
inline FitResult fit(const Dataset& data, const Eigen::MatrixXd& eta,
                     const LinkFamily& link = LinkFamily::probit(),
                     const FitOptions& opts = {}) {
    Eigen::Index n = data.n_obs();
    Eigen::Index k = data.n_exog();
    Eigen::Index m = data.n_endog();
    Eigen::Index c = eta.cols();
    if (c > 0 && eta.rows() != n) throw shape_error("fit: control rows disagree");

    std::vector<Eigen::Index> live; // control columns kept in the optimization
    for (Eigen::Index j = 0; j < c; ++j)
        if (eta.col(j).cwiseAbs().maxCoeff() > 0.0) live.push_back(j);

    Eigen::Index p = k + m + static_cast<Eigen::Index>(live.size());
    Eigen::MatrixXd w_mat(n, p);
    w_mat.leftCols(k) = data.z;
    w_mat.middleCols(k, m) = data.d;
    for (size_t j = 0; j < live.size(); ++j)
        w_mat.col(k + m + static_cast<Eigen::Index>(j)) = eta.col(live[j]);

    double cond = detail::design_condition_of(w_mat);
    if (!(cond < opts.condition_limit))
        throw collinearity_error(
            "fit: collinear design, condition " + std::to_string(cond), cond);

    // Start from the plain fit without controls, rho at zero.
    Eigen::VectorXd start = Eigen::VectorXd::Zero(p);
    if (!live.empty()) {
        detail::NewtonResult plain = detail::newton_fit(
            link, data.y, w_mat.leftCols(k + m), Eigen::VectorXd::Zero(k + m),
            opts);
        start.head(k + m) = plain.theta;
    }

    detail::NewtonResult nr = detail::newton_fit(link, data.y, w_mat, start, opts);

    FitResult out;
    out.loglik = nr.loglik;
    out.score_norm = nr.score_norm;
    out.iterations = nr.iterations;
    out.converged = nr.converged;
    out.design_condition = cond;

    // Re-embed dropped control columns as exact zeros.
    Eigen::Index full = k + m + c;
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(full);
    flat.head(k + m) = nr.theta.head(k + m);
    out.hessian = Eigen::MatrixXd::Zero(full, full);
    out.fisher_cov = Eigen::MatrixXd::Zero(full, full);
    Eigen::MatrixXd cov_live = Eigen::MatrixXd::Zero(p, p);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Eigen::MatrixXd(-nr.hess));
    if (ldlt.info() == Eigen::Success) {
        Eigen::MatrixXd inv =
            ldlt.solve(Eigen::MatrixXd::Identity(p, p)) / static_cast<double>(n);
        if (inv.allFinite()) cov_live = 0.5 * (inv + inv.transpose());
    }
    std::vector<Eigen::Index> pos(static_cast<size_t>(p));
    for (Eigen::Index j = 0; j < k + m; ++j) pos[static_cast<size_t>(j)] = j;
    for (size_t j = 0; j < live.size(); ++j) {
        pos[static_cast<size_t>(k + m) + j] = k + m + live[j];
        flat[k + m + live[j]] = nr.theta[k + m + static_cast<Eigen::Index>(j)];
    }
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) {
            out.hessian(pos[static_cast<size_t>(a)], pos[static_cast<size_t>(b)]) =
                nr.hess(a, b);
            out.fisher_cov(pos[static_cast<size_t>(a)],
                           pos[static_cast<size_t>(b)]) = cov_live(a, b);
        }
    out.theta = Theta::from_flat(flat, k, m, c);
    return out;
}

// Average structural function Phi((alpha'z + beta'd) / sqrt(1 + |rho|^2)) of a
// probit fit, evaluated at covariate row x = (z', d').
inline double asf_parametric(const Theta& theta, const Eigen::VectorXd& x) {
    if (x.size() != theta.alpha.size() + theta.beta.size())
        throw shape_error("asf: covariate length mismatch");
    double idx = theta.alpha.dot(x.head(theta.alpha.size())) +
                 theta.beta.dot(x.tail(theta.beta.size()));
    return norm_cdf(idx / std::sqrt(1.0 + theta.rho.squaredNorm()));
}

// Profile of the maximized log-likelihood over the skewness grid: each lambda
// rebuilds the control from the residual ranks and refits.
inline std::vector<std::pair<double, double>> profile_loglik_lambda(
    const Dataset& data, const Eigen::VectorXd& residuals,
    const std::vector<double>& lambda_grid,
    const LinkFamily& link = LinkFamily::probit(), const FitOptions& opts = {}) {
    if (lambda_grid.empty())
        throw config_error("profile_loglik_lambda: empty grid");
    if (residuals.size() != data.n_obs())
        throw shape_error("profile_loglik_lambda: residual length mismatch");
    std::vector<std::pair<double, double>> out;
    out.reserve(lambda_grid.size());
    for (double l : lambda_grid) {
        ControlFunction cf = build_control(
            residuals, l == 0.0 ? QuantileFamily::std_normal()
                                : QuantileFamily::skew(l));
        FitResult fr = fit(data, cf.values, link, opts);
        out.emplace_back(l, fr.loglik);
    }
    return out;
}

} // namespace rankcf
