#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/parametric_liml.hpp"

namespace rankcf {

// Silverman bandwidth 0.9 min(sd, iqr/1.349) n^{-1/5}.
inline double silverman_bandwidth(const Eigen::VectorXd& x) {
    Eigen::Index n = x.size();
    if (n < 2) throw domain_error("silverman_bandwidth: need at least two points");
    double sd = std::sqrt((x.array() - x.mean()).square().sum() /
                          static_cast<double>(n - 1));
    std::vector<double> s(x.data(), x.data() + n);
    std::sort(s.begin(), s.end());
    auto q = [&](double u) {
        double pos = u * static_cast<double>(n - 1);
        auto lo = static_cast<Eigen::Index>(std::floor(pos));
        auto hi = std::min(lo + 1, n - 1);
        double fr = pos - std::floor(pos);
        return (1.0 - fr) * s[static_cast<size_t>(lo)] +
               fr * s[static_cast<size_t>(hi)];
    };
    double iqr = q(0.75) - q(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.349);
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

// Nadaraya-Watson regression of y on index with a Gaussian kernel, evaluated
// at eval. Observations whose index exactly equals the evaluation point are
// left out, so passing the index itself gives the leave-one-out fit. Outputs
// are clamped to [1e-6, 1 - 1e-6].
inline Eigen::VectorXd nw_link(const Eigen::VectorXd& index,
                               const Eigen::VectorXd& y, double bandwidth,
                               const Eigen::VectorXd& eval) {
    if (index.size() != y.size()) throw shape_error("nw_link: length mismatch");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw bandwidth_error("nw_link: bandwidth must be positive");
    constexpr double clamp_lo = 1e-6;
    constexpr double clamp_hi = 1.0 - 1e-6;
    double inv_h2 = -0.5 / (bandwidth * bandwidth);
    Eigen::ArrayXd xs = index.array();
    Eigen::ArrayXd ya = y.array();
    Eigen::VectorXd out(eval.size());
    for (Eigen::Index i = 0; i < eval.size(); ++i) {
        double t = eval[i];
        Eigen::ArrayXd w = (inv_h2 * (xs - t).square()).exp();
        w = (xs == t).select(0.0, w);
        double den = w.sum();
        if (!(den > 0.0))
            throw bandwidth_error("nw_link: no kernel mass at an evaluation point");
        double val = (w * ya).sum() / den;
        out[i] = std::min(std::max(val, clamp_lo), clamp_hi);
    }
    return out;
}

// Settings for the semiparametric fit. bandwidth 0 defers to the Silverman
// rule on the current index; normalization_index counts columns of [z, d]
// with -1 meaning the first non-intercept exogenous regressor.
struct SemiparamSpec {
    double bandwidth = 0.0;
    std::pair<double, double> trim = {0.01, 0.99};
    Eigen::Index normalization_index = -1;

    void validate() const {
        if (!(trim.first >= 0.0 && trim.first < trim.second && trim.second <= 1.0))
            throw config_error("semiparam: trim quantiles must satisfy 0 <= lo < hi <= 1");
        if (bandwidth < 0.0 || !std::isfinite(bandwidth))
            throw config_error("semiparam: bandwidth must be non-negative");
    }
};

namespace detail {

struct SemiparamProblem {
    const Eigen::MatrixXd& x;   // [z, d]
    const Eigen::MatrixXd& eta;
    const Eigen::VectorXd& y;
    Eigen::Index pin;
    std::vector<Eigen::Index> free_cols;
    Eigen::ArrayXd trim_mask;
    double fixed_bandwidth;

    Eigen::VectorXd index_at(const Eigen::VectorXd& v) const {
        Eigen::VectorXd w = x.col(pin);
        for (size_t j = 0; j < free_cols.size(); ++j)
            w += v[static_cast<Eigen::Index>(j)] * x.col(free_cols[j]);
        if (eta.cols() > 0)
            w += eta * v.tail(eta.cols());
        return w;
    }

    double bandwidth_at(const Eigen::VectorXd& w) const {
        return fixed_bandwidth > 0.0 ? fixed_bandwidth : silverman_bandwidth(w);
    }

    // The bandwidth rule is part of the objective: tying it to the current
    // index at every evaluation keeps the smoothing scale-relative, so the
    // optimizer cannot sharpen the link by inflating the free coefficients.
    double objective(const Eigen::VectorXd& v) const {
        Eigen::VectorXd w = index_at(v);
        Eigen::VectorXd f = nw_link(w, y, bandwidth_at(w), w);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (trim_mask[i] == 0.0) continue;
            acc += y[i] == 1.0 ? std::log(f[i]) : std::log1p(-f[i]);
        }
        return acc / static_cast<double>(y.size());
    }
};

inline Eigen::VectorXd central_gradient(const SemiparamProblem& prob,
                                        const Eigen::VectorXd& v, double step) {
    Eigen::VectorXd g(v.size());
    Eigen::VectorXd vv = v;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        vv[j] = v[j] + step;
        double up = prob.objective(vv);
        vv[j] = v[j] - step;
        double dn = prob.objective(vv);
        vv[j] = v[j];
        g[j] = (up - dn) / (2.0 * step);
    }
    return g;
}

} // namespace detail

// Semiparametric fit: trimmed quasi-likelihood with a leave-one-out
// Nadaraya-Watson link, the coefficient at normalization_index pinned to 1 and
// no intercept. Maximized by BFGS with central-difference gradients
// (step 1e-5), objective tolerance 1e-9, at most 200 iterations. Trimming is
// frozen at the starting index. start_theta gives the starting point as a full
// coefficient vector over [z, d, eta]; pass an empty vector to start all free
// coefficients at zero.
inline FitResult fit_semiparam(const Dataset& data, const Eigen::MatrixXd& eta,
                               const SemiparamSpec& spec = {},
                               const Eigen::VectorXd& start_theta = {}) {
    spec.validate();
    Eigen::Index n = data.n_obs();
    Eigen::Index k = data.n_exog();
    Eigen::Index m = data.n_endog();
    Eigen::Index c = eta.cols();
    if (k < 2)
        throw config_error("semiparam: need a non-intercept exogenous regressor");
    if (c > 0 && eta.rows() != n) throw shape_error("semiparam: control rows disagree");

    Eigen::Index pin = spec.normalization_index < 0 ? 1 : spec.normalization_index;
    if (pin < 1 || pin >= k + m)
        throw config_error("semiparam: normalization index out of range");

    Eigen::MatrixXd x = data.x();
    detail::SemiparamProblem prob{x, eta, data.y, pin, {}, {}, 0.0};
    for (Eigen::Index j = 1; j < k + m; ++j)
        if (j != pin) prob.free_cols.push_back(j);
    Eigen::Index p = static_cast<Eigen::Index>(prob.free_cols.size()) + c;

    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(p);
    if (start_theta.size() > 0) {
        if (start_theta.size() != k + m + c)
            throw shape_error("semiparam: start length mismatch");
        for (size_t j = 0; j < prob.free_cols.size(); ++j)
            v0[static_cast<Eigen::Index>(j)] = start_theta[prob.free_cols[j]];
        v0.tail(c) = start_theta.tail(c);
    }

    // Trim set frozen at the starting index.
    {
        Eigen::VectorXd w0 = prob.index_at(v0);
        std::vector<double> s(w0.data(), w0.data() + n);
        std::sort(s.begin(), s.end());
        auto quant = [&](double u) {
            double pos = u * static_cast<double>(n - 1);
            auto lo = static_cast<Eigen::Index>(std::floor(pos));
            auto hi = std::min(lo + 1, n - 1);
            double fr = pos - std::floor(pos);
            return (1.0 - fr) * s[static_cast<size_t>(lo)] +
                   fr * s[static_cast<size_t>(hi)];
        };
        double lo = quant(spec.trim.first);
        double hi = quant(spec.trim.second);
        prob.trim_mask = ((w0.array() >= lo) && (w0.array() <= hi)).cast<double>();
        if (prob.trim_mask.sum() < 10.0)
            throw degenerate_trim_error("semiparam: fewer than 10 observations survive trimming");
    }

    constexpr double grad_step = 1e-5;
    constexpr double obj_tol = 1e-9;
    constexpr int max_iter = 200;

    // BFGS on the negated objective with central-difference gradients.
    Eigen::VectorXd v = v0;
    double fv = -prob.objective(v);
    Eigen::VectorXd g = -detail::central_gradient(prob, v, grad_step);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p, p);
    bool converged = false;
    int iters = 0;

    for (int it = 0; it < max_iter; ++it) {
        iters = it + 1;
        Eigen::VectorXd dir = -hinv * g;
        double slope = g.dot(dir);
        if (!dir.allFinite() || slope >= 0.0) {
            hinv.setIdentity();
            dir = -g;
            slope = g.dot(dir);
        }
        if (slope == 0.0) { converged = true; break; }

        double t = 1.0;
        double fn = fv;
        Eigen::VectorXd vn = v;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            vn = v + t * dir;
            fn = -prob.objective(vn);
            if (std::isfinite(fn) && fn <= fv + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) { converged = true; break; } // stationary at resolution

        Eigen::VectorXd gn = -detail::central_gradient(prob, vn, grad_step);
        Eigen::VectorXd sv = vn - v;
        Eigen::VectorXd yv = gn - g;
        double sy = sv.dot(yv);
        if (sy > 1e-12 * sv.norm() * yv.norm()) {
            Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
            Eigen::MatrixXd left = eye - sv * yv.transpose() / sy;
            hinv = left * hinv * left.transpose() + sv * sv.transpose() / sy;
        }
        bool done = std::abs(fn - fv) < obj_tol * (1.0 + std::abs(fv));
        v = vn;
        fv = fn;
        g = gn;
        if (done) { converged = true; break; }
    }
    double f = -fv;

    // Embed the free coordinates into the full coefficient vector.
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(k + m + c);
    flat[pin] = 1.0;
    for (size_t j = 0; j < prob.free_cols.size(); ++j)
        flat[prob.free_cols[j]] = v[static_cast<Eigen::Index>(j)];
    flat.tail(c) = v.tail(c);

    FitResult out;
    out.theta = Theta::from_flat(flat, k, m, c);
    out.loglik = f;
    out.score_norm = g.norm();
    out.iterations = iters;
    out.converged = converged;

    // Numeric Hessian of the objective on the free coordinates, embedded with
    // zero rows for the pinned and intercept positions.
    Eigen::MatrixXd hfree(p, p);
    {
        double s2 = 1e-4;
        Eigen::VectorXd vv = v;
        double f0 = prob.objective(v);
        for (Eigen::Index a = 0; a < p; ++a) {
            vv[a] = v[a] + s2;
            double fp = prob.objective(vv);
            vv[a] = v[a] - s2;
            double fm = prob.objective(vv);
            vv[a] = v[a];
            hfree(a, a) = (fp - 2.0 * f0 + fm) / (s2 * s2);
        }
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = a + 1; b < p; ++b) {
                vv[a] = v[a] + s2; vv[b] = v[b] + s2;
                double fpp = prob.objective(vv);
                vv[b] = v[b] - s2;
                double fpm = prob.objective(vv);
                vv[a] = v[a] - s2; vv[b] = v[b] + s2;
                double fmp = prob.objective(vv);
                vv[b] = v[b] - s2;
                double fmm = prob.objective(vv);
                vv[a] = v[a]; vv[b] = v[b];
                hfree(a, b) = hfree(b, a) = (fpp - fpm - fmp + fmm) / (4.0 * s2 * s2);
            }
    }
    std::vector<Eigen::Index> pos;
    pos.reserve(static_cast<size_t>(p));
    for (auto j : prob.free_cols) pos.push_back(j);
    for (Eigen::Index l = 0; l < c; ++l) pos.push_back(k + m + l);
    out.hessian = Eigen::MatrixXd::Zero(k + m + c, k + m + c);
    out.fisher_cov = Eigen::MatrixXd::Zero(k + m + c, k + m + c);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Eigen::MatrixXd(-hfree));
    Eigen::MatrixXd cov_free;
    if (ldlt.info() == Eigen::Success) {
        cov_free = ldlt.solve(Eigen::MatrixXd::Identity(p, p)) /
                   static_cast<double>(n);
        if (!cov_free.allFinite()) cov_free = Eigen::MatrixXd::Zero(p, p);
    } else {
        cov_free = Eigen::MatrixXd::Zero(p, p);
    }
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) {
            out.hessian(pos[static_cast<size_t>(a)], pos[static_cast<size_t>(b)]) =
                hfree(a, b);
            out.fisher_cov(pos[static_cast<size_t>(a)],
                           pos[static_cast<size_t>(b)]) = cov_free(a, b);
        }
    Eigen::MatrixXd design(n, k + m - 1 + c);
    design.leftCols(k + m - 1) = x.rightCols(k + m - 1);
    if (c > 0) design.rightCols(c) = eta;
    out.design_condition = detail::design_condition_of(design);
    return out;
}

// Nonparametric average structural function: the fitted link evaluated at
// x'gamma + rho'eta_i, averaged over the sample.
inline double asf_nonparam(const Theta& theta, const Dataset& data,
                           const Eigen::MatrixXd& eta, const Eigen::VectorXd& x,
                           const SemiparamSpec& spec = {}) {
    spec.validate();
    Eigen::Index k = data.n_exog();
    Eigen::Index m = data.n_endog();
    if (x.size() != k + m) throw shape_error("asf_nonparam: covariate length mismatch");
    if (theta.alpha.size() != k || theta.beta.size() != m ||
        theta.rho.size() != eta.cols())
        throw shape_error("asf_nonparam: theta does not match the data");
    Eigen::VectorXd gamma(k + m);
    gamma << theta.alpha, theta.beta;
    Eigen::VectorXd train = data.x() * gamma;
    if (eta.cols() > 0) train += eta * theta.rho;
    double h = spec.bandwidth > 0.0 ? spec.bandwidth : silverman_bandwidth(train);
    double base = x.dot(gamma);
    Eigen::VectorXd evals = Eigen::VectorXd::Constant(data.n_obs(), base);
    if (eta.cols() > 0) evals += eta * theta.rho;
    return nw_link(train, data.y, h, evals).mean();
}

} // namespace rankcf
