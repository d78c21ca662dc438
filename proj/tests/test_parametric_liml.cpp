#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rankcf/rankcf.hpp"

using namespace rankcf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Twelve observations with three duplicated covariate points carrying both
// outcomes, which pins the maximizer to a bounded interior point.
Dataset twelve_point_data(Eigen::MatrixXd& eta) {
    Dataset data;
    Eigen::VectorXd z1(12), d(12), e(12);
    z1 << 0, 0, 1, 1, -1, -1, 0.5, -0.5, 1.5, -1.5, 0.3, -0.3;
    d << 0, 0, 0.5, 0.5, -0.5, -0.5, 1.0, -1.0, -0.2, 0.2, -0.7, 0.7;
    e << 0, 0, 0.3, 0.3, -0.3, -0.3, 0.8, -0.8, 0.1, -0.1, 0.5, -0.5;
    data.y.resize(12);
    data.y << 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1;
    data.z.resize(12, 2);
    data.z.col(0).setOnes();
    data.z.col(1) = z1;
    data.d = d;
    eta = e;
    return data;
}

struct Instance {
    Eigen::VectorXd y;
    Eigen::MatrixXd w;
    Eigen::VectorXd theta;
};

Instance random_instance(std::uint64_t seed) {
    Rng rng(seed);
    Eigen::Index n = 30, p = 4;
    Instance inst;
    inst.y.resize(n);
    inst.w.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        inst.w(i, 0) = 1.0;
        for (Eigen::Index j = 1; j < p; ++j) inst.w(i, j) = rng.normal();
        inst.y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    inst.theta.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) inst.theta[j] = 0.5 * rng.normal();
    return inst;
}

} // namespace

TEST_CASE("log-likelihood closed forms", "[parametric]") {
    Eigen::VectorXd y(4);
    y << 1, 0, 1, 0;
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(4, 1);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    for (LinkFamily link : {LinkFamily::probit(), LinkFamily::logit()})
        REQUIRE_THAT(loglik(link, y, w, zero),
                     WithinAbs(std::log(0.5), 1e-15));

    Eigen::VectorXd one_y(1), one_theta(1);
    one_y << 1;
    one_theta << 1;
    Eigen::MatrixXd one_w = Eigen::MatrixXd::Ones(1, 1);
    double ll = loglik(LinkFamily::probit(), one_y, one_w, one_theta);
    REQUIRE_THAT(ll, WithinAbs(std::log(static_cast<double>(oracle::norm_cdf_ld(1.0L))),
                               1e-14));
    REQUIRE_THAT(ll, WithinAbs(-0.17275377902345, 1e-9));
}

TEST_CASE("score weights at zero index", "[parametric]") {
    LinkFamily probit = LinkFamily::probit();
    REQUIRE_THAT(psi_weight(probit, 1.0, 0.0),
                 WithinAbs(0.79788456080286541, 1e-15));
    REQUIRE_THAT(psi_weight(probit, 0.0, 0.0),
                 WithinAbs(-0.79788456080286541, 1e-15));
    REQUIRE_THAT(psi_weight_dot(probit, 1.0, 0.0),
                 WithinAbs(-2.0 / std::acos(-1.0), 1e-15));
    LinkFamily logit = LinkFamily::logit();
    REQUIRE_THAT(psi_weight(logit, 1.0, 0.0), WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(psi_weight(logit, 0.0, 0.0), WithinAbs(-0.5, 1e-15));
    REQUIRE_THAT(psi_weight_dot(logit, 1.0, 0.0), WithinAbs(-0.25, 1e-15));
}

TEST_CASE("score weight matches the ratio definition", "[parametric]") {
    for (LinkFamily link : {LinkFamily::probit(), LinkFamily::logit()})
        for (double y : {0.0, 1.0})
            for (double w : {-6.0, -2.5, -0.7, 0.0, 0.4, 1.9, 6.0}) {
                if (link.kind == LinkKind::probit && std::abs(w) > 4.0) {
                    // 1 - F(w) cancels in double at w = 6; evaluate the ratio
                    // in long double instead.
                    long double p = oracle::norm_cdf_ld(w);
                    long double ref = (static_cast<long double>(y) - p) *
                                      oracle::norm_pdf_ld(w) / (p * (1.0L - p));
                    REQUIRE_THAT(psi_weight(link, y, w),
                                 WithinRel(static_cast<double>(ref), 1e-9));
                } else {
                    double p = link.cdf(w);
                    double ref = (y - p) * link.pdf(w) / (p * (1.0 - p));
                    REQUIRE_THAT(psi_weight(link, y, w), WithinAbs(ref, 1e-10));
                }
            }
}

TEST_CASE("score weight derivative matches finite differences", "[parametric]") {
    for (LinkFamily link : {LinkFamily::probit(), LinkFamily::logit()})
        for (double y : {0.0, 1.0})
            for (double w : {-8.5, -3.0, -0.5, 0.0, 1.2, 4.0, 9.0}) {
                double h = 1e-5;
                double fd = (psi_weight(link, y, w + h) -
                             psi_weight(link, y, w - h)) /
                            (2.0 * h);
                REQUIRE_THAT(psi_weight_dot(link, y, w), WithinAbs(fd, 1e-6));
                REQUIRE(psi_weight_dot(link, y, w) < 0.0);
            }
    // Deep tails stay finite and keep the derivative negative.
    for (double w : {-37.0, 37.0}) {
        REQUIRE(std::isfinite(psi_weight(LinkFamily::probit(), 1.0, w)));
        REQUIRE(psi_weight_dot(LinkFamily::probit(), 1.0, w) < 0.0);
    }
}

TEST_CASE("analytic score and hessian match finite differences", "[parametric]") {
    for (LinkFamily link : {LinkFamily::probit(), LinkFamily::logit()})
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            Instance inst = random_instance(seed);
            auto f = [&](const Eigen::VectorXd& t) {
                return loglik(link, inst.y, inst.w, t);
            };
            Eigen::VectorXd g = score(link, inst.y, inst.w, inst.theta);
            Eigen::VectorXd g_fd = oracle::fd_gradient(f, inst.theta, 1e-5);
            REQUIRE((g - g_fd).cwiseAbs().maxCoeff() < 1e-6);

            auto s = [&](const Eigen::VectorXd& t) {
                return score(link, inst.y, inst.w, t);
            };
            Eigen::MatrixXd h = hessian(link, inst.y, inst.w, inst.theta);
            Eigen::MatrixXd h_fd = oracle::fd_jacobian(s, inst.theta, 1e-5);
            REQUIRE((h - h_fd).cwiseAbs().maxCoeff() < 1e-5);
        }
}

TEST_CASE("hessian is negative semidefinite", "[parametric]") {
    for (LinkFamily link : {LinkFamily::probit(), LinkFamily::logit()})
        for (std::uint64_t seed = 20; seed < 25; ++seed) {
            Instance inst = random_instance(seed);
            Eigen::MatrixXd h = hessian(link, inst.y, inst.w, inst.theta);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
            REQUIRE(es.eigenvalues().maxCoeff() <= 1e-10);
        }
}

TEST_CASE("logit hessian at zero is minus a quarter of the Gram matrix",
          "[parametric]") {
    Instance inst = random_instance(30);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd h = hessian(LinkFamily::logit(), inst.y, inst.w, zero);
    Eigen::MatrixXd want = -0.25 * (inst.w.transpose() * inst.w) / 30.0;
    REQUIRE((h - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("newton fit agrees with a brute force maximizer", "[parametric]") {
    Eigen::MatrixXd eta;
    Dataset data = twelve_point_data(eta);
    FitResult fr = fit(data, eta);
    REQUIRE(fr.converged);
    REQUIRE(fr.score_norm < 1e-8);

    Eigen::MatrixXd w(12, 4);
    w.leftCols(2) = data.z;
    w.col(2) = data.d;
    w.col(3) = eta;
    auto f = [&](const Eigen::VectorXd& t) {
        return loglik(LinkFamily::probit(), data.y, w, t);
    };
    Eigen::VectorXd best = oracle::grid_polish_maximize(f, -4.0, 4.0, 7, 4);
    REQUIRE((fr.theta.flat() - best).cwiseAbs().maxCoeff() < 1e-4);

    // The reported objective dominates the whole polished grid search.
    REQUIRE(fr.loglik >= f(best) - 1e-10);
}

TEST_CASE("a zero control column reduces to the plain fit", "[parametric]") {
    Eigen::MatrixXd eta;
    Dataset data = twelve_point_data(eta);
    Eigen::MatrixXd none(12, 0);
    FitResult plain = fit(data, none);
    Eigen::MatrixXd zero_col = Eigen::MatrixXd::Zero(12, 1);
    FitResult with_zero = fit(data, zero_col);
    REQUIRE(with_zero.theta.rho.size() == 1);
    REQUIRE(with_zero.theta.rho[0] == 0.0);
    REQUIRE((plain.theta.alpha - with_zero.theta.alpha).cwiseAbs().maxCoeff() <
            1e-8);
    REQUIRE((plain.theta.beta - with_zero.theta.beta).cwiseAbs().maxCoeff() <
            1e-8);
    // Dropped column rows of the covariance are identically zero.
    REQUIRE(with_zero.fisher_cov.row(3).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(with_zero.fisher_cov.col(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("collinear control column is rejected before fitting", "[parametric]") {
    Rng rng(31);
    Dataset data;
    Eigen::Index n = 40;
    data.y.resize(n);
    data.z.resize(n, 2);
    data.d.resize(n, 1);
    Eigen::MatrixXd eta(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        double z = rng.normal();
        double v = rng.normal();
        data.z(i, 0) = 1.0;
        data.z(i, 1) = z;
        data.d(i, 0) = z + v;
        eta(i, 0) = v; // d - z - eta vanishes identically
        data.y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    REQUIRE_THROWS_AS(fit(data, eta), collinearity_error);
}

TEST_CASE("fit is invariant to row order", "[parametric]") {
    Eigen::MatrixXd eta;
    Dataset data = twelve_point_data(eta);
    Dataset rev;
    rev.y = data.y.reverse();
    rev.z = data.z.colwise().reverse();
    rev.d = data.d.colwise().reverse();
    Eigen::MatrixXd eta_rev = eta.colwise().reverse();
    FitResult a = fit(data, eta);
    FitResult b = fit(rev, eta_rev);
    REQUIRE((a.theta.flat() - b.theta.flat()).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE_THAT(a.loglik, WithinAbs(b.loglik, 1e-12));
}

TEST_CASE("fisher covariance inverts the hessian", "[parametric]") {
    Eigen::MatrixXd eta;
    Dataset data = twelve_point_data(eta);
    FitResult fr = fit(data, eta);
    Eigen::MatrixXd want = (-fr.hessian).inverse() / 12.0;
    REQUIRE((fr.fisher_cov - want).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((fr.fisher_cov - fr.fisher_cov.transpose()).cwiseAbs().maxCoeff() <
            1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fr.fisher_cov);
    REQUIRE(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("parametric average structural function", "[parametric]") {
    Theta theta;
    theta.alpha.resize(2);
    theta.alpha << 0.5, 1.0;
    theta.beta.resize(1);
    theta.beta << 1.0;
    theta.rho.resize(1);

    Eigen::VectorXd x(3);
    x << 1.0, 0.0, 0.0;
    theta.rho << 0.0;
    REQUIRE_THAT(asf_parametric(theta, x),
                 WithinAbs(0.69146246127401312, 1e-13));
    theta.rho << 0.5;
    REQUIRE_THAT(asf_parametric(theta, x), WithinAbs(0.6726, 5e-5));
    theta.rho << 1e8;
    REQUIRE_THAT(asf_parametric(theta, x), WithinAbs(0.5, 1e-8));

    Eigen::VectorXd bad(2);
    bad << 1.0, 0.0;
    REQUIRE_THROWS_AS(asf_parametric(theta, bad), shape_error);
}

TEST_CASE("skewness profile brackets the true transform", "[parametric]") {
    // The profile is flat in lambda near zero, so the grid argmax needs a
    // large sample before it concentrates inside the first grid step.
    DgpConfig cfg;
    cfg.rho = 0.5;
    cfg.n = 20000;
    cfg.seed = 33;
    SimSample s = generate(cfg);
    FirstStageFit fs = fit_local_linear(s.dataset.z, s.dataset.d.col(0));

    std::vector<double> grid;
    for (int i = -4; i <= 4; ++i) grid.push_back(0.2 * i);
    auto prof = profile_loglik_lambda(s.dataset, fs.residuals, grid);
    REQUIRE(prof.size() == grid.size());
    size_t best = 0;
    for (size_t i = 1; i < prof.size(); ++i)
        if (prof[i].second > prof[best].second) best = i;
    // The errors are normal, so the profile peaks near lambda = 0.
    REQUIRE(std::abs(prof[best].first) <= 0.2 + 1e-12);

    // lambda = 0 reproduces the plain normal-quantile fit exactly.
    ControlFunction cf = build_control(fs.residuals, QuantileFamily::std_normal());
    FitResult direct = fit(s.dataset, cf.values);
    REQUIRE(prof[4].first == 0.0);
    REQUIRE(prof[4].second == direct.loglik);

    REQUIRE_THROWS_AS(profile_loglik_lambda(s.dataset, fs.residuals, {}),
                      config_error);
}

TEST_CASE("shape validation in the likelihood operations", "[parametric]") {
    Instance inst = random_instance(40);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    REQUIRE_THROWS_AS(loglik(LinkFamily::probit(), inst.y, inst.w, bad),
                      shape_error);
    REQUIRE_THROWS_AS(score(LinkFamily::probit(), inst.y, inst.w, bad),
                      shape_error);
    REQUIRE_THROWS_AS(hessian(LinkFamily::probit(), inst.y, inst.w, bad),
                      shape_error);
    REQUIRE_THROWS_AS(Theta::from_flat(bad, 2, 1, 1), shape_error);
}
