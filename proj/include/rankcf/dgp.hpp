#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "rankcf/dataset.hpp"
#include "rankcf/normal.hpp"
#include "rankcf/rng.hpp"

namespace rankcf {

enum class PiShape { linear, quadratic };
enum class VDist { std_normal, centered_gamma22 };

// Simulation design: Y = 1{a0 + a1 Z + b D + U > 0}, D = pi(Z) + V,
// U = rho * m(V) + E with Z, E standard normal and m(v) = Phi^{-1}(G(v)).
// The first stage is pi(z) = z/2 or z^2/2, and V is either standard normal
// or a centered Gamma(2,2) rescaled to unit variance, so both error
// families enter with the same mean and scale.
struct DgpConfig {
    double alpha0 = 0.5;
    double alpha1 = 1.0;
    double beta = 1.0;
    double rho = 0.0;
    PiShape pi_shape = PiShape::quadratic;
    VDist v_dist = VDist::std_normal;
    Eigen::Index n = 500;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 2) throw config_error("dgp: need at least two observations");
        if (!std::isfinite(alpha0) || !std::isfinite(alpha1) ||
            !std::isfinite(beta) || !std::isfinite(rho))
            throw config_error("dgp: non-finite parameter");
    }
};

struct SimSample {
    Dataset dataset;
    Eigen::VectorXd v_true;
    Eigen::VectorXd m_v_true;
    Eigen::VectorXd e_true;
};

inline double pi_of_z(PiShape shape, double z) {
    return shape == PiShape::linear ? 0.5 * z : 0.5 * z * z;
}

// Gamma(2,2) draws have mean 1 and variance 1/2; the reduced-form error is
// the centered draw rescaled to unit variance.
inline constexpr double gamma22_sd = 0.70710678118654752;

// Normal score of the first-stage error: m(v) = Phi^{-1}(G(v)). The standard
// normal case is the identity; the centered gamma case maps the standardized
// value back to the raw draw and goes through the upper tail survival form to
// stay accurate where G(v) is close to 1.
inline double normal_score_of_v(VDist dist, double v) {
    if (dist == VDist::std_normal) return v;
    double x = v * gamma22_sd + 1.0;
    double sf = gamma22_sf(x);
    if (sf < 0.5) return -norm_quantile(sf);
    return norm_quantile(gamma22_cdf(x));
}

inline SimSample generate(const DgpConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    Eigen::Index n = cfg.n;

    SimSample s;
    s.dataset.y.resize(n);
    s.dataset.z.resize(n, 2);
    s.dataset.d.resize(n, 1);
    s.v_true.resize(n);
    s.m_v_true.resize(n);
    s.e_true.resize(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        double z = rng.normal();
        double v = cfg.v_dist == VDist::std_normal
                       ? rng.normal()
                       : (rng.gamma22() - 1.0) / gamma22_sd;
        double e = rng.normal();
        double m = normal_score_of_v(cfg.v_dist, v);
        double d = pi_of_z(cfg.pi_shape, z) + v;
        double idx = cfg.alpha0 + cfg.alpha1 * z + cfg.beta * d + cfg.rho * m + e;
        s.dataset.z(i, 0) = 1.0;
        s.dataset.z(i, 1) = z;
        s.dataset.d(i, 0) = d;
        s.v_true[i] = v;
        s.m_v_true[i] = m;
        s.e_true[i] = e;
        s.dataset.y[i] = idx > 0.0 ? 1.0 : 0.0;
    }
    return s;
}

// Average structural function of the design at covariate values (z, d):
// Phi((a0 + a1 z + b d) / sqrt(1 + rho^2)).
inline double true_asf(const DgpConfig& cfg, double z, double d) {
    double idx = cfg.alpha0 + cfg.alpha1 * z + cfg.beta * d;
    return norm_cdf(idx / std::sqrt(1.0 + cfg.rho * cfg.rho));
}

} // namespace rankcf
