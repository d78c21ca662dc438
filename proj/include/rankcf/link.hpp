#pragma once

#include <cmath>

#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"

namespace rankcf {

enum class LinkKind { probit, logit };

struct LinkFamily {
    LinkKind kind = LinkKind::probit;

    static LinkFamily probit() { return {LinkKind::probit}; }
    static LinkFamily logit() { return {LinkKind::logit}; }

    double cdf(double w) const {
        if (kind == LinkKind::probit) return norm_cdf(w);
        return w >= 0.0 ? 1.0 / (1.0 + std::exp(-w))
                        : std::exp(w) / (1.0 + std::exp(w));
    }

    double pdf(double w) const {
        if (kind == LinkKind::probit) return norm_pdf(w);
        double p = cdf(w);
        return p * (1.0 - p);
    }

    double dpdf(double w) const {
        if (kind == LinkKind::probit) return -w * norm_pdf(w);
        double p = cdf(w);
        return p * (1.0 - p) * (1.0 - 2.0 * p);
    }
};

// Score weight psi = (Y - F(w)) f(w) / (F(w)(1 - F(w))). The probit branch is
// evaluated through Mills ratios so the tails stay accurate where F underflows;
// the logit branch collapses to Y - F(w) exactly.
inline double psi_weight(const LinkFamily& link, double y, double w) {
    if (link.kind == LinkKind::logit) return y - link.cdf(w);
    if (y == 1.0) return mills_ratio(w);
    if (y == 0.0) return -mills_ratio(-w);
    return y * mills_ratio(w) - (1.0 - y) * mills_ratio(-w);
}

// Derivative of psi in w. Probit uses dpsi = -w psi - psi^2, the same function
// emerging from either displayed form; logit gives -F(w)(1 - F(w)).
inline double psi_weight_dot(const LinkFamily& link, double y, double w) {
    if (link.kind == LinkKind::logit) {
        double p = link.cdf(w);
        return -p * (1.0 - p);
    }
    double psi = psi_weight(link, y, w);
    return -w * psi - psi * psi;
}

} // namespace rankcf
