#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "rankcf/errors.hpp"
#include "rankcf/normal.hpp"

namespace rankcf {

enum class QuantileKind { std_normal, two_piece_skew_normal, identity };

// Quantile transform applied to the empirical ranks of the first-stage
// residuals. identity skips the transform and uses the residuals themselves.
struct QuantileFamily {
    QuantileKind kind = QuantileKind::std_normal;
    double lambda = 0.0;

    static QuantileFamily std_normal() { return {QuantileKind::std_normal, 0.0}; }
    static QuantileFamily identity() { return {QuantileKind::identity, 0.0}; }
    static QuantileFamily skew(double lambda) {
        QuantileFamily f{QuantileKind::two_piece_skew_normal, lambda};
        f.validate();
        return f;
    }

    void validate() const {
        if (kind == QuantileKind::two_piece_skew_normal &&
            !(lambda > -1.0 && lambda < 1.0))
            throw config_error("quantile family: lambda must lie in (-1, 1)");
    }
};

// Relative empirical ranks r_i/(n+1) with midranks for ties.
inline Eigen::VectorXd empirical_ranks(const Eigen::VectorXd& v) {
    Eigen::Index n = v.size();
    if (n == 0) throw domain_error("empirical_ranks: empty vector");
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
    Eigen::VectorXd ranks(n);
    double scale = 1.0 / (static_cast<double>(n) + 1.0);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        // Positions i..j (0-based) share the midrank ((i+1) + (j+1)) / 2.
        double mid = 0.5 * static_cast<double>(i + j + 2);
        for (Eigen::Index l = i; l <= j; ++l) ranks[order[l]] = mid * scale;
        i = j + 1;
    }
    return ranks;
}

// Quantile function of the family at u in (0, 1). The two-piece skew normal is
//   (1+lambda) Phi^{-1}(u/(1+lambda))            for u <  (lambda+1)/2,
//   (1-lambda) Phi^{-1}((u-lambda)/(1-lambda))   for u >= (lambda+1)/2,
// continuous and equal to 0 at the breakpoint.
inline double quantile(const QuantileFamily& family, double u) {
    family.validate();
    if (!(u > 0.0 && u < 1.0))
        throw domain_error("quantile: argument must lie strictly inside (0, 1)");
    switch (family.kind) {
        case QuantileKind::std_normal:
            return norm_quantile(u);
        case QuantileKind::two_piece_skew_normal: {
            double l = family.lambda;
            if (u < 0.5 * (l + 1.0)) return (1.0 + l) * norm_quantile(u / (1.0 + l));
            return (1.0 - l) * norm_quantile((u - l) / (1.0 - l));
        }
        case QuantileKind::identity:
            throw unsupported_error("quantile: identity family has no quantile map");
    }
    throw config_error("quantile: unknown family");
}

struct ControlFunction {
    Eigen::VectorXd ranks;
    Eigen::VectorXd values;
    QuantileFamily family;
};

// Control function values from first-stage residuals: quantile transform of
// the relative ranks, or the residuals unchanged for the identity family.
inline ControlFunction build_control(const Eigen::VectorXd& residuals,
                                     const QuantileFamily& family) {
    family.validate();
    ControlFunction cf;
    cf.family = family;
    cf.ranks = empirical_ranks(residuals);
    if (family.kind == QuantileKind::identity) {
        cf.values = residuals;
        return cf;
    }
    cf.values.resize(residuals.size());
    for (Eigen::Index i = 0; i < residuals.size(); ++i)
        cf.values[i] = quantile(family, cf.ranks[i]);
    return cf;
}

} // namespace rankcf
