#pragma once

#include <Eigen/Dense>

#include "rankcf/errors.hpp"

namespace rankcf {

// Estimation sample. z holds the exogenous regressors with the intercept as
// first column; d holds the endogenous regressors, one column each.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd z;
    Eigen::MatrixXd d;

    Eigen::Index n_obs() const { return y.size(); }
    Eigen::Index n_exog() const { return z.cols(); }
    Eigen::Index n_endog() const { return d.cols(); }

    // Regressor matrix [z, d] in estimation order.
    Eigen::MatrixXd x() const {
        Eigen::MatrixXd out(n_obs(), n_exog() + n_endog());
        out << z, d;
        return out;
    }

    // Structural checks applied to external data. Requires a binary outcome,
    // finite entries, a leading intercept column and at least two more rows
    // than non-intercept exogenous regressors.
    void validate() const {
        Eigen::Index n = y.size();
        if (n == 0) throw schema_error("dataset: no observations");
        if (z.rows() != n || d.rows() != n)
            throw schema_error("dataset: column lengths disagree");
        if (z.cols() < 1) throw schema_error("dataset: missing intercept column");
        if (d.cols() < 1) throw schema_error("dataset: no endogenous regressor");
        if (!y.allFinite() || !z.allFinite() || !d.allFinite())
            throw schema_error("dataset: non-finite entries");
        for (Eigen::Index i = 0; i < n; ++i)
            if (y[i] != 0.0 && y[i] != 1.0)
                throw schema_error("dataset: outcome must be 0 or 1");
        if ((z.col(0).array() != 1.0).any())
            throw schema_error("dataset: first exogenous column must be constant 1");
        if (n < z.cols() - 1 + 2)
            throw schema_error("dataset: too few rows for the exogenous design");
    }
};

} // namespace rankcf
