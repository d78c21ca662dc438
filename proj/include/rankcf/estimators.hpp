#pragma once

#include <string>

#include <Eigen/Dense>

#include "rankcf/control_function.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/first_stage.hpp"
#include "rankcf/parametric_liml.hpp"
#include "rankcf/semiparametric_liml.hpp"

namespace rankcf {

// Estimator taxonomy of the simulation study.
//   ml       plain binary response fit, endogeneity ignored
//   cf0      infeasible control m(V) from the simulator
//   mw1/mw2  rank-based normal-score control on local-linear / ols residuals
//   dong     local-linear residuals used directly as the control
//   np_*     same controls, semiparametric link
enum class EstimatorKind { ml, cf0, mw1, mw2, dong, np_mw1, np_mw2, np_dong };

inline bool is_semiparametric(EstimatorKind k) {
    return k == EstimatorKind::np_mw1 || k == EstimatorKind::np_mw2 ||
           k == EstimatorKind::np_dong;
}

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::ml: return "ml";
        case EstimatorKind::cf0: return "cf0";
        case EstimatorKind::mw1: return "mw1";
        case EstimatorKind::mw2: return "mw2";
        case EstimatorKind::dong: return "dong";
        case EstimatorKind::np_mw1: return "np_mw1";
        case EstimatorKind::np_mw2: return "np_mw2";
        case EstimatorKind::np_dong: return "np_dong";
    }
    throw config_error("estimator: unknown kind");
}

inline EstimatorKind estimator_from_string(const std::string& s) {
    if (s == "ml") return EstimatorKind::ml;
    if (s == "cf0") return EstimatorKind::cf0;
    if (s == "mw1") return EstimatorKind::mw1;
    if (s == "mw2") return EstimatorKind::mw2;
    if (s == "dong") return EstimatorKind::dong;
    if (s == "np_mw1") return EstimatorKind::np_mw1;
    if (s == "np_mw2") return EstimatorKind::np_mw2;
    if (s == "np_dong") return EstimatorKind::np_dong;
    throw config_error("estimator: unknown kind '" + s + "'");
}

struct PipelineOptions {
    double first_stage_bandwidth = 0.0;
    FitOptions fit;
    SemiparamSpec semiparam;
};

// Control columns for an estimator kind, one per endogenous regressor.
// true_m_v supplies the infeasible control for cf0 and must come from the
// simulator; feasible kinds ignore it.
inline Eigen::MatrixXd build_controls(const Dataset& data, EstimatorKind kind,
                                      const PipelineOptions& opts = {},
                                      const Eigen::MatrixXd* true_m_v = nullptr) {
    Eigen::Index n = data.n_obs();
    Eigen::Index m = data.n_endog();
    switch (kind) {
        case EstimatorKind::ml:
            return Eigen::MatrixXd(n, 0);
        case EstimatorKind::cf0:
            if (true_m_v == nullptr || true_m_v->rows() != n ||
                true_m_v->cols() != m)
                throw config_error("cf0: true control values required");
            return *true_m_v;
        default:
            break;
    }
    bool use_ols = kind == EstimatorKind::mw2 || kind == EstimatorKind::np_mw2;
    bool identity = kind == EstimatorKind::dong || kind == EstimatorKind::np_dong;
    QuantileFamily family =
        identity ? QuantileFamily::identity() : QuantileFamily::std_normal();
    Eigen::MatrixXd eta(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        FirstStageFit fs =
            use_ols ? fit_ols(data.z, data.d.col(j))
                    : fit_local_linear(data.z, data.d.col(j),
                                       opts.first_stage_bandwidth);
        eta.col(j) = build_control(fs.residuals, family).values;
    }
    return eta;
}

struct PipelineRun {
    Eigen::MatrixXd eta;
    FitResult fit;
};

// Full pipeline for one estimator: first stage, control construction, then the
// parametric or semiparametric fit. Semiparametric kinds start from the
// rescaled parametric fit when available and from zero otherwise.
inline PipelineRun run_pipeline(const Dataset& data, EstimatorKind kind,
                                const PipelineOptions& opts = {},
                                const Eigen::MatrixXd* true_m_v = nullptr) {
    PipelineRun out;
    out.eta = build_controls(data, kind, opts, true_m_v);
    if (!is_semiparametric(kind)) {
        out.fit = fit(data, out.eta, LinkFamily::probit(), opts.fit);
        return out;
    }
    Eigen::VectorXd start;
    try {
        FitResult par = fit(data, out.eta, LinkFamily::probit(), opts.fit);
        Eigen::Index pin = opts.semiparam.normalization_index < 0
                               ? 1
                               : opts.semiparam.normalization_index;
        Eigen::VectorXd flat = par.theta.flat();
        if (par.converged && std::abs(flat[pin]) > 1e-8) start = flat / flat[pin];
    } catch (const numerical_error&) {
    }
    out.fit = fit_semiparam(data, out.eta, opts.semiparam, start);
    return out;
}

inline FitResult run_estimator(const Dataset& data, EstimatorKind kind,
                               const PipelineOptions& opts = {},
                               const Eigen::MatrixXd* true_m_v = nullptr) {
    return run_pipeline(data, kind, opts, true_m_v).fit;
}

} // namespace rankcf
