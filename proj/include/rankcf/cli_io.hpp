#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankcf/dataset.hpp"
#include "rankcf/errors.hpp"
#include "rankcf/inference.hpp"
#include "rankcf/mc_harness.hpp"

namespace rankcf {

struct CsvSchema {
    std::string outcome;
    std::vector<std::string> exogenous;  // non-intercept unless a constant column is declared
    std::vector<std::string> endogenous;
};

struct ParsedData {
    Dataset data;
    std::vector<std::string> exog_names;  // aligned with data.z columns
    std::vector<std::string> endog_names; // aligned with data.d columns
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

inline double parse_number(const std::string& s, Eigen::Index row,
                           const std::string& col) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e)
        throw parse_error("csv: cannot parse value '" + s + "' in column '" + col +
                          "' at row " + std::to_string(row));
    return v;
}

} // namespace detail

// Reads a comma-separated file with a header row. Values are locale
// independent numerics; the outcome also accepts true/false. Rows are counted
// from 1 over the data lines. An intercept column of ones is prepended and
// named "const" unless one of the declared exogenous columns is constant 1,
// which is then moved to the front instead.
inline ParsedData parse_csv(std::istream& in, const CsvSchema& schema) {
    if (schema.outcome.empty()) throw config_error("csv: no outcome column named");
    if (schema.endogenous.empty())
        throw config_error("csv: no endogenous column named");

    std::string line;
    if (!std::getline(in, line)) throw schema_error("csv: empty input");
    std::vector<std::string> header = detail::split_csv_line(line);

    auto col_of = [&](const std::string& name) {
        for (size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<Eigen::Index>(j);
        throw schema_error("csv: column '" + name + "' not found in header");
    };

    Eigen::Index y_col = col_of(schema.outcome);
    std::vector<Eigen::Index> z_cols, d_cols;
    for (const auto& nm : schema.exogenous) z_cols.push_back(col_of(nm));
    for (const auto& nm : schema.endogenous) d_cols.push_back(col_of(nm));

    std::vector<double> ys;
    std::vector<std::vector<double>> zs(z_cols.size()), ds(d_cols.size());
    std::vector<Eigen::Index> missing_rows;
    Eigen::Index row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw parse_error("csv: row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " fields, expected " +
                              std::to_string(header.size()));
        bool missing = false;
        for (Eigen::Index c : z_cols)
            if (detail::is_missing_token(cells[static_cast<size_t>(c)])) missing = true;
        for (Eigen::Index c : d_cols)
            if (detail::is_missing_token(cells[static_cast<size_t>(c)])) missing = true;
        if (detail::is_missing_token(cells[static_cast<size_t>(y_col)])) missing = true;
        if (missing) {
            missing_rows.push_back(row);
            continue;
        }
        const std::string& ytok = cells[static_cast<size_t>(y_col)];
        double yv;
        if (ytok == "true" || ytok == "TRUE" || ytok == "True") {
            yv = 1.0;
        } else if (ytok == "false" || ytok == "FALSE" || ytok == "False") {
            yv = 0.0;
        } else {
            yv = detail::parse_number(ytok, row, schema.outcome);
            if (yv != 0.0 && yv != 1.0)
                throw parse_error("csv: outcome value '" + ytok + "' at row " +
                                  std::to_string(row) + " is not binary");
        }
        ys.push_back(yv);
        for (size_t j = 0; j < z_cols.size(); ++j)
            zs[j].push_back(detail::parse_number(
                cells[static_cast<size_t>(z_cols[j])], row, schema.exogenous[j]));
        for (size_t j = 0; j < d_cols.size(); ++j)
            ds[j].push_back(detail::parse_number(
                cells[static_cast<size_t>(d_cols[j])], row, schema.endogenous[j]));
    }
    if (!missing_rows.empty()) {
        std::string msg = "csv: missing values in rows";
        for (Eigen::Index r : missing_rows) msg += " " + std::to_string(r);
        throw parse_error(msg);
    }
    Eigen::Index n = static_cast<Eigen::Index>(ys.size());
    if (n == 0) throw schema_error("csv: no data rows");

    // Locate a declared constant-1 column to serve as the intercept.
    Eigen::Index const_col = -1;
    for (size_t j = 0; j < zs.size(); ++j) {
        bool all_one = true;
        for (double v : zs[j])
            if (v != 1.0) { all_one = false; break; }
        if (all_one) { const_col = static_cast<Eigen::Index>(j); break; }
    }

    ParsedData out;
    out.data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    Eigen::Index kz = static_cast<Eigen::Index>(zs.size());
    Eigen::Index k = const_col >= 0 ? kz : kz + 1;
    out.data.z.resize(n, k);
    out.data.z.col(0).setOnes();
    out.exog_names.push_back(const_col >= 0
                                 ? schema.exogenous[static_cast<size_t>(const_col)]
                                 : std::string("const"));
    Eigen::Index pos = 1;
    for (Eigen::Index j = 0; j < kz; ++j) {
        if (j == const_col) continue;
        out.data.z.col(pos) = Eigen::Map<Eigen::VectorXd>(
            zs[static_cast<size_t>(j)].data(), n);
        out.exog_names.push_back(schema.exogenous[static_cast<size_t>(j)]);
        ++pos;
    }
    out.data.d.resize(n, static_cast<Eigen::Index>(ds.size()));
    for (size_t j = 0; j < ds.size(); ++j) {
        out.data.d.col(static_cast<Eigen::Index>(j)) =
            Eigen::Map<Eigen::VectorXd>(ds[j].data(), n);
        out.endog_names.push_back(schema.endogenous[j]);
    }
    out.data.validate();
    return out;
}

// Writes the sample back out with 17 significant digits so a parse of the
// output reproduces the numbers bit for bit.
inline void emit_dataset_csv(const ParsedData& pd, std::ostream& os,
                             const std::string& outcome_name = "y") {
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << outcome_name;
    for (const auto& nm : pd.exog_names) os << ',' << nm;
    for (const auto& nm : pd.endog_names) os << ',' << nm;
    os << '\n';
    for (Eigen::Index i = 0; i < pd.data.n_obs(); ++i) {
        os << fmt(pd.data.y[i]);
        for (Eigen::Index j = 0; j < pd.data.n_exog(); ++j)
            os << ',' << fmt(pd.data.z(i, j));
        for (Eigen::Index j = 0; j < pd.data.n_endog(); ++j)
            os << ',' << fmt(pd.data.d(i, j));
        os << '\n';
    }
}

// Fit report assembled by the command line driver.
struct FitReport {
    FitResult fit;
    std::vector<std::string> exog_names;
    std::vector<std::string> endog_names;
    bool has_cov = false;
    CovarianceEstimate cov;
    nlohmann::ordered_json settings;
    std::vector<std::string> warnings;
};

// Stable-order JSON report. Coefficients carry name/estimate/se/t with nulls
// where no covariance is available; rho entries are named rho_1, rho_2, ...
inline nlohmann::ordered_json emit_fit_report(const FitReport& rep) {
    nlohmann::ordered_json j;
    j["settings"] = rep.settings;
    j["converged"] = rep.fit.converged;
    j["iterations"] = rep.fit.iterations;
    j["loglik"] = rep.fit.loglik;
    j["score_norm"] = rep.fit.score_norm;
    j["design_condition"] = rep.fit.design_condition;

    std::vector<std::string> names;
    for (const auto& nm : rep.exog_names) names.push_back(nm);
    for (const auto& nm : rep.endog_names) names.push_back(nm);
    for (Eigen::Index l = 0; l < rep.fit.theta.rho.size(); ++l)
        names.push_back("rho_" + std::to_string(l + 1));

    Eigen::VectorXd flat = rep.fit.theta.flat();
    if (static_cast<Eigen::Index>(names.size()) != flat.size())
        throw shape_error("fit report: name count does not match coefficients");

    nlohmann::ordered_json coeffs = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        nlohmann::ordered_json c;
        c["name"] = names[static_cast<size_t>(i)];
        c["estimate"] = flat[i];
        if (rep.has_cov) {
            double se = std::sqrt(std::max(rep.cov.sigma(i, i), 0.0) /
                                  static_cast<double>(rep.cov.n_obs));
            c["se"] = se;
            if (se > 0.0)
                c["t"] = flat[i] / se;
            else
                c["t"] = nullptr;
        } else {
            c["se"] = nullptr;
            c["t"] = nullptr;
        }
        coeffs.push_back(c);
    }
    j["coefficients"] = coeffs;

    nlohmann::ordered_json theta;
    theta["alpha"] = std::vector<double>(
        rep.fit.theta.alpha.data(),
        rep.fit.theta.alpha.data() + rep.fit.theta.alpha.size());
    theta["beta"] = std::vector<double>(
        rep.fit.theta.beta.data(),
        rep.fit.theta.beta.data() + rep.fit.theta.beta.size());
    theta["rho"] = std::vector<double>(
        rep.fit.theta.rho.data(),
        rep.fit.theta.rho.data() + rep.fit.theta.rho.size());
    j["theta"] = theta;

    std::vector<std::string> warnings = rep.warnings;
    if (rep.has_cov) {
        nlohmann::ordered_json cv;
        cv["n_obs"] = rep.cov.n_obs;
        cv["b_used"] = rep.cov.b_used;
        cv["b_failed"] = rep.cov.b_failed;
        std::vector<std::vector<double>> sig;
        for (Eigen::Index a = 0; a < rep.cov.sigma.rows(); ++a)
            sig.emplace_back(rep.cov.sigma.row(a).begin(),
                             rep.cov.sigma.row(a).end());
        cv["sigma"] = sig;
        j["covariance"] = cv;
    } else {
        j["covariance"] = nullptr;
        warnings.push_back("no covariance estimate; standard errors unavailable");
    }
    j["warnings"] = warnings;
    return j;
}

// Experiment configuration <-> JSON.
inline nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["dgp"]["alpha0"] = cfg.dgp.alpha0;
    j["dgp"]["alpha1"] = cfg.dgp.alpha1;
    j["dgp"]["beta"] = cfg.dgp.beta;
    j["dgp"]["rho"] = cfg.dgp.rho;
    j["dgp"]["pi"] = cfg.dgp.pi_shape == PiShape::linear ? "linear" : "quadratic";
    j["dgp"]["v_dist"] = cfg.dgp.v_dist == VDist::std_normal ? "std_normal"
                                                             : "centered_gamma22";
    j["dgp"]["n"] = cfg.dgp.n;
    j["replications"] = cfg.replications;
    std::vector<std::string> est;
    for (auto k : cfg.estimators) est.push_back(to_string(k));
    j["estimators"] = est;
    j["boot_parametric"] = cfg.boot_parametric;
    j["boot_semiparametric"] = cfg.boot_semiparametric;
    j["base_seed"] = cfg.base_seed;
    j["first_stage_bandwidth"] = cfg.pipeline.first_stage_bandwidth;
    j["link_bandwidth"] = cfg.pipeline.semiparam.bandwidth;
    j["trim"] = {cfg.pipeline.semiparam.trim.first,
                 cfg.pipeline.semiparam.trim.second};
    return j;
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        const auto& d = j.at("dgp");
        cfg.dgp.alpha0 = d.value("alpha0", 0.5);
        cfg.dgp.alpha1 = d.value("alpha1", 1.0);
        cfg.dgp.beta = d.value("beta", 1.0);
        cfg.dgp.rho = d.value("rho", 0.0);
        std::string pi = d.value("pi", "quadratic");
        if (pi == "linear") cfg.dgp.pi_shape = PiShape::linear;
        else if (pi == "quadratic") cfg.dgp.pi_shape = PiShape::quadratic;
        else throw config_error("config: pi must be linear or quadratic");
        std::string vd = d.value("v_dist", "std_normal");
        if (vd == "std_normal") cfg.dgp.v_dist = VDist::std_normal;
        else if (vd == "centered_gamma22") cfg.dgp.v_dist = VDist::centered_gamma22;
        else throw config_error("config: v_dist must be std_normal or centered_gamma22");
        cfg.dgp.n = d.value("n", 500);
        cfg.replications = j.value("replications", 1000);
        for (const auto& s : j.at("estimators"))
            cfg.estimators.push_back(estimator_from_string(s.get<std::string>()));
        cfg.boot_parametric = j.value("boot_parametric", 499);
        cfg.boot_semiparametric = j.value("boot_semiparametric", 99);
        cfg.base_seed = j.value("base_seed", std::uint64_t{1});
        cfg.pipeline.first_stage_bandwidth = j.value("first_stage_bandwidth", 0.0);
        cfg.pipeline.semiparam.bandwidth = j.value("link_bandwidth", 0.0);
        if (j.contains("trim")) {
            auto t = j.at("trim");
            if (!t.is_array() || t.size() != 2)
                throw config_error("config: trim must be [lo, hi]");
            cfg.pipeline.semiparam.trim = {t[0].get<double>(), t[1].get<double>()};
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("config: ") + ex.what());
    }
    cfg.validate();
    cfg.pipeline.semiparam.validate();
    return cfg;
}

namespace detail {

inline std::string metric_num(double v) {
    if (std::isnan(v)) return "na";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

inline void metrics_to_csv(const MetricsTable& table, std::ostream& os) {
    os << "estimator,parameter,truth,mean,std,rmse,size,n_success,n_failed,n_tests\n";
    for (const auto& r : table.rows) {
        os << r.estimator << ',' << r.parameter << ',' << detail::metric_num(r.truth)
           << ',' << detail::metric_num(r.mean) << ',' << detail::metric_num(r.std_dev)
           << ',' << detail::metric_num(r.rmse) << ',' << detail::metric_num(r.size)
           << ',' << r.n_success << ',' << r.n_failed << ',' << r.n_tests << '\n';
    }
}

inline nlohmann::ordered_json metrics_to_json(const MetricsTable& table) {
    nlohmann::ordered_json j;
    j["replications"] = table.replications;
    j["asf_truth"] = table.asf_truth;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : table.rows) {
        nlohmann::ordered_json row;
        row["estimator"] = r.estimator;
        row["parameter"] = r.parameter;
        row["truth"] = r.truth;
        auto put = [&row](const char* key, double v) {
            if (std::isnan(v)) row[key] = nullptr; else row[key] = v;
        };
        put("mean", r.mean);
        put("std", r.std_dev);
        put("rmse", r.rmse);
        put("size", r.size);
        row["n_success"] = r.n_success;
        row["n_failed"] = r.n_failed;
        row["n_tests"] = r.n_tests;
        rows.push_back(row);
    }
    j["rows"] = rows;
    nlohmann::ordered_json diags = nlohmann::ordered_json::array();
    for (const auto& d : table.diagnostics) {
        nlohmann::ordered_json dj;
        dj["estimator"] = d.estimator;
        dj["failures"] = d.failures;
        dj["unreliable_bootstraps"] = d.unreliable_bootstraps;
        dj["max_design_condition"] = d.max_design_condition;
        diags.push_back(dj);
    }
    j["diagnostics"] = diags;
    return j;
}

} // namespace rankcf
