// Command line driver: fit, mc, asf, profile-lambda.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankcf/rankcf.hpp"

namespace {

using nlohmann::ordered_json;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

rankcf::QuantileFamily control_from_flag(const std::string& flag) {
    if (flag == "normal") return rankcf::QuantileFamily::std_normal();
    if (flag == "identity") return rankcf::QuantileFamily::identity();
    if (flag.rfind("skew:", 0) == 0) {
        double l = std::stod(flag.substr(5));
        return rankcf::QuantileFamily::skew(l);
    }
    throw rankcf::config_error("fit: unknown control '" + flag + "'");
}

void write_output(const std::string& path, const std::string& body) {
    if (path.empty()) {
        std::cout << body << '\n';
        return;
    }
    std::ofstream os(path);
    if (!os) throw rankcf::config_error("cannot open output file '" + path + "'");
    os << body;
    if (body.empty() || body.back() != '\n') os << '\n';
}

struct FitFlags {
    std::string data_path;
    std::string outcome = "y";
    std::string exogenous;
    std::string endogenous;
    std::string link = "probit";
    std::string first_stage = "local-linear";
    std::string control = "normal";
    int boot = 0;
    double first_stage_bandwidth = 0.0;
    double link_bandwidth = 0.0;
    std::string trim;
};

struct Loaded {
    rankcf::ParsedData parsed;
    rankcf::CsvSchema schema;
};

Loaded load_csv(const std::string& path, const std::string& outcome,
                const std::string& exogenous, const std::string& endogenous) {
    rankcf::CsvSchema schema;
    schema.outcome = outcome;
    schema.exogenous = split_list(exogenous);
    schema.endogenous = split_list(endogenous);
    std::ifstream in(path);
    if (!in) throw rankcf::schema_error("cannot read data file '" + path + "'");
    return {rankcf::parse_csv(in, schema), schema};
}

rankcf::SemiparamSpec semiparam_from_flags(const FitFlags& ff) {
    rankcf::SemiparamSpec sp;
    sp.bandwidth = ff.link_bandwidth;
    if (!ff.trim.empty()) {
        auto parts = split_list(ff.trim);
        if (parts.size() != 2)
            throw rankcf::config_error("fit: --trim expects lo,hi");
        sp.trim = {std::stod(parts[0]), std::stod(parts[1])};
    }
    sp.validate();
    return sp;
}

// Shared by fit and its bootstrap resamples.
rankcf::FitResult fit_once(const rankcf::Dataset& data, const FitFlags& ff,
                           const rankcf::QuantileFamily& family,
                           const rankcf::SemiparamSpec& sp) {
    Eigen::Index m = data.n_endog();
    Eigen::MatrixXd eta(data.n_obs(), m);
    for (Eigen::Index j = 0; j < m; ++j) {
        rankcf::FirstStageFit fs =
            ff.first_stage == "ols"
                ? rankcf::fit_ols(data.z, data.d.col(j))
                : rankcf::fit_local_linear(data.z, data.d.col(j),
                                           ff.first_stage_bandwidth);
        eta.col(j) = rankcf::build_control(fs.residuals, family).values;
    }
    if (ff.link == "np") {
        rankcf::FitResult par;
        Eigen::VectorXd start;
        try {
            par = rankcf::fit(data, eta);
            Eigen::VectorXd flat = par.theta.flat();
            if (par.converged && std::abs(flat[1]) > 1e-8) start = flat / flat[1];
        } catch (const rankcf::numerical_error&) {
        }
        return rankcf::fit_semiparam(data, eta, sp, start);
    }
    rankcf::LinkFamily link = ff.link == "logit" ? rankcf::LinkFamily::logit()
                                                 : rankcf::LinkFamily::probit();
    return rankcf::fit(data, eta, link);
}

int cmd_fit(const FitFlags& ff, std::uint64_t seed, const std::string& out_path) {
    if (ff.link != "probit" && ff.link != "logit" && ff.link != "np")
        throw rankcf::config_error("fit: --link must be probit, logit or np");
    if (ff.first_stage != "ols" && ff.first_stage != "local-linear")
        throw rankcf::config_error("fit: --first-stage must be ols or local-linear");
    Loaded loaded = load_csv(ff.data_path, ff.outcome, ff.exogenous, ff.endogenous);
    const rankcf::Dataset& data = loaded.parsed.data;
    rankcf::QuantileFamily family = control_from_flag(ff.control);
    rankcf::SemiparamSpec sp = semiparam_from_flags(ff);

    rankcf::FitReport rep;
    rep.fit = fit_once(data, ff, family, sp);
    rep.exog_names = loaded.parsed.exog_names;
    rep.endog_names = loaded.parsed.endog_names;

    if (ff.boot > 0) {
        rankcf::PointEstimator est = [&](const rankcf::Dataset& d) {
            rankcf::FitResult b = fit_once(d, ff, family, sp);
            if (!b.converged)
                throw rankcf::numerical_error("bootstrap fit did not converge");
            return b.theta.flat();
        };
        rep.cov = rankcf::pairs_bootstrap(data, est, ff.boot, seed);
        rep.has_cov = true;
    } else if (ff.link != "np") {
        rep.cov = rankcf::fisher_covariance(rep.fit, data.n_obs());
        rep.cov.b_used = 0;
        rep.has_cov = true;
        rep.warnings.push_back("standard errors from the information matrix; "
                               "pass --boot for bootstrap inference");
    }

    rep.settings["command"] = "fit";
    rep.settings["data"] = ff.data_path;
    rep.settings["link"] = ff.link;
    rep.settings["first_stage"] = ff.first_stage;
    rep.settings["control"] = ff.control;
    rep.settings["boot"] = ff.boot;
    rep.settings["seed"] = seed;
    rep.settings["n_obs"] = data.n_obs();

    write_output(out_path, rankcf::emit_fit_report(rep).dump(2));
    return 0;
}

int cmd_mc(const std::string& config_path, const std::string& out_path,
           int threads) {
    std::ifstream in(config_path);
    if (!in)
        throw rankcf::schema_error("cannot read config file '" + config_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw rankcf::parse_error(std::string("config: ") + ex.what());
    }
    rankcf::ExperimentConfig cfg = rankcf::experiment_from_json(j);
    rankcf::MetricsTable table = rankcf::run_experiment(cfg, threads);
    bool csv = out_path.size() > 4 &&
               out_path.compare(out_path.size() - 4, 4, ".csv") == 0;
    if (csv) {
        std::ostringstream os;
        rankcf::metrics_to_csv(table, os);
        write_output(out_path, os.str());
    } else {
        write_output(out_path, rankcf::metrics_to_json(table).dump(2));
    }
    return 0;
}

int cmd_asf(const std::string& fit_path, const std::string& x_list,
            const std::string& out_path) {
    std::ifstream in(fit_path);
    if (!in) throw rankcf::schema_error("cannot read fit file '" + fit_path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw rankcf::parse_error(std::string("fit report: ") + ex.what());
    }
    std::string link = j.value("settings", nlohmann::json::object())
                           .value("link", "probit");
    if (link != "probit")
        throw rankcf::unsupported_error(
            "asf: closed-form average structural function requires a probit fit");
    rankcf::Theta theta;
    try {
        auto get_vec = [&](const char* name) {
            std::vector<double> v =
                j.at("theta").at(name).get<std::vector<double>>();
            return Eigen::Map<Eigen::VectorXd>(v.data(),
                                               static_cast<Eigen::Index>(v.size()))
                .eval();
        };
        theta.alpha = get_vec("alpha");
        theta.beta = get_vec("beta");
        theta.rho = get_vec("rho");
    } catch (const nlohmann::json::exception& ex) {
        throw rankcf::parse_error(std::string("fit report: ") + ex.what());
    }

    auto parts = split_list(x_list);
    Eigen::VectorXd x(static_cast<Eigen::Index>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i) x[static_cast<Eigen::Index>(i)] = std::stod(parts[i]);

    ordered_json out;
    out["x"] = std::vector<double>(x.data(), x.data() + x.size());
    if (!j.at("covariance").is_null()) {
        rankcf::CovarianceEstimate cov;
        auto sig = j.at("covariance").at("sigma").get<std::vector<std::vector<double>>>();
        Eigen::Index p = static_cast<Eigen::Index>(sig.size());
        cov.sigma.resize(p, p);
        for (Eigen::Index a = 0; a < p; ++a)
            for (Eigen::Index b = 0; b < p; ++b)
                cov.sigma(a, b) = sig[static_cast<size_t>(a)][static_cast<size_t>(b)];
        cov.n_obs = j.at("covariance").at("n_obs").get<Eigen::Index>();
        rankcf::AsfEstimate est = rankcf::delta_method_asf(theta, cov, x);
        out["asf"] = est.value;
        out["se"] = est.se;
    } else {
        out["asf"] = rankcf::asf_parametric(theta, x);
        out["se"] = nullptr;
    }
    write_output(out_path, out.dump(2));
    return 0;
}

int cmd_profile_lambda(const FitFlags& ff, const std::string& grid_list,
                       const std::string& out_path) {
    Loaded loaded = load_csv(ff.data_path, ff.outcome, ff.exogenous, ff.endogenous);
    const rankcf::Dataset& data = loaded.parsed.data;
    if (data.n_endog() != 1)
        throw rankcf::config_error(
            "profile-lambda: exactly one endogenous regressor supported");
    auto parts = split_list(grid_list);
    if (parts.empty()) throw rankcf::config_error("profile-lambda: empty grid");
    std::vector<double> grid;
    for (const auto& p : parts) grid.push_back(std::stod(p));

    rankcf::FirstStageFit fs =
        ff.first_stage == "ols"
            ? rankcf::fit_ols(data.z, data.d.col(0))
            : rankcf::fit_local_linear(data.z, data.d.col(0),
                                       ff.first_stage_bandwidth);
    rankcf::LinkFamily link = ff.link == "logit" ? rankcf::LinkFamily::logit()
                                                 : rankcf::LinkFamily::probit();
    auto profile = rankcf::profile_loglik_lambda(data, fs.residuals, grid, link);
    ordered_json out = ordered_json::array();
    for (auto& [lambda, ll] : profile) {
        ordered_json row;
        row["lambda"] = lambda;
        row["loglik"] = ll;
        out.push_back(row);
    }
    write_output(out_path, out.dump(2));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rank-based control function estimation for binary outcomes"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_path;
    // The shared flags are registered on the parent and on every subcommand,
    // bound to the same variables, so they parse on either side of the
    // subcommand name.
    auto add_shared_flags = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Base seed for resampling");
        sub->add_option("--threads", threads, "Worker threads for the mc harness");
        sub->add_option("--out", out_path, "Output file (default stdout)");
    };
    add_shared_flags(&app);

    FitFlags ff;
    auto add_data_flags = [&](CLI::App* sub) {
        add_shared_flags(sub);
        sub->add_option("--data", ff.data_path, "CSV input")->required();
        sub->add_option("--outcome", ff.outcome, "Outcome column");
        sub->add_option("--exogenous", ff.exogenous, "Comma list of exogenous columns")
            ->required();
        sub->add_option("--endogenous", ff.endogenous,
                        "Comma list of endogenous columns")
            ->required();
        sub->add_option("--first-stage", ff.first_stage, "ols or local-linear");
        sub->add_option("--first-stage-bandwidth", ff.first_stage_bandwidth,
                        "Gaussian kernel bandwidth, 0 for rule of thumb");
    };

    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one model to a CSV sample");
    add_data_flags(fit_cmd);
    fit_cmd->add_option("--link", ff.link, "probit, logit or np");
    fit_cmd->add_option("--control", ff.control, "normal, skew:<lambda> or identity");
    fit_cmd->add_option("--boot", ff.boot, "Pairs bootstrap replications");
    fit_cmd->add_option("--trim", ff.trim, "Trim quantiles lo,hi for --link np");
    fit_cmd->add_option("--link-bandwidth", ff.link_bandwidth,
                        "Link bandwidth for --link np, 0 for Silverman");

    std::string config_path;
    CLI::App* mc_cmd = app.add_subcommand("mc", "Run a simulation study");
    add_shared_flags(mc_cmd);
    mc_cmd->add_option("--config", config_path, "Experiment JSON")->required();

    std::string fit_path, x_list;
    CLI::App* asf_cmd =
        app.add_subcommand("asf", "Average structural function from a saved fit");
    add_shared_flags(asf_cmd);
    asf_cmd->add_option("--fit", fit_path, "Fit report JSON")->required();
    asf_cmd->add_option("--x", x_list, "Covariate values, exogenous then endogenous")
        ->required();

    std::string grid_list;
    CLI::App* prof_cmd = app.add_subcommand(
        "profile-lambda", "Profile log-likelihood over the skewness grid");
    add_data_flags(prof_cmd);
    prof_cmd->add_option("--link", ff.link, "probit or logit");
    prof_cmd->add_option("--grid", grid_list, "Comma list of lambda values")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(ff, seed, out_path);
        if (mc_cmd->parsed()) return cmd_mc(config_path, out_path, threads);
        if (asf_cmd->parsed()) return cmd_asf(fit_path, x_list, out_path);
        if (prof_cmd->parsed())
            return cmd_profile_lambda(ff, grid_list, out_path);
    } catch (const rankcf::schema_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const rankcf::config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const rankcf::numerical_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 4;
}
