#pragma once

#include <stdexcept>
#include <string>

namespace rankcf {

// Error taxonomy. CLI exit codes: schema/parse -> 2, numerical -> 3, config/usage -> 4.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data: bad CSV structure, missing columns, unparseable values.
struct schema_error : error {
    explicit schema_error(const std::string& msg) : error(msg) {}
};

struct parse_error : schema_error {
    explicit parse_error(const std::string& msg) : schema_error(msg) {}
};

// Invalid configuration or arguments supplied by the caller.
struct config_error : error {
    explicit config_error(const std::string& msg) : error(msg) {}
};

struct domain_error : config_error {
    explicit domain_error(const std::string& msg) : config_error(msg) {}
};

struct shape_error : config_error {
    explicit shape_error(const std::string& msg) : config_error(msg) {}
};

struct unsupported_error : config_error {
    explicit unsupported_error(const std::string& msg) : config_error(msg) {}
};

// Numerical failures during estimation.
struct numerical_error : error {
    explicit numerical_error(const std::string& msg) : error(msg) {}
};

struct singular_design_error : numerical_error {
    double condition;
    singular_design_error(const std::string& msg, double cond)
        : numerical_error(msg), condition(cond) {}
};

struct collinearity_error : singular_design_error {
    collinearity_error(const std::string& msg, double cond)
        : singular_design_error(msg, cond) {}
};

struct bandwidth_error : numerical_error {
    explicit bandwidth_error(const std::string& msg) : numerical_error(msg) {}
};

struct degenerate_trim_error : numerical_error {
    explicit degenerate_trim_error(const std::string& msg) : numerical_error(msg) {}
};

struct unreliable_bootstrap_error : numerical_error {
    int b_failed;
    int b_total;
    unreliable_bootstrap_error(const std::string& msg, int failed, int total)
        : numerical_error(msg), b_failed(failed), b_total(total) {}
};

} // namespace rankcf
