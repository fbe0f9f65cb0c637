#pragma once

#include <map>
#include <regex>
#include <string>
#include <string_view>

#include "gradpred/errors.hpp"
#include "gradpred/numfmt.hpp"
#include "gradpred/pipeline.hpp"

namespace gradpred::sql {

/// Extension point for engines whose spelling differs from ANSI. Only the
/// exponential function is parameterised today.
struct Dialect {
    std::string exp_function = "EXP";
};

struct ViewSpec {
    std::string view_name = "graduation_predictions";
    std::string source_table = "feature_rows";
    std::string key_column = "study_right_id";
    std::map<std::string, std::string> column_map;  // term -> column
    double threshold = kDefaultThreshold;
    std::string output_column;  // single-model views; defaults per model

    /// Maps every covariate to the column of the same name.
    static ViewSpec with_identity_mapping() {
        ViewSpec spec;
        for (std::size_t i = 0; i < kCovariateCount; ++i) {
            std::string name(kColumnNames[i]);
            spec.column_map[name] = name;
        }
        return spec;
    }
};

inline bool is_identifier(std::string_view s) {
    static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
    return std::regex_match(s.begin(), s.end(), re);
}

namespace detail {

inline void require_identifier(const std::string& s, std::string_view what) {
    if (!is_identifier(s)) throw DataError("invalid SQL identifier for " + std::string(what) + ": '" + s + "'");
}

inline void validate(const ViewSpec& spec) {
    require_identifier(spec.view_name, "view name");
    require_identifier(spec.source_table, "source table");
    require_identifier(spec.key_column, "key column");
    for (const auto& [term, column] : spec.column_map) require_identifier(column, "column of '" + term + "'");
}

inline std::string default_output_column(const ModelArtifact& a) {
    if (a.model_id == "PM1") return "p_graduate";
    if (a.model_id == "PM2") return "p_graduate_4y";
    if (a.model_id == "PM3") return "time_to_degree";
    return a.family == glm::Family::logistic ? "probability" : "prediction";
}

}  // namespace detail

/// `c0 + c1*col1 + ...` in artifact term order.
inline std::string linear_expression(const ModelArtifact& a, const ViewSpec& spec) {
    std::string out;
    for (const auto& [term, beta] : a.coefficients) {
        if (!out.empty()) out += " + ";
        if (term == glm::kConstant) {
            out += format_double(beta);
            continue;
        }
        auto it = spec.column_map.find(term);
        if (it == spec.column_map.end()) throw DataError("no column mapped for term '" + term + "'");
        detail::require_identifier(it->second, "column of '" + term + "'");
        out += format_double(beta) + "*" + it->second;
    }
    return out;
}

/// The calculated column: EXP(z)/(1+EXP(z)) for logistic models, z for linear ones.
inline std::string score_expression(const ModelArtifact& a, const ViewSpec& spec, const Dialect& dialect = {}) {
    std::string z = linear_expression(a, spec);
    if (a.family == glm::Family::linear) return z;
    return dialect.exp_function + "(" + z + ")/(1+" + dialect.exp_function + "(" + z + "))";
}

inline std::string emit_sql_view(const ModelArtifact& a, const ViewSpec& spec, const Dialect& dialect = {}) {
    detail::validate(spec);
    const std::string column = spec.output_column.empty() ? detail::default_output_column(a) : spec.output_column;
    detail::require_identifier(column, "output column");
    std::string out = "CREATE VIEW " + spec.view_name + " AS\n";
    out += "SELECT\n";
    out += "  " + spec.key_column + ",\n";
    out += "  " + score_expression(a, spec, dialect) + " AS " + column + "\n";
    out += "FROM " + spec.source_table + ";\n";
    return out;
}

/// One view with p_graduate_4y, time_to_degree (NULL below the threshold)
/// and a category column.
inline std::string emit_two_stage_sql(const ModelArtifact& pm2, const ModelArtifact& pm3, const ViewSpec& spec,
                                      const Dialect& dialect = {}) {
    if (pm2.family != glm::Family::logistic) throw DataError("first stage model must be logistic");
    if (pm3.family != glm::Family::linear) throw DataError("second stage model must be linear");
    if (!std::isfinite(spec.threshold)) throw DataError("threshold must be finite");
    detail::validate(spec);
    const std::string p = score_expression(pm2, spec, dialect);
    const std::string t = score_expression(pm3, spec, dialect);
    const std::string cond = p + " >= " + format_double(spec.threshold);
    std::string out = "CREATE VIEW " + spec.view_name + " AS\n";
    out += "SELECT\n";
    out += "  " + spec.key_column + ",\n";
    out += "  " + p + " AS p_graduate_4y,\n";
    out += "  CASE WHEN " + cond + " THEN " + t + " ELSE NULL END AS time_to_degree,\n";
    out += "  CASE WHEN " + cond + " THEN 'numeric' ELSE 'four years or more' END AS category\n";
    out += "FROM " + spec.source_table + ";\n";
    return out;
}

}  // namespace gradpred::sql
