#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gradpred/errors.hpp"
#include "gradpred/featurize.hpp"
#include "gradpred/glm.hpp"
#include "gradpred/numfmt.hpp"
#include "gradpred/reference_models.hpp"

namespace gradpred {

inline constexpr int kArtifactSchemaVersion = 1;

/// Covariates offered to every trained model, in coefficient-table order.
inline const std::vector<Column>& model_covariates() {
    static const std::vector<Column> cols{Column::gender_male,       Column::field_arts_and_design,
                                          Column::field_engineering, Column::no_credits_in_18m,
                                          Column::sum_of_cr,         Column::distance_to_validity_end};
    return cols;
}

struct ModelArtifact {
    std::string model_id;
    glm::Family family = glm::Family::logistic;
    std::vector<std::pair<std::string, double>> coefficients;  // "constant" first
    std::vector<std::string> dropped_terms;
    Date observation_date;
    std::size_t n = 0;
    double r_squared = 0.0;
    glm::RSquaredKind r_squared_kind = glm::RSquaredKind::unspecified;
    std::string created_at;
    int schema_version = kArtifactSchemaVersion;

    std::optional<double> coefficient(std::string_view term) const {
        for (const auto& [name, value] : coefficients)
            if (name == term) return value;
        return std::nullopt;
    }

    /// Throws DataError when an invariant does not hold.
    void validate() const {
        if (model_id.empty()) throw DataError("artifact has empty model_id");
        if (!coefficient(glm::kConstant)) throw DataError("artifact '" + model_id + "' lacks a constant term");
        for (std::size_t i = 0; i < coefficients.size(); ++i) {
            const auto& [name, value] = coefficients[i];
            if (name != glm::kConstant && !parse_covariate(name))
                throw DataError("artifact '" + model_id + "' has unknown term '" + name + "'");
            if (!std::isfinite(value)) throw DataError("artifact '" + model_id + "' has non-finite coefficient '" + name + "'");
            for (std::size_t j = 0; j < i; ++j)
                if (coefficients[j].first == name) throw DataError("artifact '" + model_id + "' repeats term '" + name + "'");
        }
        for (const auto& name : dropped_terms)
            if (!parse_covariate(name)) throw DataError("artifact '" + model_id + "' drops unknown term '" + name + "'");
        if ((model_id == "PM1" || model_id == "PM2") && family != glm::Family::logistic)
            throw DataError(model_id + " must be a logistic model");
        if (model_id == "PM3" && family != glm::Family::linear) throw DataError("PM3 must be a linear model");
    }

    friend bool operator==(const ModelArtifact&, const ModelArtifact&) = default;
};

/// Canonical model id: "pm2" -> "PM2"; custom ids pass through.
inline std::string normalize_model_id(std::string id) {
    if (id.size() == 3 && (id[0] == 'p' || id[0] == 'P') && (id[1] == 'm' || id[1] == 'M') && id[2] >= '1' &&
        id[2] <= '3')
        return std::string("PM") + id[2];
    return id;
}

// ---- persistence ----

inline nlohmann::ordered_json artifact_to_json(const ModelArtifact& a) {
    nlohmann::ordered_json coefs = nlohmann::ordered_json::object();
    for (const auto& [name, value] : a.coefficients) coefs[name] = value;
    return {{"model_id", a.model_id},
            {"family", glm::family_name(a.family)},
            {"coefficients", coefs},
            {"dropped_terms", a.dropped_terms},
            {"observation_date", a.observation_date.str()},
            {"n", a.n},
            {"r_squared", {{"value", a.r_squared}, {"kind", glm::r_squared_kind_name(a.r_squared_kind)}}},
            {"created_at", a.created_at},
            {"schema_version", a.schema_version}};
}

inline ModelArtifact artifact_from_json(const nlohmann::ordered_json& j, const std::string& source = "artifact") {
    ModelArtifact a;
    try {
        a.schema_version = j.at("schema_version").get<int>();
        if (a.schema_version != kArtifactSchemaVersion)
            throw DataError(source + ": unsupported schema_version " + std::to_string(a.schema_version) +
                            " (expected " + std::to_string(kArtifactSchemaVersion) + ")");
        a.model_id = j.at("model_id").get<std::string>();
        const auto family = j.at("family").get<std::string>();
        if (family == "logistic") a.family = glm::Family::logistic;
        else if (family == "linear") a.family = glm::Family::linear;
        else throw DataError(source + ": unknown family '" + family + "'");
        const auto& coefs = j.at("coefficients");
        if (!coefs.is_object()) throw DataError(source + ": coefficients must be an object");
        for (const auto& [name, value] : coefs.items()) {
            if (!value.is_number()) throw DataError(source + ": coefficient '" + name + "' is not a number");
            a.coefficients.emplace_back(name, value.get<double>());
        }
        a.dropped_terms = j.at("dropped_terms").get<std::vector<std::string>>();
        a.observation_date = Date::parse(j.at("observation_date").get<std::string>());
        a.n = j.at("n").get<std::size_t>();
        const auto& r2 = j.at("r_squared");
        a.r_squared = r2.at("value").get<double>();
        const auto kind = r2.at("kind").get<std::string>();
        if (kind == "mcfadden_pseudo") a.r_squared_kind = glm::RSquaredKind::mcfadden_pseudo;
        else if (kind == "coefficient_of_determination") a.r_squared_kind = glm::RSquaredKind::coefficient_of_determination;
        else if (kind == "unspecified") a.r_squared_kind = glm::RSquaredKind::unspecified;
        else throw DataError(source + ": unknown r_squared kind '" + kind + "'");
        a.created_at = j.at("created_at").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(source + ": malformed artifact: " + e.what());
    }
    try {
        a.validate();
    } catch (const DataError& e) {
        throw DataError(source + ": " + e.what());
    }
    return a;
}

inline void save_artifact(const ModelArtifact& a, const std::string& path) {
    a.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << artifact_to_json(a).dump(2) << '\n';
}

inline ModelArtifact load_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": malformed artifact: " + e.what());
    }
    return artifact_from_json(j, path);
}

/// The reference PM1/PM2/PM3 models as artifacts.
inline ModelArtifact reference_artifact(std::string_view model_id) {
    ModelArtifact a;
    a.model_id = normalize_model_id(std::string(model_id));
    a.created_at = "2018-01-01T00:00:00Z";
    auto fill = [&](const auto& coefs) {
        for (const auto& [name, value] : coefs) a.coefficients.emplace_back(std::string(name), value);
    };
    if (a.model_id == "PM1") {
        fill(reference::kPm1Coefficients);
        a.family = glm::Family::logistic;
        a.observation_date = Date::parse(reference::kPm1ObservationDate);
        a.n = reference::kPm1N;
        a.r_squared = reference::kPm1RSquared;
    } else if (a.model_id == "PM2") {
        fill(reference::kPm2Coefficients);
        a.dropped_terms.assign(reference::kPm2Dropped.begin(), reference::kPm2Dropped.end());
        a.family = glm::Family::logistic;
        a.observation_date = Date::parse(reference::kPm2ObservationDate);
        a.n = reference::kPm2N;
        a.r_squared = reference::kPm2RSquared;
    } else if (a.model_id == "PM3") {
        fill(reference::kPm3Coefficients);
        a.dropped_terms.assign(reference::kPm3Dropped.begin(), reference::kPm3Dropped.end());
        a.family = glm::Family::linear;
        a.observation_date = Date::parse(reference::kPm2ObservationDate);
        a.n = reference::kPm3N;
        a.r_squared = reference::kPm3RSquared;
        a.r_squared_kind = glm::RSquaredKind::coefficient_of_determination;
    } else {
        throw DataError("no reference model '" + std::string(model_id) + "'");
    }
    return a;
}

// ---- scoring ----

/// Intercept plus the dot product of coefficients and covariates.
inline double linear_predictor(const ModelArtifact& a, const FeatureRow& row) {
    double z = 0.0;
    for (const auto& [name, beta] : a.coefficients) {
        if (name == glm::kConstant) {
            z += beta;
            continue;
        }
        auto col = parse_covariate(name);
        if (!col) throw DataError("artifact '" + a.model_id + "' has unknown term '" + name + "'");
        auto v = row.get(*col);
        if (!v) throw DataError("row '" + row.study_right_id + "' is missing covariate '" + name + "'");
        z += beta * *v;
    }
    return z;
}

/// Logistic models return e^z / (1 + e^z); linear models return z.
inline double score(const ModelArtifact& a, const FeatureRow& row) {
    const double z = linear_predictor(a, row);
    return a.family == glm::Family::logistic ? glm::detail::sigmoid(z) : z;
}

enum class Category { numeric, four_years_or_more };

inline std::string_view category_name(Category c) {
    return c == Category::numeric ? "numeric" : "four_years_or_more";
}

struct PredictionOutcome {
    std::string study_right_id;
    std::optional<double> p_graduate;  // PM1, when supplied
    double p_graduate_4y = 0.0;
    std::optional<double> time_to_degree;  // semesters; only in the numeric category
    Category category = Category::four_years_or_more;
};

inline constexpr double kDefaultThreshold = 0.5;

/// Classifies with PM2, then regresses time-to-degree with PM3 for rows at or
/// above the threshold. Rows below it are "four years or more".
inline PredictionOutcome predict_two_stage(const ModelArtifact& pm2, const ModelArtifact& pm3, const FeatureRow& row,
                                           double threshold = kDefaultThreshold,
                                           const ModelArtifact* pm1 = nullptr) {
    if (pm2.family != glm::Family::logistic) throw DataError("first stage model must be logistic");
    if (pm3.family != glm::Family::linear) throw DataError("second stage model must be linear");
    if (pm1 && pm1->family != glm::Family::logistic) throw DataError("graduation model must be logistic");
    PredictionOutcome out;
    out.study_right_id = row.study_right_id;
    out.p_graduate_4y = score(pm2, row);
    if (pm1) out.p_graduate = score(*pm1, row);
    if (out.p_graduate_4y >= threshold) {
        out.category = Category::numeric;
        out.time_to_degree = score(pm3, row);
    }
    return out;
}

enum class GroupKey { field, gender, all };

inline std::string group_of(const FeatureRow& row, GroupKey key) {
    auto flag = [&](Column c) {
        auto v = row.get(c);
        if (!v) throw DataError("row '" + row.study_right_id + "' lacks '" + std::string(column_name(c)) + "' for grouping");
        return *v == 1.0;
    };
    switch (key) {
        case GroupKey::all: return "all";
        case GroupKey::gender:
            if (flag(Column::gender_female)) return "female";
            if (flag(Column::gender_male)) return "male";
            return "unspecified";
        case GroupKey::field:
            if (flag(Column::field_engineering)) return "engineering";
            if (flag(Column::field_arts_and_design)) return "arts_and_design";
            if (flag(Column::field_business)) return "business";
            throw DataError("row '" + row.study_right_id + "' has no field set");
    }
    return "all";
}

/// Expected number of graduates per group: the sum of scored probabilities.
inline std::map<std::string, double> expected_graduates(const ModelArtifact& a, const FeatureTable& table,
                                                        GroupKey key) {
    if (a.family != glm::Family::logistic)
        throw DataError("expected graduates need a logistic model, '" + a.model_id + "' is linear");
    std::map<std::string, double> out;
    for (const auto& row : table.rows) out[group_of(row, key)] += score(a, row);
    return out;
}

// ---- training ----

struct TrainOptions {
    double alpha = 0.05;
    glm::LogisticOptions logistic;
    /// Stamped into the artifact; defaults to the observation date at midnight UTC.
    std::string created_at;
};

struct TrainOutcome {
    ModelArtifact artifact;
    glm::FitResult fit;
    std::vector<std::string> warnings;
};

/// Fits PM1 (graduated), PM2 (graduates_in_4y) or PM3 (semesters_to_degree on
/// the rows with graduates_in_4y = 1) with backward elimination. Covariates
/// that do not vary over the training rows are dropped before fitting.
inline TrainOutcome train(std::string model_id, const FeatureTable& table, const TrainOptions& opts = {}) {
    model_id = normalize_model_id(std::move(model_id));
    TrainOutcome out;

    Column label;
    glm::Family family;
    if (model_id == "PM1") {
        label = Column::graduated;
        family = glm::Family::logistic;
        if (!table.label_horizon)
            out.warnings.push_back("PM1: label horizon unknown; 'graduated' should be observed at least 8 years after the observation date");
        else if (*table.label_horizon < table.observation_date.add_years(8))
            out.warnings.push_back("PM1: label horizon " + table.label_horizon->str() +
                                   " is less than 8 years after the observation date; late graduates count as non-graduates");
    } else if (model_id == "PM2") {
        label = Column::graduates_in_4y;
        family = glm::Family::logistic;
    } else if (model_id == "PM3") {
        label = Column::semesters_to_degree;
        family = glm::Family::linear;
    } else {
        throw DataError("unknown model id '" + model_id + "' (expected PM1, PM2 or PM3)");
    }

    if (!table.has(label))
        throw DataError(model_id + " needs the '" + std::string(column_name(label)) + "' label");
    if (model_id == "PM3" && !table.has(Column::graduates_in_4y))
        throw DataError("PM3 needs the 'graduates_in_4y' label to select its training rows");

    std::vector<const FeatureRow*> rows;
    for (const auto& row : table.rows) {
        if (model_id == "PM3") {
            auto g = row.get(Column::graduates_in_4y);
            if (!g) throw DataError("row '" + row.study_right_id + "' is missing 'graduates_in_4y'");
            if (*g != 1.0) continue;
        }
        if (!row.get(label))
            throw DataError("row '" + row.study_right_id + "' is missing label '" + std::string(column_name(label)) + "'");
        rows.push_back(&row);
    }
    if (rows.empty()) throw DataError(model_id + ": no training rows");

    const auto& covs = model_covariates();
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(covs.size()) + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = *rows[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        for (std::size_t j = 0; j < covs.size(); ++j) {
            auto v = row.get(covs[j]);
            if (!v)
                throw DataError("row '" + row.study_right_id + "' is missing covariate '" +
                                std::string(column_name(covs[j])) + "'");
            x(i, static_cast<Eigen::Index>(j) + 1) = *v;
        }
        y(i) = *row.get(label);
    }

    std::vector<std::string> names{std::string(glm::kConstant)};
    for (auto c : covs) names.emplace_back(column_name(c));
    glm::DesignMatrix design(names, x, y);

    std::vector<std::string> constant_terms;
    for (Eigen::Index j = 1; j < x.cols(); ++j)
        if ((x.col(j).array() == x(0, j)).all()) constant_terms.push_back(names[static_cast<std::size_t>(j)]);
    for (const auto& t : constant_terms) {
        design = design.without(t);
        out.warnings.push_back(model_id + ": covariate '" + t + "' does not vary in the training rows; dropped");
    }

    out.fit = glm::backward_eliminate(std::move(design), family, opts.alpha, opts.logistic);
    out.fit.dropped_terms.insert(out.fit.dropped_terms.begin(), constant_terms.begin(), constant_terms.end());

    auto& a = out.artifact;
    a.model_id = model_id;
    a.family = family;
    for (std::size_t j = 0; j < out.fit.terms.size(); ++j) a.coefficients.emplace_back(out.fit.terms[j], out.fit.coefficients[j]);
    a.dropped_terms = out.fit.dropped_terms;
    a.observation_date = table.observation_date;
    a.n = out.fit.n;
    a.r_squared = out.fit.r_squared;
    a.r_squared_kind = out.fit.r_squared_kind;
    a.created_at = opts.created_at.empty() ? table.observation_date.str() + "T00:00:00Z" : opts.created_at;
    a.validate();
    return out;
}

inline ModelArtifact train_model(std::string model_id, const FeatureTable& table, double alpha = 0.05) {
    TrainOptions opts;
    opts.alpha = alpha;
    return train(std::move(model_id), table, opts).artifact;
}

}  // namespace gradpred
