#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gradpred/codegen.hpp"
#include "gradpred/errors.hpp"
#include "gradpred/featurize.hpp"
#include "gradpred/metrics.hpp"
#include "gradpred/pipeline.hpp"
#include "gradpred/privacy.hpp"
#include "gradpred/registry.hpp"
#include "gradpred/synthgen.hpp"

namespace gradpred::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericalError = 3,
    kPrivacyDenied = 4,
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string config_path;

    // generate
    std::string gen_config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;

    // extract
    std::string data_dir;
    std::string observation_date;
    std::string label_horizon;
    std::vector<std::string> columns;
    std::string policy_path;
    std::string purpose = "graduation_prediction";
    std::string audit_log = "gradpred-audit.ndjson";
    bool include_cutoff_date = false;

    // models
    std::string model;
    std::string features;
    std::string pm1, pm2, pm3;
    double threshold = kDefaultThreshold;
    double alpha = 0.05;
    std::string created_at;
    std::string group_by = "all";
    std::vector<int> bands{0, 1, 2};
    std::string format = "csv";
    std::string label;

    // emit-sql
    std::string view_name = "graduation_predictions";
    std::string source_table = "feature_rows";
    std::string key_column = "study_right_id";
    std::string output_column;
    std::vector<std::string> column_map;

    std::string out;  // empty or "-" means standard output
};

namespace detail {

/// Data goes to `path`, or to `stdout_stream` when the path is empty or "-".
/// Files are written only once the content is complete.
inline void emit(const std::string& path, const std::string& content, std::ostream& stdout_stream) {
    if (path.empty() || path == "-") {
        stdout_stream << content;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << content;
    if (!f) throw DataError("failed writing '" + path + "'");
}

inline Date parse_date_flag(const std::string& text, const char* flag) {
    try {
        return Date::parse(text);
    } catch (const DataError& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
}

inline std::optional<Date> optional_date(const std::string& text, const char* flag) {
    if (text.empty()) return std::nullopt;
    return parse_date_flag(text, flag);
}

inline void require(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

inline void check_threshold(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("--threshold must lie in [0, 1]");
}

/// Default observation dates of the reference models, used when a feature
/// file is trained without --observation-date.
inline Date default_observation_date(const std::string& model_id) {
    return Date::parse(model_id == "PM1" ? reference::kPm1ObservationDate : reference::kPm2ObservationDate);
}

inline std::string value_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) s += (s.empty() ? "" : ",") + value_string(e);
        return s;
    }
    return v.dump();
}

/// Applies a flat JSON object of option defaults ("observation-date" or
/// "observation_date" style keys) to every subcommand exposing that option.
/// Command-line flags parsed afterwards override these values.
inline void apply_config_file(CLI::App& app, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw UsageError("config '" + path + "' must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        std::string flag = "--" + key;
        for (auto& c : flag)
            if (c == '_') c = '-';
        bool used = false;
        for (auto* sub : app.get_subcommands({})) {
            if (auto* opt = sub->get_option_no_throw(flag)) {
                opt->default_str(value_string(value));
                opt->default_val(value_string(value));
                used = true;
            }
        }
        if (!used) throw UsageError("config key '" + key + "' matches no option");
    }
}

inline std::string find_config_arg(int argc, const char* const* argv) {
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return {};
}

}  // namespace detail

// ---- subcommand bodies ----

inline void run_generate(const RunConfig& c, std::ostream& out) {
    detail::require(c.gen_config, "--gen-config");
    detail::require(c.out_dir, "--out-dir");
    auto config = synth::load_config(c.gen_config);
    auto reg = synth::generate_population(config, c.seed.value_or(config.seed));
    write_registry(reg, c.out_dir);
    (void)out;
}

inline void run_extract(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::require(c.data_dir, "--data-dir");
    detail::require(c.observation_date, "--observation-date");
    const Date obs = detail::parse_date_flag(c.observation_date, "--observation-date");
    const auto horizon = detail::optional_date(c.label_horizon, "--label-horizon");

    PrivacyPolicy policy = c.policy_path.empty() ? PrivacyPolicy::default_policy() : PrivacyPolicy::load(c.policy_path);
    AuditLog log(c.audit_log);
    PrivacyGate gate(std::move(policy), log);
    const auto requested = c.columns.empty() ? all_column_names() : c.columns;
    const ApprovedColumns approved = gate.check_columns(requested, c.purpose, "extract");

    const Registry reg = load_registry_dir(c.data_dir);
    CohortOptions cohort;
    cohort.include_cutoff_date = c.include_cutoff_date;
    const FeatureTable table = extract_features(reg, obs, horizon, approved, cohort);
    std::ostringstream buf;
    write_feature_table(buf, table);
    detail::emit(c.out, buf.str(), out);
    err << "extracted " << table.rows.size() << " study rights at " << obs.str() << "\n";
}

inline void run_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::require(c.model, "--model");
    detail::require(c.features, "--features");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
    const std::string id = normalize_model_id(c.model);
    if (id != "PM1" && id != "PM2" && id != "PM3") throw UsageError("--model must be pm1, pm2 or pm3");
    const Date obs = c.observation_date.empty() ? detail::default_observation_date(id)
                                                : detail::parse_date_flag(c.observation_date, "--observation-date");
    const auto table = load_feature_table(c.features, obs, detail::optional_date(c.label_horizon, "--label-horizon"));
    TrainOptions opts;
    opts.alpha = c.alpha;
    opts.created_at = c.created_at;
    auto outcome = train(id, table, opts);
    for (const auto& w : outcome.warnings) err << "warning: " << w << "\n";
    std::ostringstream buf;
    buf << artifact_to_json(outcome.artifact).dump(2) << '\n';
    detail::emit(c.out, buf.str(), out);
    err << id << ": n = " << outcome.artifact.n << ", " << glm::r_squared_kind_name(outcome.artifact.r_squared_kind)
        << " R^2 = " << outcome.artifact.r_squared << ", dropped " << outcome.artifact.dropped_terms.size() << " term(s)\n";
}

inline void run_score(const RunConfig& c, std::ostream& out) {
    detail::require(c.model, "--model");
    detail::require(c.features, "--features");
    const auto artifact = load_artifact(c.model);
    const auto table = load_feature_table(c.features);
    std::ostringstream buf;
    csv::write_row(buf, {"study_right_id", "score"});
    for (const auto& row : table.rows) csv::write_row(buf, {row.study_right_id, format_double(score(artifact, row))});
    detail::emit(c.out, buf.str(), out);
}

inline void run_predict(const RunConfig& c, std::ostream& out) {
    detail::require(c.pm2, "--pm2");
    detail::require(c.pm3, "--pm3");
    detail::require(c.features, "--features");
    detail::check_threshold(c.threshold);
    const auto pm2 = load_artifact(c.pm2);
    const auto pm3 = load_artifact(c.pm3);
    std::optional<ModelArtifact> pm1;
    if (!c.pm1.empty()) pm1 = load_artifact(c.pm1);
    const auto table = load_feature_table(c.features);
    std::ostringstream buf;
    csv::write_row(buf, {"study_right_id", "p_graduate", "p_graduate_4y", "time_to_degree", "category"});
    for (const auto& row : table.rows) {
        const auto o = predict_two_stage(pm2, pm3, row, c.threshold, pm1 ? &*pm1 : nullptr);
        csv::write_row(buf, {o.study_right_id, o.p_graduate ? format_double(*o.p_graduate) : "",
                             format_double(o.p_graduate_4y), o.time_to_degree ? format_double(*o.time_to_degree) : "",
                             std::string(category_name(o.category))});
    }
    detail::emit(c.out, buf.str(), out);
}

inline void run_aggregate(const RunConfig& c, std::ostream& out) {
    detail::require(c.model, "--model");
    detail::require(c.features, "--features");
    GroupKey key;
    if (c.group_by == "field") key = GroupKey::field;
    else if (c.group_by == "gender") key = GroupKey::gender;
    else if (c.group_by == "all") key = GroupKey::all;
    else throw UsageError("--group-by must be field, gender or all");
    const auto artifact = load_artifact(c.model);
    const auto table = load_feature_table(c.features);
    std::ostringstream buf;
    csv::write_row(buf, {"group", "expected_graduates"});
    for (const auto& [group, expected] : expected_graduates(artifact, table, key))
        csv::write_row(buf, {group, format_double(expected)});
    detail::emit(c.out, buf.str(), out);
}

inline void run_evaluate(const RunConfig& c, std::ostream& out) {
    detail::require(c.model, "--model");
    detail::require(c.features, "--features");
    if (c.format != "csv" && c.format != "text") throw UsageError("--format must be csv or text");
    const auto artifact = load_artifact(c.model);
    const auto table = load_feature_table(c.features);
    std::ostringstream buf;

    if (artifact.family == glm::Family::linear) {
        if (!table.has(Column::semesters_to_degree))
            throw DataError("evaluation of a linear model needs 'semesters_to_degree'");
        std::vector<double> predicted;
        std::vector<int> actual;
        for (const auto& row : table.rows) {
            auto s = row.get(Column::semesters_to_degree);
            if (!s) continue;
            if (auto g = row.get(Column::graduates_in_4y); g && *g != 1.0) continue;
            predicted.push_back(score(artifact, row));
            actual.push_back(static_cast<int>(*s));
        }
        const auto report = metrics::precision_bands(predicted, actual, c.bands);
        if (c.format == "csv") metrics::write_bands_csv(buf, report);
        else metrics::write_bands_text(buf, report);
    } else {
        detail::check_threshold(c.threshold);
        const std::string label_name =
            !c.label.empty() ? c.label : (artifact.model_id == "PM1" ? "graduated" : "graduates_in_4y");
        auto label = parse_column(label_name);
        if (!label || is_covariate(*label)) throw UsageError("--label must be a label column");
        if (!table.has(*label)) throw DataError("feature table lacks label '" + label_name + "'");
        std::vector<double> probs;
        std::vector<int> labels;
        for (const auto& row : table.rows) {
            auto y = row.get(*label);
            if (!y) throw DataError("row '" + row.study_right_id + "' is missing label '" + label_name + "'");
            probs.push_back(score(artifact, row));
            labels.push_back(static_cast<int>(*y));
        }
        const auto counts = metrics::confusion_counts(probs, labels, c.threshold);
        if (c.format == "csv") {
            metrics::write_confusion_csv(buf, counts);
        } else {
            buf << "Confusion counts at threshold " << format_double(counts.threshold) << " (n = " << counts.n()
                << ")\n  tp " << counts.tp << "  fp " << counts.fp << "\n  fn " << counts.fn << "  tn " << counts.tn
                << "\n";
        }
    }
    detail::emit(c.out, buf.str(), out);
}

inline void run_emit_sql(const RunConfig& c, std::ostream& out) {
    detail::check_threshold(c.threshold);
    sql::ViewSpec spec = sql::ViewSpec::with_identity_mapping();
    spec.view_name = c.view_name;
    spec.source_table = c.source_table;
    spec.key_column = c.key_column;
    spec.threshold = c.threshold;
    spec.output_column = c.output_column;
    for (const auto& m : c.column_map) {
        auto eq = m.find('=');
        if (eq == std::string::npos) throw UsageError("--map expects term=column, got '" + m + "'");
        const std::string term = m.substr(0, eq);
        if (!parse_covariate(term)) throw UsageError("--map: unknown term '" + term + "'");
        spec.column_map[term] = m.substr(eq + 1);
    }
    std::string text;
    if (!c.model.empty()) {
        if (!c.pm2.empty() || !c.pm3.empty()) throw UsageError("use either --model or --pm2/--pm3");
        text = sql::emit_sql_view(load_artifact(c.model), spec);
    } else {
        detail::require(c.pm2, "--pm2 (or --model)");
        detail::require(c.pm3, "--pm3 (or --model)");
        text = sql::emit_two_stage_sql(load_artifact(c.pm2), load_artifact(c.pm3), spec);
    }
    detail::emit(c.out, text, out);
}

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    CLI::App app{"Graduation and time-to-degree prediction from a student registry", "gradpred"};
    app.require_subcommand(1);
    app.add_option("--config", c.config_path, "JSON file of option defaults; flags override it");

    auto* gen = app.add_subcommand("generate", "Write a synthetic registry drawn from ground-truth models");
    gen->add_option("--gen-config", c.gen_config, "Generator config (JSON)");
    gen->add_option("--seed", c.seed, "64-bit seed; overrides the config's seed");
    gen->add_option("--out-dir", c.out_dir, "Directory for students.csv, study_rights.csv, credits.csv");

    auto* ext = app.add_subcommand("extract", "Compute the feature table at an observation date");
    ext->add_option("--data-dir", c.data_dir, "Directory holding the registry CSV files");
    ext->add_option("--observation-date", c.observation_date, "YYYY-MM-DD");
    ext->add_option("--label-horizon", c.label_horizon, "YYYY-MM-DD; enables the 'graduated' label");
    ext->add_option("--columns", c.columns, "Requested columns (default: all)")->delimiter(',');
    ext->add_option("--policy", c.policy_path, "Privacy policy (JSON); built-in default otherwise");
    ext->add_option("--purpose", c.purpose, "Processing purpose checked against the policy");
    ext->add_option("--audit-log", c.audit_log, "Append-only privacy audit log (NDJSON)");
    ext->add_flag("--include-cutoff-date", c.include_cutoff_date, "Admit rights starting on 2005-08-01");
    ext->add_option("--out", c.out, "Output CSV (default: stdout)");

    auto* trn = app.add_subcommand("train", "Fit PM1, PM2 or PM3 with backward elimination");
    trn->add_option("--model", c.model, "pm1 | pm2 | pm3");
    trn->add_option("--features", c.features, "Feature CSV");
    trn->add_option("--observation-date", c.observation_date, "Observation date of the feature table");
    trn->add_option("--label-horizon", c.label_horizon, "Label horizon of the feature table (PM1)");
    trn->add_option("--alpha", c.alpha, "Significance level for elimination");
    trn->add_option("--created-at", c.created_at, "Timestamp stamped into the artifact");
    trn->add_option("--out", c.out, "Artifact JSON (default: stdout)");

    auto* sco = app.add_subcommand("score", "Score every feature row with one model");
    sco->add_option("--model", c.model, "Artifact JSON");
    sco->add_option("--features", c.features, "Feature CSV");
    sco->add_option("--out", c.out, "Output CSV (default: stdout)");

    auto* pre = app.add_subcommand("predict", "Two-stage graduation and time-to-degree prediction");
    pre->add_option("--pm1", c.pm1, "Optional graduation model");
    pre->add_option("--pm2", c.pm2, "Four-year graduation model");
    pre->add_option("--pm3", c.pm3, "Time-to-degree model");
    pre->add_option("--features", c.features, "Feature CSV");
    pre->add_option("--threshold", c.threshold, "PM2 probability at or above which PM3 applies");
    pre->add_option("--out", c.out, "Output CSV (default: stdout)");

    auto* agg = app.add_subcommand("aggregate", "Expected graduate counts per group");
    agg->add_option("--model", c.model, "Logistic artifact JSON");
    agg->add_option("--features", c.features, "Feature CSV");
    agg->add_option("--group-by", c.group_by, "field | gender | all");
    agg->add_option("--out", c.out, "Output CSV (default: stdout)");

    auto* eva = app.add_subcommand("evaluate", "Precision bands (linear) or confusion counts (logistic)");
    eva->add_option("--model", c.model, "Artifact JSON");
    eva->add_option("--features", c.features, "Feature CSV with labels");
    eva->add_option("--bands", c.bands, "Band widths in semesters")->delimiter(',');
    eva->add_option("--threshold", c.threshold, "Classification threshold");
    eva->add_option("--label", c.label, "Label column for logistic models");
    eva->add_option("--format", c.format, "csv | text");
    eva->add_option("--out", c.out, "Output (default: stdout)");

    auto* sql = app.add_subcommand("emit-sql", "Emit a CREATE VIEW with embedded coefficients");
    sql->add_option("--model", c.model, "Single artifact JSON");
    sql->add_option("--pm2", c.pm2, "Two-stage: PM2 artifact");
    sql->add_option("--pm3", c.pm3, "Two-stage: PM3 artifact");
    sql->add_option("--threshold", c.threshold, "Two-stage threshold");
    sql->add_option("--view-name", c.view_name, "View name");
    sql->add_option("--source-table", c.source_table, "Table holding the feature columns");
    sql->add_option("--key-column", c.key_column, "Key column");
    sql->add_option("--output-column", c.output_column, "Calculated column name (single model)");
    sql->add_option("--map", c.column_map, "term=column overrides")->delimiter(',');
    sql->add_option("--out", c.out, ".sql file (default: stdout)");

    try {
        if (auto cfg = detail::find_config_arg(argc, argv); !cfg.empty()) detail::apply_config_file(app, cfg);
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (gen->parsed()) run_generate(c, out);
        else if (ext->parsed()) run_extract(c, out, err);
        else if (trn->parsed()) run_train(c, out, err);
        else if (sco->parsed()) run_score(c, out);
        else if (pre->parsed()) run_predict(c, out);
        else if (agg->parsed()) run_aggregate(c, out);
        else if (eva->parsed()) run_evaluate(c, out);
        else if (sql->parsed()) run_emit_sql(c, out);
        return kOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kUsage;
    } catch (const PrivacyDenied& e) {
        err << "privacy: " << e.what() << "\n";
        return kPrivacyDenied;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
}

}  // namespace gradpred::cli
