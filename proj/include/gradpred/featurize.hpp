#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradpred/csv.hpp"
#include "gradpred/date.hpp"
#include "gradpred/errors.hpp"
#include "gradpred/numfmt.hpp"
#include "gradpred/privacy.hpp"
#include "gradpred/registry.hpp"

namespace gradpred {

/// Feature-table columns after study_right_id, in canonical order. The first
/// eight are covariates; the last three are labels.
enum class Column : std::size_t {
    gender_female,
    gender_male,
    field_engineering,
    field_arts_and_design,
    field_business,
    sum_of_cr,
    no_credits_in_18m,
    distance_to_validity_end,
    graduated,
    graduates_in_4y,
    semesters_to_degree,
};

inline constexpr std::size_t kColumnCount = 11;
inline constexpr std::size_t kCovariateCount = 8;

inline constexpr std::array<std::string_view, kColumnCount> kColumnNames{
    "gender_female", "gender_male",        "field_engineering",        "field_arts_and_design",
    "field_business", "sum_of_cr",         "no_credits_in_18m",        "distance_to_validity_end",
    "graduated",      "graduates_in_4y",   "semesters_to_degree"};

inline std::string_view column_name(Column c) { return kColumnNames[static_cast<std::size_t>(c)]; }

inline std::optional<Column> parse_column(std::string_view name) {
    for (std::size_t i = 0; i < kColumnCount; ++i)
        if (kColumnNames[i] == name) return static_cast<Column>(i);
    return std::nullopt;
}

inline bool is_covariate(Column c) { return static_cast<std::size_t>(c) < kCovariateCount; }

inline std::optional<Column> parse_covariate(std::string_view name) {
    auto c = parse_column(name);
    return c && is_covariate(*c) ? c : std::nullopt;
}

inline std::vector<Column> all_columns() {
    std::vector<Column> out;
    for (std::size_t i = 0; i < kColumnCount; ++i) out.push_back(static_cast<Column>(i));
    return out;
}

inline std::vector<std::string> all_column_names() {
    return {kColumnNames.begin(), kColumnNames.end()};
}

struct FeatureRow {
    std::string study_right_id;
    std::array<std::optional<double>, kColumnCount> values{};

    std::optional<double> get(Column c) const { return values[static_cast<std::size_t>(c)]; }
    void set(Column c, std::optional<double> v) { values[static_cast<std::size_t>(c)] = v; }

    friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

struct FeatureTable {
    Date observation_date;
    std::optional<Date> label_horizon;
    std::vector<Column> manifest;  // canonical order
    std::vector<FeatureRow> rows;

    bool has(Column c) const { return std::find(manifest.begin(), manifest.end(), c) != manifest.end(); }
};

// ---- per-right computations ----

/// Credits registered on or before the observation date.
inline double sum_credits(std::span<const CreditEvent> events, const Date& observation_date) {
    double total = 0.0;
    for (const auto& e : events)
        if (e.registration_date <= observation_date) total += e.credits;
    return total;
}

/// 1 when nothing was registered in (observation - 18 months, observation].
inline int no_credits_window(std::span<const CreditEvent> events, const Date& observation_date) {
    const Date cutoff = observation_date.add_months(-18);
    for (const auto& e : events)
        if (cutoff < e.registration_date && e.registration_date <= observation_date) return 0;
    return 1;
}

/// Years (day count / 365.25) from the observation date to the end of the
/// seven-year validity period.
inline double distance_to_validity_end(const Date& start_date, const Date& observation_date) {
    if (observation_date < start_date)
        throw DataError("observation date " + observation_date.str() + " precedes study start " + start_date.str());
    const long days = observation_date.days_until(start_date.add_years(kValidityYears));
    if (days < 0)
        throw DataError("study right started " + start_date.str() + " has expired by " + observation_date.str());
    return static_cast<double>(days) / 365.25;
}

/// Semesters start on 1 August (autumn) and 1 January (spring).
inline int semester_ordinal(const Date& d) { return 2 * d.year() + (d.month() >= 8 ? 1 : 0); }

/// First day of the semester with the given ordinal.
inline Date semester_start(int ordinal) {
    const int year = ordinal / 2;
    return ordinal % 2 == 1 ? Date(year, 8, 1) : Date(year, 1, 1);
}

inline int semesters_between(const Date& observation_date, const Date& graduation_date) {
    if (graduation_date < observation_date)
        throw DataError("graduation date " + graduation_date.str() + " precedes observation date " +
                        observation_date.str());
    return semester_ordinal(graduation_date) - semester_ordinal(observation_date);
}

/// Covariates and labels of one study right; every column is filled.
inline FeatureRow featurize_right(const StudyRight& right, const Student& student,
                                  std::span<const CreditEvent> events, const Date& observation_date,
                                  const std::optional<Date>& label_horizon) {
    FeatureRow row;
    row.study_right_id = right.study_right_id;
    row.set(Column::gender_female, student.gender == Gender::female ? 1.0 : 0.0);
    row.set(Column::gender_male, student.gender == Gender::male ? 1.0 : 0.0);
    row.set(Column::field_engineering, right.field == Field::engineering ? 1.0 : 0.0);
    row.set(Column::field_arts_and_design, right.field == Field::arts_and_design ? 1.0 : 0.0);
    row.set(Column::field_business, right.field == Field::business ? 1.0 : 0.0);
    row.set(Column::sum_of_cr, sum_credits(events, observation_date));
    row.set(Column::no_credits_in_18m, no_credits_window(events, observation_date));
    row.set(Column::distance_to_validity_end, distance_to_validity_end(right.start_date, observation_date));

    const auto& grad = right.graduation_date;
    if (label_horizon) row.set(Column::graduated, grad && *grad <= *label_horizon ? 1.0 : 0.0);
    row.set(Column::graduates_in_4y, grad && *grad <= observation_date.add_years(4) ? 1.0 : 0.0);
    if (grad && observation_date < *grad)
        row.set(Column::semesters_to_degree, semesters_between(observation_date, *grad));
    return row;
}

/// One row per cohort study right on the observation date, restricted to the
/// approved columns. Labels look forward from the observation date;
/// `graduated` needs a label horizon.
inline FeatureTable extract_features(const Registry& reg, const Date& observation_date,
                                     const std::optional<Date>& label_horizon, const ApprovedColumns& approved,
                                     const CohortOptions& cohort = {}) {
    if (label_horizon && *label_horizon < observation_date)
        throw DataError("label horizon " + label_horizon->str() + " precedes observation date " +
                        observation_date.str());

    std::array<bool, kColumnCount> wanted{};
    for (const auto& name : approved.columns()) {
        if (name == "study_right_id") continue;
        auto c = parse_column(name);
        if (!c) throw DataError("unknown feature column '" + name + "'");
        wanted[static_cast<std::size_t>(*c)] = true;
    }

    FeatureTable table;
    table.observation_date = observation_date;
    table.label_horizon = label_horizon;
    for (std::size_t i = 0; i < kColumnCount; ++i)
        if (wanted[i]) table.manifest.push_back(static_cast<Column>(i));

    for (const auto& right : filter_cohort(reg, observation_date, cohort)) {
        auto events = reg.events_of(right.study_right_id);
        FeatureRow row = featurize_right(right, reg.student_of(right), events, observation_date, label_horizon);
        for (std::size_t i = 0; i < kColumnCount; ++i)
            if (!wanted[i]) row.values[i].reset();
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---- CSV ----

inline void write_feature_table(std::ostream& out, const FeatureTable& table) {
    std::vector<std::string> header{"study_right_id"};
    for (auto c : table.manifest) header.emplace_back(column_name(c));
    csv::write_row(out, header);
    for (const auto& row : table.rows) {
        std::vector<std::string> fields{row.study_right_id};
        for (auto c : table.manifest) {
            auto v = row.get(c);
            fields.push_back(v ? format_double(*v) : "");
        }
        csv::write_row(out, fields);
    }
}

/// Reads a feature CSV whose header is study_right_id followed by any known
/// columns. The observation date is not stored in the file.
inline FeatureTable read_feature_table(std::istream& in, const std::string& source,
                                       const Date& observation_date = Date{},
                                       const std::optional<Date>& label_horizon = std::nullopt) {
    std::vector<std::string> header;
    auto records = csv::read_any(in, header, source);
    if (header.empty() || header[0] != "study_right_id")
        throw DataError(source + ": first column must be study_right_id");

    FeatureTable table;
    table.observation_date = observation_date;
    table.label_horizon = label_horizon;
    std::vector<Column> cols;
    std::array<bool, kColumnCount> seen{};
    for (std::size_t i = 1; i < header.size(); ++i) {
        auto c = parse_column(header[i]);
        if (!c) throw DataError(source + ": unknown column '" + header[i] + "'");
        if (seen[static_cast<std::size_t>(*c)]) throw DataError(source + ": duplicate column '" + header[i] + "'");
        seen[static_cast<std::size_t>(*c)] = true;
        cols.push_back(*c);
    }
    for (std::size_t i = 0; i < kColumnCount; ++i)
        if (seen[i]) table.manifest.push_back(static_cast<Column>(i));

    for (auto& rec : records) {
        FeatureRow row;
        row.study_right_id = rec.fields[0];
        if (row.study_right_id.empty())
            throw DataError(source + ": line " + std::to_string(rec.line) + ": empty study_right_id");
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const auto& text = rec.fields[i + 1];
            if (text.empty()) continue;
            try {
                row.set(cols[i], parse_double(text, column_name(cols[i])));
            } catch (const DataError& e) {
                throw DataError(source + ": line " + std::to_string(rec.line) + ": " + e.what());
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline FeatureTable load_feature_table(const std::string& path, const Date& observation_date = Date{},
                                       const std::optional<Date>& label_horizon = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_feature_table(in, path, observation_date, label_horizon);
}

}  // namespace gradpred
