#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gradpred/csv.hpp"
#include "gradpred/date.hpp"
#include "gradpred/errors.hpp"
#include "gradpred/numfmt.hpp"

namespace gradpred {

enum class Gender { female, male, unspecified };
enum class RightType { combined_bsc_msc, other };
enum class Field { engineering, arts_and_design, business };

/// First start date of the post-Bologna regime; cohort rights must start after it.
inline constexpr Date kBolognaCutoff{2005, 8, 1};
inline constexpr int kValidityYears = 7;

struct Student {
    std::string student_id;
    Gender gender = Gender::unspecified;

    friend bool operator==(const Student&, const Student&) = default;
};

struct StudyRight {
    std::string study_right_id;
    std::string student_id;
    Date start_date;
    RightType right_type = RightType::combined_bsc_msc;
    Field field = Field::business;
    std::optional<Date> graduation_date;

    Date validity_end() const { return start_date.add_years(kValidityYears); }

    friend bool operator==(const StudyRight&, const StudyRight&) = default;
};

struct CreditEvent {
    std::string study_right_id;
    Date registration_date;
    double credits = 0.0;

    friend bool operator==(const CreditEvent&, const CreditEvent&) = default;
};

// ---- enum text codes used by the CSV files ----

inline std::string_view gender_code(Gender g) {
    switch (g) {
        case Gender::female: return "F";
        case Gender::male: return "M";
        case Gender::unspecified: return "U";
    }
    return "U";
}

inline std::string_view gender_name(Gender g) {
    switch (g) {
        case Gender::female: return "female";
        case Gender::male: return "male";
        case Gender::unspecified: return "unspecified";
    }
    return "unspecified";
}

inline std::string_view right_type_code(RightType t) {
    return t == RightType::combined_bsc_msc ? "combined" : "other";
}

inline std::string_view field_name(Field f) {
    switch (f) {
        case Field::engineering: return "engineering";
        case Field::arts_and_design: return "arts_and_design";
        case Field::business: return "business";
    }
    return "business";
}

inline std::optional<Gender> parse_gender(std::string_view s) {
    if (s == "F") return Gender::female;
    if (s == "M") return Gender::male;
    if (s == "U") return Gender::unspecified;
    return std::nullopt;
}

inline std::optional<RightType> parse_right_type(std::string_view s) {
    if (s == "combined") return RightType::combined_bsc_msc;
    if (s == "other") return RightType::other;
    return std::nullopt;
}

inline std::optional<Field> parse_field(std::string_view s) {
    if (s == "engineering") return Field::engineering;
    if (s == "arts_and_design") return Field::arts_and_design;
    if (s == "business") return Field::business;
    return std::nullopt;
}

inline const std::vector<std::string>& students_header() {
    static const std::vector<std::string> h{"student_id", "gender"};
    return h;
}
inline const std::vector<std::string>& study_rights_header() {
    static const std::vector<std::string> h{"study_right_id", "student_id", "start_date",
                                            "right_type", "field", "graduation_date"};
    return h;
}
inline const std::vector<std::string>& credits_header() {
    static const std::vector<std::string> h{"study_right_id", "registration_date", "credits"};
    return h;
}

/// Immutable, cross-validated student registry.
class Registry {
public:
    Registry() = default;

    /// Validates keys and per-record invariants; throws DataError on the first violation.
    static Registry create(std::vector<Student> students, std::vector<StudyRight> rights,
                           std::vector<CreditEvent> credits) {
        Registry r;
        r.students_ = std::move(students);
        r.rights_ = std::move(rights);
        r.credits_ = std::move(credits);

        std::unordered_set<std::string_view> student_ids;
        for (const auto& s : r.students_) {
            if (s.student_id.empty()) throw DataError("student with empty student_id");
            if (!student_ids.insert(s.student_id).second)
                throw DataError("duplicate student_id '" + s.student_id + "'");
        }
        for (std::size_t i = 0; i < r.rights_.size(); ++i) {
            const auto& sr = r.rights_[i];
            if (sr.study_right_id.empty()) throw DataError("study right with empty study_right_id");
            if (!r.right_index_.emplace(sr.study_right_id, i).second)
                throw DataError("duplicate study_right_id '" + sr.study_right_id + "'");
            if (!student_ids.contains(sr.student_id))
                throw DataError("study right '" + sr.study_right_id + "' references unknown student_id '" +
                                sr.student_id + "'");
            if (sr.graduation_date && *sr.graduation_date < sr.start_date)
                throw DataError("study right '" + sr.study_right_id + "' graduates (" +
                                sr.graduation_date->str() + ") before it starts (" + sr.start_date.str() + ")");
        }
        for (std::size_t i = 0; i < r.credits_.size(); ++i) {
            const auto& ev = r.credits_[i];
            auto it = r.right_index_.find(ev.study_right_id);
            if (it == r.right_index_.end())
                throw DataError("credit event references unknown study_right_id '" + ev.study_right_id + "'");
            if (!(ev.credits > 0.0))
                throw DataError("credit event for '" + ev.study_right_id + "' has non-positive credits");
            if (ev.registration_date < r.rights_[it->second].start_date)
                throw DataError("credit event for '" + ev.study_right_id + "' registered (" +
                                ev.registration_date.str() + ") before the study right starts");
            r.events_by_right_[ev.study_right_id].push_back(i);
        }
        for (std::size_t i = 0; i < r.students_.size(); ++i) r.student_index_.emplace(r.students_[i].student_id, i);
        return r;
    }

    const std::vector<Student>& students() const { return students_; }
    const std::vector<StudyRight>& study_rights() const { return rights_; }
    const std::vector<CreditEvent>& credit_events() const { return credits_; }

    const Student& student_of(const StudyRight& right) const {
        return students_[student_index_.at(right.student_id)];
    }

    /// Credit events of one study right, in registry order.
    std::vector<CreditEvent> events_of(std::string_view study_right_id) const {
        std::vector<CreditEvent> out;
        auto it = events_by_right_.find(std::string(study_right_id));
        if (it == events_by_right_.end()) return out;
        out.reserve(it->second.size());
        for (auto i : it->second) out.push_back(credits_[i]);
        return out;
    }

private:
    std::vector<Student> students_;
    std::vector<StudyRight> rights_;
    std::vector<CreditEvent> credits_;
    std::unordered_map<std::string, std::size_t> student_index_;
    std::unordered_map<std::string, std::size_t> right_index_;
    std::unordered_map<std::string, std::vector<std::size_t>> events_by_right_;
};

namespace detail {

inline std::string where(const std::string& source, std::size_t line) {
    return source + ": line " + std::to_string(line) + ": ";
}

inline Date parse_date_at(const std::string& text, const std::string& source, std::size_t line) {
    try {
        return Date::parse(text);
    } catch (const DataError& e) {
        throw DataError(where(source, line) + e.what());
    }
}

}  // namespace detail

inline Registry read_registry(std::istream& students_in, std::istream& rights_in, std::istream& credits_in,
                              const std::string& students_src = "students.csv",
                              const std::string& rights_src = "study_rights.csv",
                              const std::string& credits_src = "credits.csv") {
    std::vector<Student> students;
    for (auto& rec : csv::read(students_in, students_header(), students_src)) {
        auto g = parse_gender(rec.fields[1]);
        if (!g) throw DataError(detail::where(students_src, rec.line) + "invalid gender '" + rec.fields[1] + "'");
        students.push_back({rec.fields[0], *g});
    }

    std::vector<StudyRight> rights;
    for (auto& rec : csv::read(rights_in, study_rights_header(), rights_src)) {
        StudyRight sr;
        sr.study_right_id = rec.fields[0];
        sr.student_id = rec.fields[1];
        sr.start_date = detail::parse_date_at(rec.fields[2], rights_src, rec.line);
        auto t = parse_right_type(rec.fields[3]);
        if (!t) throw DataError(detail::where(rights_src, rec.line) + "invalid right_type '" + rec.fields[3] + "'");
        sr.right_type = *t;
        auto f = parse_field(rec.fields[4]);
        if (!f) throw DataError(detail::where(rights_src, rec.line) + "invalid field '" + rec.fields[4] + "'");
        sr.field = *f;
        if (!rec.fields[5].empty()) sr.graduation_date = detail::parse_date_at(rec.fields[5], rights_src, rec.line);
        rights.push_back(std::move(sr));
    }

    std::vector<CreditEvent> credits;
    for (auto& rec : csv::read(credits_in, credits_header(), credits_src)) {
        CreditEvent ev;
        ev.study_right_id = rec.fields[0];
        ev.registration_date = detail::parse_date_at(rec.fields[1], credits_src, rec.line);
        try {
            ev.credits = parse_double(rec.fields[2], "credits");
        } catch (const DataError& e) {
            throw DataError(detail::where(credits_src, rec.line) + e.what());
        }
        credits.push_back(std::move(ev));
    }
    return Registry::create(std::move(students), std::move(rights), std::move(credits));
}

/// Loads students.csv, study_rights.csv and credits.csv.
inline Registry load_registry(const std::string& students_path, const std::string& study_rights_path,
                              const std::string& credits_path) {
    auto open = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw DataError("cannot open '" + p + "'");
        return in;
    };
    auto s = open(students_path);
    auto r = open(study_rights_path);
    auto c = open(credits_path);
    return read_registry(s, r, c, students_path, study_rights_path, credits_path);
}

inline Registry load_registry_dir(const std::filesystem::path& dir) {
    return load_registry((dir / "students.csv").string(), (dir / "study_rights.csv").string(),
                         (dir / "credits.csv").string());
}

// ---- canonical writers ----

inline void write_students(std::ostream& out, const Registry& reg) {
    csv::write_row(out, students_header());
    for (const auto& s : reg.students()) csv::write_row(out, {s.student_id, std::string(gender_code(s.gender))});
}

inline void write_study_rights(std::ostream& out, const Registry& reg) {
    csv::write_row(out, study_rights_header());
    for (const auto& r : reg.study_rights())
        csv::write_row(out, {r.study_right_id, r.student_id, r.start_date.str(), std::string(right_type_code(r.right_type)),
                             std::string(field_name(r.field)), r.graduation_date ? r.graduation_date->str() : ""});
}

inline void write_credits(std::ostream& out, const Registry& reg) {
    csv::write_row(out, credits_header());
    for (const auto& e : reg.credit_events())
        csv::write_row(out, {e.study_right_id, e.registration_date.str(), format_double(e.credits)});
}

/// Writes the three registry CSV files into `dir` (created if missing).
inline void write_registry(const Registry& reg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + p.string() + "'");
        return out;
    };
    auto s = open(dir / "students.csv");
    write_students(s, reg);
    auto r = open(dir / "study_rights.csv");
    write_study_rights(r, reg);
    auto c = open(dir / "credits.csv");
    write_credits(c, reg);
}

struct CohortOptions {
    /// Admit rights starting exactly on the Bologna cutoff date.
    bool include_cutoff_date = false;
};

/// Whether the right is active on `date`: started, not yet graduated, not expired.
inline bool is_active(const StudyRight& r, const Date& date) {
    Date end = r.validity_end();
    if (r.graduation_date && *r.graduation_date < end) end = *r.graduation_date;
    return r.start_date <= date && date < end;
}

inline bool in_cohort(const StudyRight& r, const Date& observation_date, const CohortOptions& opts = {}) {
    bool started_after = opts.include_cutoff_date ? r.start_date >= kBolognaCutoff : r.start_date > kBolognaCutoff;
    return started_after && r.right_type == RightType::combined_bsc_msc && is_active(r, observation_date);
}

/// Combined-degree rights started after the Bologna cutoff and active on the
/// observation date, in registry order.
inline std::vector<StudyRight> filter_cohort(const Registry& reg, const Date& observation_date,
                                             const CohortOptions& opts = {}) {
    std::vector<StudyRight> out;
    for (const auto& r : reg.study_rights())
        if (in_cohort(r, observation_date, opts)) out.push_back(r);
    return out;
}

}  // namespace gradpred
