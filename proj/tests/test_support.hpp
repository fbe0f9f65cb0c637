#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gradpred/featurize.hpp"
#include "gradpred/glm.hpp"
#include "gradpred/pipeline.hpp"
#include "gradpred/privacy.hpp"
#include "gradpred/registry.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return GRADPRED_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return GRADPRED_TEST_DATA_DIR; }
inline std::string model_fixture(const char* name) { return (source_dir() / "data" / "models" / name).string(); }

/// Fresh, empty scratch directory per call.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("gradpred_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

inline gradpred::Registry registry_from_text(const std::string& students, const std::string& rights,
                                             const std::string& credits) {
    std::istringstream s(students), r(rights), c(credits);
    return gradpred::read_registry(s, r, c);
}

/// Approves every known column under the default policy.
inline gradpred::ApprovedColumns approve_all(gradpred::AuditLog& log) {
    gradpred::PrivacyGate gate(gradpred::PrivacyPolicy::default_policy(), log, [] { return std::string("T"); });
    return gate.check_columns(gradpred::all_column_names(), "graduation_prediction");
}

/// Day count by stepping one day at a time with the Gregorian leap rule.
/// Independent of std::chrono; used as an oracle for date arithmetic.
inline long naive_days_between(int y1, int m1, int d1, int y2, int m2, int d2) {
    auto leap = [](int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; };
    auto dim = [&](int y, int m) {
        static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return m == 2 && leap(y) ? 29 : days[m - 1];
    };
    long n = 0;
    int y = y1, m = m1, d = d1;
    while (y != y2 || m != m2 || d != d2) {
        ++n;
        if (++d > dim(y, m)) {
            d = 1;
            if (++m > 12) {
                m = 1;
                ++y;
            }
        }
    }
    return n;
}

struct CsvDataset {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
};

inline CsvDataset read_numeric_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> header;
    auto recs = gradpred::csv::read_any(in, header, p.string());
    CsvDataset d;
    d.names = header;
    d.columns.assign(header.size(), {});
    for (const auto& r : recs)
        for (std::size_t j = 0; j < header.size(); ++j) d.columns[j].push_back(std::stod(r.fields[j]));
    return d;
}

/// Design with a leading constant from the named columns of a dataset; response "y".
inline gradpred::glm::DesignMatrix design_from(const CsvDataset& d, const std::vector<std::string>& covariates) {
    const auto n = static_cast<Eigen::Index>(d.columns[0].size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(covariates.size()) + 1);
    Eigen::VectorXd y(n);
    auto col = [&](const std::string& name) -> const std::vector<double>& {
        for (std::size_t j = 0; j < d.names.size(); ++j)
            if (d.names[j] == name) return d.columns[j];
        throw std::runtime_error("no column " + name);
    };
    const auto& yv = col("y");
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (std::size_t j = 0; j < covariates.size(); ++j)
            x(i, static_cast<Eigen::Index>(j) + 1) = col(covariates[j])[static_cast<std::size_t>(i)];
        y(i) = yv[static_cast<std::size_t>(i)];
    }
    std::vector<std::string> names{"constant"};
    names.insert(names.end(), covariates.begin(), covariates.end());
    return gradpred::glm::DesignMatrix(names, x, y);
}

inline nlohmann::json golden() {
    std::ifstream in(data_dir() / "golden" / "golden.json");
    return nlohmann::json::parse(in);
}

/// A feature row with every covariate set to zero (female, business, no labels).
inline gradpred::FeatureRow zero_row(std::string id = "r") {
    gradpred::FeatureRow row;
    row.study_right_id = std::move(id);
    for (std::size_t i = 0; i < gradpred::kCovariateCount; ++i) row.values[i] = 0.0;
    row.set(gradpred::Column::field_business, 1.0);
    return row;
}

/// Logistic design over the six model covariates with graduates_in_4y as response.
inline gradpred::glm::DesignMatrix pm2_design(const gradpred::FeatureTable& t) {
    const auto covs = gradpred::model_covariates();
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(covs.size()) + 1);
    Eigen::VectorXd y(n);
    std::vector<std::string> names{"constant"};
    for (auto c : covs) names.emplace_back(gradpred::column_name(c));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = t.rows[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        for (std::size_t j = 0; j < covs.size(); ++j) x(i, static_cast<Eigen::Index>(j) + 1) = r.get(covs[j]).value();
        y(i) = r.get(gradpred::Column::graduates_in_4y).value();
    }
    return gradpred::glm::DesignMatrix(names, x, y);
}

}  // namespace testing_support
