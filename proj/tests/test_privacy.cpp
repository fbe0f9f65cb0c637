#include <thread>
#include <type_traits>

#include <gtest/gtest.h>

#include "gradpred/featurize.hpp"
#include "gradpred/privacy.hpp"
#include "test_support.hpp"

using namespace gradpred;

namespace {

std::string fixed_clock() { return "2018-06-01T12:00:00Z"; }

std::vector<std::string> lines_of(const std::filesystem::path& p) {
    std::istringstream in(testing_support::read_file(p));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

static_assert(!std::is_constructible_v<ApprovedColumns, std::vector<std::string>, int>,
              "only the gate may approve columns");
static_assert(!std::is_default_constructible_v<ApprovedColumns>);

TEST(Privacy, AllowedRequestIsAudited) {
    AuditLog log;
    PrivacyGate gate(PrivacyPolicy::default_policy(), log, fixed_clock);
    auto ok = gate.check_columns({"sum_of_cr", "gender_male", "sum_of_cr"}, "graduation_prediction");
    EXPECT_EQ(ok.columns(), (std::vector<std::string>{"sum_of_cr", "gender_male"}));
    EXPECT_EQ(ok.policy_version(), 1);
    ASSERT_EQ(log.size(), 1u);
    const auto e = log.entries()[0];
    EXPECT_EQ(e.decision, Decision::allowed);
    EXPECT_EQ(e.timestamp, "2018-06-01T12:00:00Z");
    EXPECT_EQ(e.operation, "extract");
    EXPECT_EQ(e.purpose, "graduation_prediction");
    EXPECT_TRUE(e.denied.empty());
}

TEST(Privacy, SensitiveColumnDeniesWholeRequest) {
    AuditLog log;
    PrivacyGate gate(PrivacyPolicy::default_policy(), log, fixed_clock);
    try {
        gate.check_columns({"sum_of_cr", "ethnicity", "health"}, "graduation_prediction");
        FAIL() << "expected denial";
    } catch (const PrivacyDenied& e) {
        EXPECT_EQ(e.columns(), (std::vector<std::string>{"ethnicity", "health"}));
        EXPECT_NE(std::string(e.what()).find("ethnicity"), std::string::npos);
    }
    ASSERT_EQ(log.size(), 1u);
    const auto e = log.entries()[0];
    EXPECT_EQ(e.decision, Decision::denied);
    EXPECT_EQ(e.requested, (std::vector<std::string>{"sum_of_cr", "ethnicity", "health"}));
    EXPECT_EQ(e.denied, (std::vector<std::string>{"ethnicity", "health"}));
}

TEST(Privacy, UnknownPurposeRejectedWithoutAudit) {
    AuditLog log;
    PrivacyGate gate(PrivacyPolicy::default_policy(), log, fixed_clock);
    EXPECT_THROW(gate.check_columns({"sum_of_cr"}, "marketing"), DataError);
    EXPECT_EQ(log.size(), 0u);
}

TEST(Privacy, EveryFeatureColumnPassesDefaultPolicy) {
    AuditLog log;
    PrivacyGate gate(PrivacyPolicy::default_policy(), log, fixed_clock);
    EXPECT_NO_THROW(gate.check_columns(all_column_names(), "enrollment_planning"));
}

TEST(Privacy, AuditFileIsNdjsonAppendOnly) {
    const auto dir = testing_support::scratch_dir("audit_file");
    const auto path = dir / "audit.ndjson";
    testing_support::write_file(path, "{\"earlier\":true}\n");
    {
        AuditLog log(path.string());
        PrivacyGate gate(PrivacyPolicy::default_policy(), log, fixed_clock);
        gate.check_columns({"sum_of_cr"}, "graduation_prediction");
        EXPECT_THROW(gate.check_columns({"religion"}, "graduation_prediction"), PrivacyDenied);
    }
    const auto lines = lines_of(path);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "{\"earlier\":true}");
    auto a = nlohmann::json::parse(lines[1]);
    auto b = nlohmann::json::parse(lines[2]);
    EXPECT_EQ(a["decision"], "allowed");
    EXPECT_EQ(b["decision"], "denied");
    EXPECT_EQ(b["denied_columns"], nlohmann::json::array({"religion"}));
    for (const char* k : {"timestamp", "operation", "purpose", "requested_columns", "decision", "denied_columns"})
        EXPECT_TRUE(b.contains(k)) << k;
}

TEST(Privacy, ConcurrentAppendsAllLand) {
    const auto path = testing_support::scratch_dir("audit_threads") / "audit.ndjson";
    AuditLog log(path.string());
    PrivacyGate gate(PrivacyPolicy::default_policy(), log);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i) gate.check_columns({"sum_of_cr"}, "graduation_prediction");
        });
    for (auto& th : threads) th.join();
    EXPECT_EQ(log.size(), 400u);
    const auto lines = lines_of(path);
    ASSERT_EQ(lines.size(), 400u);
    for (const auto& l : lines) EXPECT_TRUE(nlohmann::json::accept(l)) << l;
}

TEST(Privacy, DefaultTimestampIsUtcIso) {
    const auto ts = utc_now_iso();
    ASSERT_EQ(ts.size(), 20u);
    EXPECT_EQ(ts[4], '-');
    EXPECT_EQ(ts[10], 'T');
    EXPECT_EQ(ts.back(), 'Z');
}

TEST(Privacy, PolicyFromFile) {
    auto p = PrivacyPolicy::load((testing_support::source_dir() / "data" / "policy.default.json").string());
    auto d = PrivacyPolicy::default_policy();
    EXPECT_EQ(p.policy_version, d.policy_version);
    EXPECT_EQ(p.sensitive_columns, d.sensitive_columns);
    EXPECT_EQ(p.allowed_purposes, d.allowed_purposes);

    auto custom = PrivacyPolicy::from_json(nlohmann::json::parse(
        R"({"policy_version": 3, "sensitive_columns": ["gender_male"], "allowed_purposes": ["audit"]})"));
    AuditLog log;
    PrivacyGate gate(custom, log, fixed_clock);
    EXPECT_THROW(gate.check_columns({"gender_male"}, "audit"), PrivacyDenied);
    EXPECT_EQ(gate.check_columns({"sum_of_cr"}, "audit").policy_version(), 3);

    EXPECT_THROW(PrivacyPolicy::from_json(nlohmann::json::parse(R"({"policy_version": 1})")), DataError);
    EXPECT_THROW(PrivacyPolicy::load("/nonexistent/policy.json"), DataError);
}
