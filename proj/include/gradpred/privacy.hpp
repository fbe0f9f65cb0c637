#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradpred/errors.hpp"

namespace gradpred {

struct PrivacyPolicy {
    int policy_version = 1;
    std::set<std::string> sensitive_columns;
    std::set<std::string> allowed_purposes;

    /// GDPR special-category attributes; study-progress columns are not sensitive.
    static PrivacyPolicy default_policy() {
        return {1, {"ethnicity", "health", "religion", "political_opinion"},
                {"graduation_prediction", "enrollment_planning"}};
    }

    static PrivacyPolicy from_json(const nlohmann::json& j) {
        try {
            PrivacyPolicy p;
            p.policy_version = j.at("policy_version").get<int>();
            for (const auto& c : j.at("sensitive_columns")) p.sensitive_columns.insert(c.get<std::string>());
            for (const auto& c : j.at("allowed_purposes")) p.allowed_purposes.insert(c.get<std::string>());
            if (p.policy_version < 1) throw DataError("policy_version must be >= 1");
            return p;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed privacy policy: ") + e.what());
        }
    }

    static PrivacyPolicy load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open policy '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed privacy policy '" + path + "': " + e.what());
        }
        return from_json(j);
    }
};

enum class Decision { allowed, denied };

struct AuditEntry {
    std::string timestamp;
    std::string operation;
    std::string purpose;
    std::vector<std::string> requested;
    Decision decision = Decision::allowed;
    std::vector<std::string> denied;

    nlohmann::ordered_json to_json() const {
        return {{"timestamp", timestamp},   {"operation", operation},
                {"purpose", purpose},       {"requested_columns", requested},
                {"decision", decision == Decision::allowed ? "allowed" : "denied"},
                {"denied_columns", denied}};
    }
};

inline std::string utc_now_iso() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Append-only audit trail. Entries are kept in memory and, when a path is
/// given, appended to it as newline-delimited JSON as they happen.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(std::string path) : path_(std::move(path)) {}

    void append(AuditEntry entry) {
        std::lock_guard lock(mu_);
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app | std::ios::binary);
            if (!out) throw DataError("cannot append to audit log '" + path_ + "'");
            out << entry.to_json().dump() << '\n';
        }
        entries_.push_back(std::move(entry));
    }

    std::vector<AuditEntry> entries() const {
        std::lock_guard lock(mu_);
        return entries_;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

private:
    std::string path_;
    mutable std::mutex mu_;
    std::vector<AuditEntry> entries_;
};

class PrivacyGate;

/// Proof that a column request passed the privacy gate. Only PrivacyGate
/// can mint one, and feature extraction requires it.
class ApprovedColumns {
public:
    const std::vector<std::string>& columns() const { return columns_; }
    int policy_version() const { return policy_version_; }

private:
    friend class PrivacyGate;
    ApprovedColumns(std::vector<std::string> cols, int version) : columns_(std::move(cols)), policy_version_(version) {}

    std::vector<std::string> columns_;
    int policy_version_;
};

class PrivacyGate {
public:
    PrivacyGate(PrivacyPolicy policy, AuditLog& log, std::function<std::string()> clock = utc_now_iso)
        : policy_(std::move(policy)), log_(&log), clock_(std::move(clock)) {}

    const PrivacyPolicy& policy() const { return policy_; }

    /// Approves the whole request or denies the whole request. Each call
    /// appends exactly one audit entry. Unknown purposes are rejected before
    /// any check takes place.
    ApprovedColumns check_columns(const std::vector<std::string>& requested, const std::string& purpose,
                                  const std::string& operation = "extract") const {
        if (!policy_.allowed_purposes.contains(purpose))
            throw DataError("purpose '" + purpose + "' is not allowed by privacy policy v" +
                            std::to_string(policy_.policy_version));
        std::vector<std::string> unique;
        for (const auto& c : requested)
            if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);

        std::vector<std::string> denied;
        for (const auto& c : unique)
            if (policy_.sensitive_columns.contains(c)) denied.push_back(c);

        AuditEntry entry{clock_(), operation, purpose, unique,
                         denied.empty() ? Decision::allowed : Decision::denied, denied};
        log_->append(std::move(entry));
        if (!denied.empty()) throw PrivacyDenied(std::move(denied));
        return ApprovedColumns(std::move(unique), policy_.policy_version);
    }

private:
    PrivacyPolicy policy_;
    AuditLog* log_;
    std::function<std::string()> clock_;
};

}  // namespace gradpred
