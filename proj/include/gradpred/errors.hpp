#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gradpred {

/// Bad input data: malformed files, broken keys, violated preconditions.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fit that could not produce an estimate.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RankDeficientError : public NumericalError {
public:
    RankDeficientError(std::string column)
        : NumericalError("design matrix is rank deficient at column '" + column + "'"),
          column_(std::move(column)) {}

    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Complete or quasi-complete separation in a logistic fit.
class SeparationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class PrivacyDenied : public std::runtime_error {
public:
    explicit PrivacyDenied(std::vector<std::string> columns)
        : std::runtime_error(message(columns)), columns_(std::move(columns)) {}

    const std::vector<std::string>& columns() const { return columns_; }

private:
    static std::string message(const std::vector<std::string>& columns) {
        std::string msg = "privacy policy denies sensitive column(s):";
        for (const auto& c : columns) msg += " " + c;
        return msg;
    }

    std::vector<std::string> columns_;
};

}  // namespace gradpred
