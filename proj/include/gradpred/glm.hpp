#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "gradpred/errors.hpp"

namespace gradpred::glm {

enum class Family { linear, logistic };

enum class RSquaredKind { mcfadden_pseudo, coefficient_of_determination, unspecified };

inline std::string_view family_name(Family f) { return f == Family::linear ? "linear" : "logistic"; }

inline std::string_view r_squared_kind_name(RSquaredKind k) {
    switch (k) {
        case RSquaredKind::mcfadden_pseudo: return "mcfadden_pseudo";
        case RSquaredKind::coefficient_of_determination: return "coefficient_of_determination";
        case RSquaredKind::unspecified: return "unspecified";
    }
    return "unspecified";
}

inline constexpr std::string_view kConstant = "constant";

/// Named design matrix plus response. Column 0 is the all-ones "constant".
class DesignMatrix {
public:
    DesignMatrix(std::vector<std::string> columns, Eigen::MatrixXd values, Eigen::VectorXd response)
        : columns_(std::move(columns)), values_(std::move(values)), response_(std::move(response)) {
        if (columns_.empty() || columns_[0] != kConstant)
            throw DataError("design matrix must start with the 'constant' column");
        if (static_cast<Eigen::Index>(columns_.size()) != values_.cols())
            throw DataError("design matrix has " + std::to_string(values_.cols()) + " columns but " +
                            std::to_string(columns_.size()) + " names");
        if (values_.rows() != response_.size()) throw DataError("design matrix and response differ in length");
        if (values_.rows() < values_.cols())
            throw DataError("fewer rows (" + std::to_string(values_.rows()) + ") than columns (" +
                            std::to_string(values_.cols()) + ")");
        if (!values_.allFinite() || !response_.allFinite()) throw DataError("design matrix has non-finite entries");
        if ((values_.col(0).array() != 1.0).any()) throw DataError("'constant' column must be all ones");
        for (std::size_t i = 0; i < columns_.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (columns_[i] == columns_[j]) throw DataError("duplicate design column '" + columns_[i] + "'");
    }

    const std::vector<std::string>& columns() const { return columns_; }
    const Eigen::MatrixXd& values() const { return values_; }
    const Eigen::VectorXd& response() const { return response_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }

    DesignMatrix without(std::string_view column) const {
        auto it = std::find(columns_.begin(), columns_.end(), column);
        if (it == columns_.end()) throw DataError("no design column '" + std::string(column) + "'");
        if (it == columns_.begin()) throw DataError("the constant column cannot be removed");
        const auto idx = static_cast<Eigen::Index>(it - columns_.begin());
        std::vector<std::string> cols = columns_;
        cols.erase(cols.begin() + idx);
        Eigen::MatrixXd v(values_.rows(), values_.cols() - 1);
        v << values_.leftCols(idx), values_.rightCols(values_.cols() - idx - 1);
        return DesignMatrix(std::move(cols), std::move(v), response_);
    }

private:
    std::vector<std::string> columns_;
    Eigen::MatrixXd values_;
    Eigen::VectorXd response_;
};

struct FitResult {
    Family family = Family::linear;
    std::vector<std::string> terms;
    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    std::vector<double> p_values;
    std::optional<double> log_likelihood;
    std::optional<double> log_likelihood_null;
    double r_squared = 0.0;
    RSquaredKind r_squared_kind = RSquaredKind::coefficient_of_determination;
    std::size_t n = 0;
    bool converged = true;
    int iterations = 0;
    std::vector<std::string> dropped_terms;      // backward elimination, in drop order
    std::vector<double> log_likelihood_trace;     // logistic: one entry per accepted iterate, starting at zero

    std::optional<std::size_t> index_of(std::string_view term) const {
        for (std::size_t i = 0; i < terms.size(); ++i)
            if (terms[i] == term) return i;
        return std::nullopt;
    }
    double coefficient(std::string_view term) const {
        auto i = index_of(term);
        if (!i) throw DataError("no term '" + std::string(term) + "' in fit");
        return coefficients[*i];
    }
    double standard_error(std::string_view term) const {
        auto i = index_of(term);
        if (!i) throw DataError("no term '" + std::string(term) + "' in fit");
        return standard_errors[*i];
    }
    double p_value(std::string_view term) const {
        auto i = index_of(term);
        if (!i) throw DataError("no term '" + std::string(term) + "' in fit");
        return p_values[*i];
    }
};

namespace detail {

/// Throws RankDeficientError naming the first column that is (numerically)
/// a combination of the columns before it. Uses unpivoted Householder QR, so
/// |R_jj| is the norm of column j orthogonal to the earlier ones.
inline void check_rank(const DesignMatrix& d, const Eigen::HouseholderQR<Eigen::MatrixXd>& qr) {
    const auto& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        const double col_norm = d.values().col(j).norm();
        if (col_norm == 0.0 || std::abs(r(j, j)) <= 1e-10 * col_norm)
            throw RankDeficientError(d.columns()[static_cast<std::size_t>(j)]);
    }
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double logistic_log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll;
}

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace detail

/// 1 - lnL(model) / lnL(intercept only).
inline double mcfadden_r2(double log_likelihood_model, double log_likelihood_null) {
    if (log_likelihood_null == 0.0) throw DataError("null log-likelihood is zero (degenerate response)");
    if (log_likelihood_model > 0.0 || log_likelihood_null > 0.0)
        throw DataError("log-likelihoods of a binary model must be non-positive");
    return 1.0 - log_likelihood_model / log_likelihood_null;
}

/// Ordinary least squares through Householder QR.
inline FitResult fit_linear(const DesignMatrix& d) {
    const auto& x = d.values();
    const auto& y = d.response();
    const Eigen::Index n = d.rows();
    const Eigen::Index p = d.cols();

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    detail::check_rank(d, qr);

    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - x * beta;
    const double sse = resid.squaredNorm();
    const double sst = (y.array() - y.mean()).matrix().squaredNorm();

    FitResult fit;
    fit.family = Family::linear;
    fit.terms = d.columns();
    fit.n = static_cast<std::size_t>(n);
    fit.r_squared_kind = RSquaredKind::coefficient_of_determination;
    fit.r_squared = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : (sse == 0.0 ? 1.0 : 0.0);
    fit.coefficients.assign(beta.data(), beta.data() + p);

    // (X'X)^-1 = R^-1 R^-T, so its diagonal is the squared row norms of R^-1.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::Index df = n - p;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double sigma2 = df > 0 ? sse / static_cast<double>(df) : nan;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double se = std::sqrt(sigma2 * r_inv.row(j).squaredNorm());
        fit.standard_errors.push_back(se);
        if (df <= 0 || !(se > 0.0)) {
            fit.p_values.push_back(df <= 0 ? nan : (beta(j) == 0.0 ? 1.0 : 0.0));
            continue;
        }
        boost::math::students_t dist(static_cast<double>(df));
        fit.p_values.push_back(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(beta(j) / se))));
    }
    return fit;
}

struct LogisticOptions {
    int max_iter = 50;
    double tol = 1e-10;
    /// Any |coefficient| beyond this is treated as separation.
    double coefficient_bound = 1e3;
};

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares (Newton-Raphson) from all-zero coefficients, with step halving
/// whenever a full step would lower the log-likelihood.
inline FitResult fit_logistic(const DesignMatrix& d, const LogisticOptions& opts = {}) {
    const auto& x = d.values();
    const auto& y = d.response();
    const Eigen::Index n = d.rows();
    const Eigen::Index p = d.cols();

    std::size_t positives = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) throw DataError("logistic response must be 0 or 1");
        positives += y(i) == 1.0;
    }
    if (positives == 0 || positives == static_cast<std::size_t>(n))
        throw DataError("logistic response has a single class");

    detail::check_rank(d, Eigen::HouseholderQR<Eigen::MatrixXd>(x));

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    double ll = detail::logistic_log_likelihood(eta, y);

    FitResult fit;
    fit.family = Family::logistic;
    fit.terms = d.columns();
    fit.n = static_cast<std::size_t>(n);
    fit.converged = false;
    fit.log_likelihood_trace.push_back(ll);

    auto saturated = [&] { return eta.cwiseAbs().maxCoeff() > 30.0; };

    Eigen::VectorXd prob(n);
    Eigen::VectorXd weight(n);
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        fit.iterations = iter;
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = detail::sigmoid(eta(i));
            weight(i) = prob(i) * (1.0 - prob(i));
        }
        const Eigen::VectorXd score = x.transpose() * (y - prob);
        const Eigen::MatrixXd info = x.transpose() * weight.asDiagonal() * x;
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (llt.info() != Eigen::Success) {
            if (saturated()) throw SeparationError("information matrix became singular: fitted probabilities saturate");
            throw ConvergenceError("information matrix is not positive definite");
        }
        const Eigen::VectorXd delta = llt.solve(score);

        double step = 1.0;
        Eigen::VectorXd candidate = beta + delta;
        Eigen::VectorXd candidate_eta = x * candidate;
        double candidate_ll = detail::logistic_log_likelihood(candidate_eta, y);
        int halvings = 0;
        while (!(candidate_ll >= ll) && halvings < 40) {
            step *= 0.5;
            ++halvings;
            candidate = beta + step * delta;
            candidate_eta = x * candidate;
            candidate_ll = detail::logistic_log_likelihood(candidate_eta, y);
        }
        if (!(candidate_ll >= ll)) {
            // No ascent direction left at machine precision: we are at the optimum.
            fit.converged = true;
            break;
        }
        const double change = (candidate - beta).cwiseAbs().maxCoeff();
        beta = candidate;
        eta = candidate_eta;
        ll = candidate_ll;
        fit.log_likelihood_trace.push_back(ll);

        if (beta.cwiseAbs().maxCoeff() > opts.coefficient_bound)
            throw SeparationError("coefficient magnitude exceeded " + std::to_string(opts.coefficient_bound) +
                                  " (complete separation)");
        if (change < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) {
        if (saturated()) throw SeparationError("no convergence: fitted probabilities saturate (separation)");
        throw ConvergenceError("IRLS did not converge in " + std::to_string(opts.max_iter) + " iterations");
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        prob(i) = detail::sigmoid(eta(i));
        weight(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::MatrixXd info = x.transpose() * weight.asDiagonal() * x;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) throw SeparationError("information matrix singular at the estimate");
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));

    fit.coefficients.assign(beta.data(), beta.data() + p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double se = std::sqrt(cov(j, j));
        fit.standard_errors.push_back(se);
        fit.p_values.push_back(detail::normal_two_sided_p(beta(j) / se));
    }

    const double mean = static_cast<double>(positives) / static_cast<double>(n);
    const double ll_null = static_cast<double>(positives) * std::log(mean) +
                           static_cast<double>(static_cast<std::size_t>(n) - positives) * std::log1p(-mean);
    fit.log_likelihood = ll;
    fit.log_likelihood_null = ll_null;
    fit.r_squared_kind = RSquaredKind::mcfadden_pseudo;
    fit.r_squared = std::clamp(mcfadden_r2(std::min(ll, 0.0), ll_null), 0.0, 1.0);
    return fit;
}

inline FitResult fit(const DesignMatrix& d, Family family, const LogisticOptions& opts = {}) {
    return family == Family::linear ? fit_linear(d) : fit_logistic(d, opts);
}

namespace detail {

/// Index of the non-constant term (index >= 1) with the largest p-value at or
/// above alpha; the earliest index wins exact ties.
inline std::optional<std::size_t> term_to_drop(const std::vector<double>& p_values, double alpha) {
    std::optional<std::size_t> worst;
    for (std::size_t j = 1; j < p_values.size(); ++j)
        if (p_values[j] >= alpha && (!worst || p_values[j] > p_values[*worst])) worst = j;
    return worst;
}

}  // namespace detail

/// Refits and drops the non-constant term with the largest p-value >= alpha,
/// one term per round, until every remaining term is significant. Exact
/// p-value ties drop the term that comes first in column order.
inline FitResult backward_eliminate(DesignMatrix design, Family family, double alpha = 0.05,
                                    const LogisticOptions& opts = {}) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
    std::vector<std::string> dropped;
    while (true) {
        FitResult result = fit(design, family, opts);
        for (std::size_t j = 1; j < result.terms.size(); ++j)
            if (std::isnan(result.p_values[j]))
                throw NumericalError("p-value undefined for '" + result.terms[j] + "' (no residual degrees of freedom)");
        const auto worst = detail::term_to_drop(result.p_values, alpha);
        if (!worst) {
            result.dropped_terms = std::move(dropped);
            return result;
        }
        dropped.push_back(result.terms[*worst]);
        design = design.without(result.terms[*worst]);
    }
}

}  // namespace gradpred::glm
