#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gradpred/errors.hpp"
#include "gradpred/numfmt.hpp"

namespace gradpred::metrics {

struct BandReport {
    std::vector<std::pair<int, double>> bands;  // (width in semesters, percent), ascending width
    std::size_t n = 0;

    double percentage(int width) const {
        for (const auto& [w, pct] : bands)
            if (w == width) return pct;
        throw DataError("no band of width " + std::to_string(width));
    }
};

inline std::string band_name(int width) {
    return width == 0 ? "same_semester" : "within_" + std::to_string(width);
}

/// Share (percent) of predictions that, rounded half away from zero to whole
/// semesters, lie within each band width of the actual value.
inline BandReport precision_bands(std::span<const double> predicted, std::span<const int> actual,
                                  std::vector<int> widths) {
    if (predicted.size() != actual.size())
        throw DataError("predicted and actual differ in length (" + std::to_string(predicted.size()) + " vs " +
                        std::to_string(actual.size()) + ")");
    if (predicted.empty()) throw DataError("precision bands need at least one prediction");
    if (widths.empty()) throw DataError("no bands requested");
    std::sort(widths.begin(), widths.end());
    widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
    if (widths.front() < 0) throw DataError("band widths must be non-negative");

    std::vector<std::size_t> hits(widths.size(), 0);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!std::isfinite(predicted[i])) throw DataError("non-finite prediction");
        const double err = std::abs(std::round(predicted[i]) - static_cast<double>(actual[i]));
        // widths ascending: first band that contains the error and all wider ones count
        auto it = std::lower_bound(widths.begin(), widths.end(), err,
                                   [](int w, double e) { return static_cast<double>(w) < e; });
        for (auto k = static_cast<std::size_t>(it - widths.begin()); k < widths.size(); ++k) ++hits[k];
    }
    BandReport report;
    report.n = predicted.size();
    for (std::size_t k = 0; k < widths.size(); ++k)
        report.bands.emplace_back(widths[k], 100.0 * static_cast<double>(hits[k]) / static_cast<double>(report.n));
    return report;
}

inline void write_bands_csv(std::ostream& out, const BandReport& r) {
    out << "band,percentage\n";
    for (const auto& [w, pct] : r.bands) out << band_name(w) << ',' << format_double(pct) << '\n';
}

inline void write_bands_text(std::ostream& out, const BandReport& r) {
    out << "Precision of time-to-degree predictions (n = " << r.n << ")\n";
    for (const auto& [w, pct] : r.bands) {
        char buf[64];
        if (w == 0) std::snprintf(buf, sizeof buf, "  same semester      %6.1f %%\n", pct);
        else std::snprintf(buf, sizeof buf, "  +/- %-3d semesters  %6.1f %%\n", w, pct);
        out << buf;
    }
}

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;

    std::size_t n() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Predicts positive iff p >= threshold.
inline ConfusionCounts confusion_counts(std::span<const double> probabilities, std::span<const int> labels,
                                        double threshold) {
    if (probabilities.size() != labels.size())
        throw DataError("probabilities and labels differ in length");
    ConfusionCounts c;
    c.threshold = threshold;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("probability outside [0, 1]");
        if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
        const bool pos = p >= threshold;
        if (pos && labels[i] == 1) ++c.tp;
        else if (pos) ++c.fp;
        else if (labels[i] == 1) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline void write_confusion_csv(std::ostream& out, const ConfusionCounts& c) {
    out << "cell,count\n";
    out << "tp," << c.tp << "\nfp," << c.fp << "\ntn," << c.tn << "\nfn," << c.fn << '\n';
}

}  // namespace gradpred::metrics
