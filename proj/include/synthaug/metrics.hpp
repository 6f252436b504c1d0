// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/corpus.hpp"

#include <span>
#include <string>
#include <vector>

namespace synthaug {

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ClassificationReport {
    std::vector<ClassMetrics> rows;  ///< classes present in gold, schema order
    double accuracy = 0.0;
    AverageMetrics macro;
    AverageMetrics weighted;
    std::size_t total_support = 0;
    std::size_t invalid_count = 0;  ///< predictions equal to kInvalidLabel
};

/// Per-class precision/recall/F1 with zero for empty denominators. Rows cover
/// the classes that occur in gold (schema order when a schema is given, else
/// lexicographic). A prediction outside the rows, kInvalidLabel included, is a
/// false negative for its gold class and a false positive for no row.
[[nodiscard]] ClassificationReport classification_report(std::span<const std::string> gold,
                                                         std::span<const std::string> predicted,
                                                         const TaskSchema *schema = nullptr);

[[nodiscard]] double macro_f1(std::span<const std::string> gold, std::span<const std::string> predicted,
                              const TaskSchema *schema = nullptr);

/// Averages and accuracy recomputed from per-class rows alone: macro is the
/// unweighted row mean, weighted uses supports, accuracy = Σ recall·support / Σ support.
[[nodiscard]] ClassificationReport summarize_rows(std::vector<ClassMetrics> rows);

struct ReportDiff {
    std::string row;     ///< class label, "accuracy", "macro avg" or "weighted avg"
    std::string metric;  ///< precision, recall, f1, support or accuracy
    double a = 0.0;
    double b = 0.0;
};

/// Every cell where |a - b| > tolerance. Reports over different class rows are an Error(data).
[[nodiscard]] std::vector<ReportDiff> compare_reports(const ClassificationReport &a, const ClassificationReport &b,
                                                      double tolerance);

/// Half-up rounding to `digits` decimals, applied only when rendering.
[[nodiscard]] double round_half_up(double value, int digits = 3);

/// Plain-text table: one row per class, then accuracy, macro and weighted averages.
[[nodiscard]] std::string render_text(const ClassificationReport &report);
[[nodiscard]] std::string render_json(const ClassificationReport &report);
[[nodiscard]] ClassificationReport report_from_json(std::string_view json_text);

}  // namespace synthaug
