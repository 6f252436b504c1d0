// SPDX-License-Identifier: Apache-2.0
#include "synthaug/metrics.hpp"

#include "synthaug/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) {
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

}  // namespace

ClassificationReport summarize_rows(std::vector<ClassMetrics> rows) {
    ClassificationReport report;
    report.rows = std::move(rows);
    if (report.rows.empty()) {
        return report;
    }
    double correct = 0.0;
    for (const auto &row : report.rows) {
        const auto s = static_cast<double>(row.support);
        report.macro.precision += row.precision;
        report.macro.recall += row.recall;
        report.macro.f1 += row.f1;
        report.weighted.precision += row.precision * s;
        report.weighted.recall += row.recall * s;
        report.weighted.f1 += row.f1 * s;
        report.total_support += row.support;
        correct += row.recall * s;
    }
    const auto k = static_cast<double>(report.rows.size());
    report.macro.precision /= k;
    report.macro.recall /= k;
    report.macro.f1 /= k;
    if (report.total_support > 0) {
        const auto n = static_cast<double>(report.total_support);
        report.weighted.precision /= n;
        report.weighted.recall /= n;
        report.weighted.f1 /= n;
        report.accuracy = correct / n;
    }
    return report;
}

ClassificationReport classification_report(std::span<const std::string> gold, std::span<const std::string> predicted,
                                           const TaskSchema *schema) {
    if (gold.size() != predicted.size()) {
        throw Error(ErrorKind::data, fmt::format("gold has {} labels but predictions have {}", gold.size(),
                                                 predicted.size()));
    }
    std::vector<std::string> classes;
    if (schema != nullptr) {
        for (const auto &g : gold) {
            if (!schema->contains(g)) {
                throw Error(ErrorKind::data,
                            fmt::format("gold label '{}' is not part of task '{}'", g, schema->task_id));
            }
        }
        const std::set<std::string> present(gold.begin(), gold.end());
        for (const auto &label : schema->labels) {
            if (present.contains(label)) {
                classes.push_back(label);
            }
        }
    } else {
        const std::set<std::string> present(gold.begin(), gold.end());
        classes.assign(present.begin(), present.end());
    }

    std::map<std::string, std::size_t> tp, predicted_count, support;
    std::size_t correct = 0;
    std::size_t invalid = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ++support[gold[i]];
        if (predicted[i] == kInvalidLabel) {
            ++invalid;
            continue;
        }
        ++predicted_count[predicted[i]];
        if (predicted[i] == gold[i]) {
            ++tp[gold[i]];
            ++correct;
        }
    }

    std::vector<ClassMetrics> rows;
    rows.reserve(classes.size());
    for (const auto &c : classes) {
        ClassMetrics row;
        row.label = c;
        row.support = support[c];
        row.precision = ratio(tp[c], predicted_count[c]);
        row.recall = ratio(tp[c], row.support);
        row.f1 = harmonic(row.precision, row.recall);
        rows.push_back(std::move(row));
    }
    ClassificationReport report = summarize_rows(std::move(rows));
    report.accuracy = ratio(correct, gold.size());
    report.invalid_count = invalid;
    return report;
}

double macro_f1(std::span<const std::string> gold, std::span<const std::string> predicted, const TaskSchema *schema) {
    return classification_report(gold, predicted, schema).macro.f1;
}

std::vector<ReportDiff> compare_reports(const ClassificationReport &a, const ClassificationReport &b,
                                        double tolerance) {
    const bool same_rows = a.rows.size() == b.rows.size() &&
                           std::equal(a.rows.begin(), a.rows.end(), b.rows.begin(),
                                      [](const ClassMetrics &x, const ClassMetrics &y) { return x.label == y.label; });
    if (!same_rows) {
        throw Error(ErrorKind::data, "reports cover different classes");
    }
    std::vector<ReportDiff> diffs;
    auto check = [&](const std::string &row, const char *metric, double x, double y) {
        if (std::abs(x - y) > tolerance) {
            diffs.push_back({row, metric, x, y});
        }
    };
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto &x = a.rows[i];
        const auto &y = b.rows[i];
        check(x.label, "precision", x.precision, y.precision);
        check(x.label, "recall", x.recall, y.recall);
        check(x.label, "f1", x.f1, y.f1);
        check(x.label, "support", static_cast<double>(x.support), static_cast<double>(y.support));
    }
    check("accuracy", "accuracy", a.accuracy, b.accuracy);
    check("macro avg", "precision", a.macro.precision, b.macro.precision);
    check("macro avg", "recall", a.macro.recall, b.macro.recall);
    check("macro avg", "f1", a.macro.f1, b.macro.f1);
    check("weighted avg", "precision", a.weighted.precision, b.weighted.precision);
    check("weighted avg", "recall", a.weighted.recall, b.weighted.recall);
    check("weighted avg", "f1", a.weighted.f1, b.weighted.f1);
    return diffs;
}

double round_half_up(double value, int digits) {
    const double scale = std::pow(10.0, digits);
    // the epsilon keeps values like 0.7125 (stored as 0.71249999...) rounding up
    return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

std::string render_text(const ClassificationReport &report) {
    std::size_t width = std::string_view("Weighted avg").size();
    for (const auto &row : report.rows) {
        width = std::max(width, row.label.size());
    }
    auto num = [](double v) { return fmt::format("{:.3f}", round_half_up(v)); };
    std::string out = fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", "Label", width, "Precision", "Recall", "F1",
                                  "Support");
    for (const auto &row : report.rows) {
        out += fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", row.label, width, num(row.precision),
                           num(row.recall), num(row.f1), row.support);
    }
    out += '\n';
    out += fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", "Accuracy", width, "", "", num(report.accuracy),
                       report.total_support);
    out += fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", "Macro avg", width, num(report.macro.precision),
                       num(report.macro.recall), num(report.macro.f1), report.total_support);
    out += fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", "Weighted avg", width,
                       num(report.weighted.precision), num(report.weighted.recall), num(report.weighted.f1),
                       report.total_support);
    if (report.invalid_count > 0) {
        out += fmt::format("\nInvalid predictions: {}\n", report.invalid_count);
    }
    return out;
}

std::string render_json(const ClassificationReport &report) {
    ordered_json j;
    j["rows"] = ordered_json::array();
    for (const auto &row : report.rows) {
        j["rows"].push_back({{"label", row.label},
                             {"precision", row.precision},
                             {"recall", row.recall},
                             {"f1", row.f1},
                             {"support", row.support}});
    }
    j["accuracy"] = report.accuracy;
    j["macro"] = {{"precision", report.macro.precision}, {"recall", report.macro.recall}, {"f1", report.macro.f1}};
    j["weighted"] = {
        {"precision", report.weighted.precision}, {"recall", report.weighted.recall}, {"f1", report.weighted.f1}};
    j["total_support"] = report.total_support;
    j["invalid_count"] = report.invalid_count;
    return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ClassificationReport report_from_json(std::string_view json_text) {
    try {
        const auto j = json::parse(json_text);
        ClassificationReport report;
        for (const auto &r : j.at("rows")) {
            report.rows.push_back({r.at("label").get<std::string>(), r.at("precision").get<double>(),
                                   r.at("recall").get<double>(), r.at("f1").get<double>(),
                                   r.at("support").get<std::size_t>()});
        }
        report.accuracy = j.at("accuracy").get<double>();
        for (auto [key, slot] : {std::pair{"macro", &report.macro}, std::pair{"weighted", &report.weighted}}) {
            slot->precision = j.at(key).at("precision").get<double>();
            slot->recall = j.at(key).at("recall").get<double>();
            slot->f1 = j.at(key).at("f1").get<double>();
        }
        report.total_support = j.at("total_support").get<std::size_t>();
        report.invalid_count = j.value("invalid_count", std::size_t{0});
        return report;
    } catch (const json::exception &e) {
        throw Error(ErrorKind::data, fmt::format("malformed report JSON: {}", e.what()));
    }
}

}  // namespace synthaug
