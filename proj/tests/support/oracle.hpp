// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/common.hpp"
#include "synthaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace toy {

/// Confusion-matrix reference for per-class metrics, written without the
/// library's counting code. Rows are the classes present in gold, sorted.
struct OracleReport {
    std::vector<std::string> labels;
    std::vector<double> precision, recall, f1;
    std::vector<std::size_t> support;
    double accuracy = 0.0;
    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    double weighted_p = 0.0, weighted_r = 0.0, weighted_f1 = 0.0;
};

inline OracleReport oracle_report(const std::vector<std::string> &gold, const std::vector<std::string> &pred) {
    std::map<std::string, std::map<std::string, std::size_t>> m;  // m[gold][pred]
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ++m[gold[i]][pred[i]];
    }
    OracleReport r;
    for (const auto &[g, row] : m) {
        r.labels.push_back(g);
    }
    const double n = static_cast<double>(gold.size());
    double correct = 0.0;
    for (const auto &c : r.labels) {
        double tp = 0.0, col = 0.0, row = 0.0;
        for (const auto &[g, cells] : m) {
            for (const auto &[p, count] : cells) {
                if (g == c) {
                    row += count;
                }
                if (p == c) {
                    col += count;
                }
                if (g == c && p == c) {
                    tp += count;
                }
            }
        }
        correct += tp;
        const double p = col > 0 ? tp / col : 0.0;
        const double rc = row > 0 ? tp / row : 0.0;
        const double f = (p + rc) > 0 ? 2 * p * rc / (p + rc) : 0.0;
        r.precision.push_back(p);
        r.recall.push_back(rc);
        r.f1.push_back(f);
        r.support.push_back(static_cast<std::size_t>(row));
    }
    const double k = static_cast<double>(r.labels.size());
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        r.macro_p += r.precision[i] / k;
        r.macro_r += r.recall[i] / k;
        r.macro_f1 += r.f1[i] / k;
        const double w = static_cast<double>(r.support[i]) / n;
        r.weighted_p += w * r.precision[i];
        r.weighted_r += w * r.recall[i];
        r.weighted_f1 += w * r.f1[i];
    }
    r.accuracy = n > 0 ? correct / n : 0.0;
    return r;
}

/// Largest absolute difference between a library report and the oracle.
/// Returns infinity when the row labels disagree.
inline double max_deviation(const synthaug::ClassificationReport &rep, const OracleReport &o) {
    if (rep.rows.size() != o.labels.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double worst = 0.0;
    auto see = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
    for (std::size_t i = 0; i < o.labels.size(); ++i) {
        if (rep.rows[i].label != o.labels[i] || rep.rows[i].support != o.support[i]) {
            return std::numeric_limits<double>::infinity();
        }
        see(rep.rows[i].precision, o.precision[i]);
        see(rep.rows[i].recall, o.recall[i]);
        see(rep.rows[i].f1, o.f1[i]);
    }
    see(rep.accuracy, o.accuracy);
    see(rep.macro.precision, o.macro_p);
    see(rep.macro.recall, o.macro_r);
    see(rep.macro.f1, o.macro_f1);
    see(rep.weighted.precision, o.weighted_p);
    see(rep.weighted.recall, o.weighted_r);
    see(rep.weighted.f1, o.weighted_f1);
    return worst;
}

/// Random (gold, predicted) instance over up to `max_classes` labels, with
/// occasional INVALID predictions and predicted labels absent from gold.
inline std::pair<std::vector<std::string>, std::vector<std::string>> random_instance(synthaug::Rng &rng,
                                                                                     std::size_t max_classes,
                                                                                     std::size_t max_size) {
    const std::size_t k = 2 + rng.below(max_classes - 1);
    const std::size_t n = 1 + rng.below(max_size);
    std::vector<std::string> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        gold[i] = "c" + std::to_string(rng.below(k));
        const double u = rng.unit();
        if (u < 0.4) {
            pred[i] = gold[i];
        } else if (u < 0.45) {
            pred[i] = std::string(synthaug::kInvalidLabel);
        } else {
            pred[i] = "c" + std::to_string(rng.below(k));
        }
    }
    return {gold, pred};
}

}  // namespace toy
