// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/metrics.hpp"

#include <string>
#include <vector>

namespace toy {

/// A published classification table: per-class rows plus its summary lines.
struct PublishedTable {
    std::string name;
    std::vector<synthaug::ClassMetrics> rows;
    double accuracy;
    synthaug::AverageMetrics macro;
    synthaug::AverageMetrics weighted;
    std::size_t total;
};

inline std::vector<PublishedTable> published_tables() {
    return {
        {"sentiment",
         {{"negative", 0.688, 0.847, 0.759, 3972},
          {"neutral", 0.779, 0.598, 0.677, 5937},
          {"positive", 0.646, 0.769, 0.702, 2375}},
         0.712,
         {0.704, 0.738, 0.713},
         {0.724, 0.712, 0.708},
         12284},
        {"hate_speech",
         {{"NOT", 0.923, 0.993, 0.957, 288}, {"OFF", 0.895, 0.415, 0.567, 41}},
         0.921,
         {0.909, 0.704, 0.762},
         {0.919, 0.921, 0.908},
         329},
        {"ten_dim",
         {{"conflict", 0.509, 0.642, 0.568, 321},
          {"fun", 0.27, 0.730, 0.394, 37},
          {"knowledge", 0.349, 0.540, 0.424, 163},
          {"neutral", 0.445, 0.192, 0.274, 570},
          {"power", 0.056, 0.154, 0.081, 13},
          {"respect", 0.290, 0.155, 0.202, 129},
          {"similarity/identity", 0.292, 0.339, 0.314, 56},
          {"social support", 0.319, 0.527, 0.397, 169}},
         0.383,
         {0.308, 0.391, 0.321},
         {0.402, 0.383, 0.363},
         1497},
    };
}

}  // namespace toy
