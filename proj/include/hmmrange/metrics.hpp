// Copyright 2026, The hmmrange Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "hmmrange/common.hpp"

namespace hmmrange {

/// One delay estimate against its ground truth (bins are 1-based).
struct EstimateRecord {
  std::size_t point = 0;
  std::size_t link = 0;
  std::size_t truth = 1;
  std::optional<std::size_t> estimate;
};

struct DelayMetrics {
  double rmse_ns = 0.0;
  double bias_ns = 0.0;  // over detections only
  double fn_rate = 0.0;
  std::size_t count = 0;
  std::size_t false_negatives = 0;
  /// Per-record error in ns: signed T (k_hat - k*) for detections, n T for misses.
  std::vector<double> errors_ns;
};

/// Missed detections are charged the full window length n * T.
inline DelayMetrics delay_metrics(const std::vector<EstimateRecord> &records, double bin_width,
                                  std::size_t bin_count) {
  require(!records.empty(), "no estimates to score");
  const double T_ns = bin_width * 1e9;
  const double miss = static_cast<double>(bin_count) * T_ns;
  DelayMetrics m;
  m.count = records.size();
  double sq = 0.0;
  double bias = 0.0;
  std::size_t detected = 0;
  for (const auto &r : records) {
    double e;
    if (r.estimate) {
      e = T_ns * (static_cast<double>(*r.estimate) - static_cast<double>(r.truth));
      bias += e;
      ++detected;
    } else {
      e = miss;
      ++m.false_negatives;
    }
    m.errors_ns.push_back(e);
    sq += e * e;
  }
  m.rmse_ns = std::sqrt(sq / static_cast<double>(records.size()));
  m.bias_ns = detected ? bias / static_cast<double>(detected) : 0.0;
  m.fn_rate = static_cast<double>(m.false_negatives) / static_cast<double>(records.size());
  return m;
}

inline double rms(const std::vector<double> &v) {
  if (v.empty()) return 0.0;
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq / static_cast<double>(v.size()));
}

}  // namespace hmmrange
