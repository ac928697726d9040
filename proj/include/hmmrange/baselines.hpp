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

/**
 * \file baselines.hpp
 * \brief Threshold delay estimators used as comparison points for the HMM.
 *
 * First threshold crossing (FTC) returns the first bin whose KL observation
 * exceeds a fixed gamma. The adaptive background-subtraction detector keeps
 * an exponentially smoothed background CIR per link and thresholds the
 * residual at t = 0.3 |s|_inf + 0.7 n, where n is the peak noise amplitude of
 * the current measurement.
 */

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "hmmrange/common.hpp"
#include "hmmrange/hmm.hpp"
#include "hmmrange/metrics.hpp"
#include "hmmrange/observation.hpp"

namespace hmmrange {

/// First 1-based bin with O_k > gamma.
inline std::optional<std::size_t> ftc_estimate(const ObservationVector &obs, double gamma) {
  require(gamma > 0.0, "threshold must be positive");
  for (std::size_t k = 0; k < obs.values.size(); ++k)
    if (obs.values[k] > gamma) return k + 1;
  return std::nullopt;
}

struct SweepResult {
  std::vector<double> gammas;
  std::vector<double> rmse_per_gamma;  // ns
  std::vector<std::size_t> fn_count;
  double best_gamma = 0.0;
  std::size_t best_index = 0;

  double best_rmse() const { return rmse_per_gamma.at(best_index); }
};

inline std::vector<EstimateRecord> ftc_records(const std::vector<LabeledObservation> &dataset,
                                               double gamma) {
  std::vector<EstimateRecord> records;
  records.reserve(dataset.size());
  for (const auto &d : dataset)
    records.push_back({d.obs.point, d.obs.link, d.k_star, ftc_estimate(d.obs, gamma)});
  return records;
}

/// `points` log-spaced thresholds between the 1st and 99th percentile of all O_k.
inline std::vector<double> default_gamma_grid(const std::vector<LabeledObservation> &dataset,
                                              std::size_t points = 100) {
  require(!dataset.empty(), "empty dataset");
  require(points >= 2, "gamma grid needs at least 2 points");
  std::vector<double> all;
  for (const auto &d : dataset)
    for (double v : d.obs.values) all.push_back(floored_observation(v));
  const double lo = std::log(percentile(all, 1.0));
  double hi = std::log(percentile(all, 99.0));
  if (hi <= lo) hi = lo + 1.0;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  return grid;
}

/// RMSE (ns) of FTC for every gamma; misses are charged n * T.
inline SweepResult ftc_sweep(const std::vector<LabeledObservation> &dataset,
                             const std::vector<double> &gamma_grid, double bin_width) {
  require(!dataset.empty(), "FTC sweep needs a nonempty dataset");
  require(!gamma_grid.empty(), "FTC sweep needs a nonempty gamma grid");
  const std::size_t n = dataset.front().obs.size();
  SweepResult r;
  r.gammas = gamma_grid;
  for (double g : gamma_grid) {
    const auto m = delay_metrics(ftc_records(dataset, g), bin_width, n);
    r.rmse_per_gamma.push_back(m.rmse_ns);
    r.fn_count.push_back(m.false_negatives);
  }
  for (std::size_t i = 1; i < r.rmse_per_gamma.size(); ++i)
    if (r.rmse_per_gamma[i] < r.rmse_per_gamma[r.best_index]) r.best_index = i;
  r.best_gamma = r.gammas[r.best_index];
  return r;
}

inline void write_sweep_csv(std::ostream &os, const SweepResult &r) {
  os << "gamma,rmse,fn_count\n";
  os.precision(10);
  for (std::size_t i = 0; i < r.gammas.size(); ++i)
    os << r.gammas[i] << ',' << r.rmse_per_gamma[i] << ',' << r.fn_count[i] << '\n';
}

/// Adaptive threshold t = (0.3 + 0.7 n / |s|_inf) |s|_inf = 0.3 |s|_inf + 0.7 n.
inline double zetik_threshold(double noise_peak, double s_inf) { return 0.3 * s_inf + 0.7 * noise_peak; }

struct ZetikOptions {
  double smoothing = 0.9;
  /// Noise-only bins at the start of each measurement; crossings are only
  /// searched after them and reported 1-based relative to the first
  /// post-noise bin.
  std::size_t lead_bins = 8;
};

using NoisePeakFn = std::function<double(const std::vector<double> &)>;

/// Peak absolute amplitude over the first `lead_bins` samples.
inline NoisePeakFn leading_noise_peak(std::size_t lead_bins) {
  return [lead_bins](const std::vector<double> &m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < std::min(lead_bins, m.size()); ++k) peak = std::max(peak, std::abs(m[k]));
    return peak;
  };
}

/// Per-measurement first crossing of |m - b| over the adaptive threshold.
///
/// The background starts at the first measurement, so the first entry never
/// detects.
inline std::vector<std::optional<std::size_t>> zetik_estimate(
    const std::vector<std::vector<double>> &stream, const ZetikOptions &options,
    const NoisePeakFn &noise_peak) {
  require(!stream.empty(), "background-subtraction detector needs a nonempty stream");
  std::vector<std::optional<std::size_t>> out;
  out.reserve(stream.size());
  std::vector<double> background = stream.front();
  for (const auto &m : stream) {
    require(m.size() == background.size(), "measurement length mismatch in stream");
    auto upd = zetik_background_update(background, m, options.smoothing);
    background = std::move(upd.background);
    double s_inf = 0.0;
    for (double s : upd.signal) s_inf = std::max(s_inf, std::abs(s));
    const double t = zetik_threshold(noise_peak(m), s_inf);
    std::optional<std::size_t> hit;
    for (std::size_t k = options.lead_bins; k < m.size(); ++k)
      if (std::abs(upd.signal[k]) > t) {
        hit = k - options.lead_bins + 1;
        break;
      }
    out.push_back(hit);
  }
  return out;
}

inline std::vector<std::optional<std::size_t>> zetik_estimate(
    const std::vector<std::vector<double>> &stream, const ZetikOptions &options = {}) {
  return zetik_estimate(stream, options, leading_noise_peak(options.lead_bins));
}

}  // namespace hmmrange
