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
 * \file observation.hpp
 * \brief Range-bin statistics and the per-bin symmetric KL observation.
 *
 * Calibration (empty room) and test captures of the bin energies r_k are
 * summarized by their per-bin mean and variance; each bin is then modelled as
 * Gaussian and the two summaries are compared with
 *
 *   O_k = 1/2 (vp/vq + vq/vp + (mp - mq)^2 (vp + vq) / (vp vq)) - 1,
 *
 * which is zero for identical moments.
 */

#pragma once

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmmrange/cir_sim.hpp"
#include "hmmrange/common.hpp"

namespace hmmrange {

enum class Condition { calibration, test };

/// Repeated captures (realization x bin) of one link under one condition.
struct SampleSet {
  std::vector<std::vector<double>> samples;
  Condition condition = Condition::calibration;
  std::size_t link = 0;

  std::size_t realizations() const { return samples.size(); }
  std::size_t bins() const { return samples.empty() ? 0 : samples.front().size(); }

  void validate() const {
    require(samples.size() >= 2, "sample set needs at least 2 realizations");
    const std::size_t n = bins();
    require(n > 0, "sample set has no bins");
    for (const auto &row : samples) {
      require(row.size() == n, "ragged sample set");
      for (double v : row) require(std::isfinite(v) && v >= 0.0, "sample energies must be finite and >= 0");
    }
  }

  static SampleSet from_traces(const std::vector<CirTrace> &traces, Condition condition,
                               std::size_t link) {
    SampleSet s;
    s.condition = condition;
    s.link = link;
    s.samples.reserve(traces.size());
    for (const auto &t : traces) s.samples.push_back(t.energies);
    return s;
  }

  /// Rows [first, first + count) as a new set.
  SampleSet slice(std::size_t first, std::size_t count) const {
    require(first + count <= samples.size(), "slice exceeds sample set");
    SampleSet s;
    s.condition = condition;
    s.link = link;
    s.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(first),
                     samples.begin() + static_cast<std::ptrdiff_t>(first + count));
    return s;
  }
};

struct BinStats {
  std::vector<double> mu;
  std::vector<double> sigma2;
};

struct ObservationVector {
  std::vector<double> values;  // O_1 .. O_n
  std::size_t link = 0;
  std::size_t point = 0;

  std::size_t size() const { return values.size(); }
};

/// Values below this are raised before taking logarithms.
inline constexpr double kObservationFloor = 1e-12;

inline double floored_observation(double o) { return std::max(o, kObservationFloor); }

/// 1e-12 times the squared global mean energy of the set.
inline double variance_floor(const SampleSet &set) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto &row : set.samples) {
    for (double v : row) total += v;
    count += row.size();
  }
  const double gm = count ? total / static_cast<double>(count) : 0.0;
  return gm > 0.0 ? 1e-12 * gm * gm : 1e-12;
}

inline BinStats bin_stats(const SampleSet &set) {
  set.validate();
  const std::size_t n = set.bins();
  const double floor = variance_floor(set);
  BinStats s;
  s.mu.resize(n);
  s.sigma2.resize(n);
  std::vector<double> column(set.realizations());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t r = 0; r < column.size(); ++r) column[r] = set.samples[r][k];
    s.mu[k] = mean(column);
    s.sigma2[k] = std::max(sample_variance(column), floor);
  }
  return s;
}

/// Closed-form symmetric Gaussian KL for one bin.
inline double symmetric_kl(double mu_p, double var_p, double mu_q, double var_q) {
  const double d = mu_p - mu_q;
  const double o = 0.5 * (var_p / var_q + var_q / var_p + d * d * (var_p + var_q) / (var_p * var_q)) - 1.0;
  return std::max(o, 0.0);
}

inline ObservationVector symmetric_kl(const BinStats &p, const BinStats &q) {
  require(p.mu.size() == q.mu.size() && p.sigma2.size() == q.sigma2.size() &&
              p.mu.size() == p.sigma2.size(),
          "bin statistics length mismatch");
  ObservationVector out;
  out.values.resize(p.mu.size());
  for (std::size_t k = 0; k < p.mu.size(); ++k) {
    require(p.sigma2[k] > 0.0 && q.sigma2[k] > 0.0, "variances must be positive");
    out.values[k] = symmetric_kl(p.mu[k], p.sigma2[k], q.mu[k], q.sigma2[k]);
  }
  return out;
}

/// Observation vector for a calibration/test pair.
inline ObservationVector observe(const SampleSet &calibration, const SampleSet &test,
                                 std::size_t point = 0) {
  auto o = symmetric_kl(bin_stats(calibration), bin_stats(test));
  o.link = test.link;
  o.point = point;
  return o;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t sample_count = 0;
};

/// Kolmogorov distribution survival function Q(lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample KS test of per-bin standardized samples against N(0, 1).
///
/// Every bin of every set is shifted and scaled by its own sample mean and
/// sample standard deviation, and all standardized values are pooled. A bin
/// with zero spread cannot be standardized and is an error.
inline KsResult ks_normality_stat(const std::vector<SampleSet> &sets) {
  require(!sets.empty(), "KS normality test needs at least one sample set");
  std::vector<double> pooled;
  std::vector<double> column;
  for (const auto &set : sets) {
    set.validate();
    column.resize(set.realizations());
    for (std::size_t k = 0; k < set.bins(); ++k) {
      for (std::size_t r = 0; r < column.size(); ++r) column[r] = set.samples[r][k];
      const double m = mean(column);
      const double sd = std::sqrt(sample_variance(column));
      require(sd > 0.0, "bin with zero variance cannot be normalized");
      for (double v : column) pooled.push_back((v - m) / sd);
    }
  }
  std::sort(pooled.begin(), pooled.end());
  const double n = static_cast<double>(pooled.size());
  double d = 0.0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double f = standard_normal_cdf(pooled[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sqrt_n = std::sqrt(n);
  KsResult out;
  out.statistic = d;
  out.sample_count = pooled.size();
  out.p_value = kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
  return out;
}

struct BackgroundUpdate {
  std::vector<double> background;  // b^i
  std::vector<double> signal;      // s^i = m^i - b^i
};

/// Exponentially smoothed background b = a b_prev + (1 - a) m and residual s = m - b.
inline BackgroundUpdate zetik_background_update(const std::vector<double> &b_prev,
                                                const std::vector<double> &m, double smoothing) {
  require(smoothing > 0.0 && smoothing < 1.0, "background smoothing must lie in (0, 1)");
  require(b_prev.size() == m.size(), "background and measurement length mismatch");
  BackgroundUpdate u;
  u.background.resize(m.size());
  u.signal.resize(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    u.background[k] = smoothing * b_prev[k] + (1.0 - smoothing) * m[k];
    u.signal[k] = m[k] - u.background[k];
  }
  return u;
}

/// CSV with columns point,link,bin,value (bins 1-based).
inline void write_observations_csv(std::ostream &os, const std::vector<ObservationVector> &obs) {
  os << "point,link,bin,value\n";
  os.precision(17);
  for (const auto &o : obs)
    for (std::size_t k = 0; k < o.values.size(); ++k)
      os << o.point << ',' << o.link << ',' << (k + 1) << ',' << o.values[k] << '\n';
}

/// Parses the format written by write_observations_csv. Vectors are returned
/// ordered by (point, link); bins must be contiguous from 1.
inline std::vector<ObservationVector> read_observations_csv(std::istream &is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty observation CSV");
  require(line.rfind("point,link,bin,value", 0) == 0, "observation CSV header must be point,link,bin,value");
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto &field : f) require(static_cast<bool>(std::getline(ss, field, ',')), "malformed observation CSV line " + std::to_string(line_no));
    try {
      const auto point = static_cast<std::size_t>(std::stoull(f[0]));
      const auto link = static_cast<std::size_t>(std::stoull(f[1]));
      const auto bin = static_cast<std::size_t>(std::stoull(f[2]));
      const double value = std::stod(f[3]);
      require(bin >= 1, "bins are 1-based");
      require(std::isfinite(value) && value >= 0.0, "observations must be finite and >= 0");
      rows[{point, link}].emplace_back(bin, value);
    } catch (const std::logic_error &) {
      throw Error("malformed number in observation CSV line " + std::to_string(line_no));
    }
  }
  std::vector<ObservationVector> out;
  for (auto &[key, entries] : rows) {
    std::sort(entries.begin(), entries.end());
    ObservationVector o;
    o.point = key.first;
    o.link = key.second;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      require(entries[i].first == i + 1, "observation bins must be contiguous from 1");
      o.values.push_back(entries[i].second);
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace hmmrange
