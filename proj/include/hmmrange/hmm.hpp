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
 * \file hmm.hpp
 * \brief Two-state change HMM over KL observation vectors.
 *
 * State 0 means the bin is unaffected by the person, state 1 that it is
 * affected. Range bins play the role of time. Each state emits O_k from a
 * log-normal density. Inference is exact forward-backward smoothing carried
 * out in the log domain; the delay estimate is the first bin whose state-1
 * posterior exceeds one half.
 *
 * Parameter refinement alternates forward-backward with
 *   - expected-count re-estimation of the initial and transition
 *     probabilities over all sequences, with P(1 -> 0) floored at an escape
 *     probability, and
 *   - maximum-likelihood log-normal refits of each emission on the hard
 *     partition {O_k : argmax posterior at k == i}.
 * The hard refit is not an exact EM step, so the likelihood is not
 * guaranteed to be monotone.
 *
 * An observation at the floor (identical calibration and test moments) has
 * zero density under state 1.
 */

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hmmrange/common.hpp"
#include "hmmrange/observation.hpp"

namespace hmmrange {

inline constexpr double kScaleFloor = 1e-6;
inline constexpr double kDefaultEscape = 1e-3;

/// Log-normal density on O, parameterized on ln O.
struct LogNormal {
  double location = 0.0;  // mean of ln O
  double scale = 1.0;     // std of ln O

  double log_pdf(double o) const {
    const double lo = std::log(o);
    const double z = (lo - location) / scale;
    return -lo - std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
  }

  /// ML fit on positive samples; scale floored at kScaleFloor.
  static LogNormal fit(std::span<const double> values) {
    require(!values.empty(), "cannot fit a log-normal to an empty partition");
    double sum = 0.0;
    for (double v : values) sum += std::log(floored_observation(v));
    const double m = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
      const double d = std::log(floored_observation(v)) - m;
      ss += d * d;
    }
    return {m, std::max(std::sqrt(ss / static_cast<double>(values.size())), kScaleFloor)};
  }

  /// Weighted ML fit; weights are nonnegative with a positive sum.
  static LogNormal fit_weighted(std::span<const double> values, std::span<const double> weights) {
    require(values.size() == weights.size(), "value and weight counts differ");
    double w = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      w += weights[i];
      sum += weights[i] * std::log(floored_observation(values[i]));
    }
    require(w > 0.0, "cannot fit a log-normal with zero total weight");
    const double m = sum / w;
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = std::log(floored_observation(values[i])) - m;
      ss += weights[i] * d * d;
    }
    return {m, std::max(std::sqrt(ss / w), kScaleFloor)};
  }
};

struct HmmParams {
  std::array<double, 2> pi{1.0, 0.0};
  /// trans[i][j] = P(X_{k+1} = j | X_k = i).
  std::array<std::array<double, 2>, 2> trans{{{0.9, 0.1}, {kDefaultEscape, 1.0 - kDefaultEscape}}};
  std::array<LogNormal, 2> emit{};
  double epsilon_escape = kDefaultEscape;

  void validate() const {
    auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
    require(prob(pi[0]) && prob(pi[1]) && std::abs(pi[0] + pi[1] - 1.0) < 1e-9,
            "initial distribution must be a probability vector");
    for (const auto &row : trans)
      require(prob(row[0]) && prob(row[1]) && std::abs(row[0] + row[1] - 1.0) < 1e-12,
              "transition rows must be probability vectors");
    require(epsilon_escape > 0.0 && epsilon_escape < 1.0, "escape probability must lie in (0, 1)");
    for (const auto &e : emit)
      require(std::isfinite(e.location) && std::isfinite(e.scale) && e.scale > 0.0,
              "emission parameters must be finite with positive scale");
  }
};

struct PosteriorTrack {
  std::vector<double> alpha;  // P(X_k = 1 | O), index 0 is bin 1
  std::optional<std::size_t> k_star_hat;
  bool detected = false;
  double loglik = 0.0;
  std::size_t link = 0;
  std::size_t point = 0;
};

/// First 1-based bin with alpha_k > 0.5.
inline std::optional<std::size_t> estimate_k_star(const PosteriorTrack &track) {
  for (std::size_t k = 0; k < track.alpha.size(); ++k)
    if (track.alpha[k] > 0.5) return k + 1;
  return std::nullopt;
}

struct LabeledObservation {
  ObservationVector obs;
  std::size_t k_star = 1;  // 1-based
};

struct TrainingPartition {
  std::vector<double> d0;
  std::vector<double> d1;
};

inline TrainingPartition partition_by_truth(const std::vector<LabeledObservation> &train) {
  TrainingPartition part;
  for (const auto &t : train) {
    const std::size_t n = t.obs.size();
    require(t.k_star >= 1 && t.k_star <= n, "training k* outside [1, n]");
    for (std::size_t k = 0; k < n; ++k) (k + 1 < t.k_star ? part.d0 : part.d1).push_back(t.obs.values[k]);
  }
  return part;
}

/// Initial parameters from labeled vectors (state 0 before k*, state 1 from k* on).
inline HmmParams init_params(const std::vector<LabeledObservation> &train,
                             double epsilon_escape = kDefaultEscape) {
  require(!train.empty(), "no training vectors");
  require(epsilon_escape > 0.0 && epsilon_escape < 1.0, "escape probability must lie in (0, 1)");
  const TrainingPartition part = partition_by_truth(train);
  require(!part.d0.empty(), "state-0 training partition is empty (every k* is 1)");
  require(!part.d1.empty(), "state-1 training partition is empty");

  std::size_t start_in_1 = 0;
  double departures_from_0 = 0.0;
  double zero_to_one = 0.0;
  for (const auto &t : train) {
    if (t.k_star == 1) ++start_in_1;
    departures_from_0 += static_cast<double>(t.k_star - 1);
    if (t.k_star >= 2) zero_to_one += 1.0;
  }
  HmmParams p;
  p.epsilon_escape = epsilon_escape;
  p.pi[1] = static_cast<double>(start_in_1) / static_cast<double>(train.size());
  p.pi[0] = 1.0 - p.pi[1];
  const double p01 = zero_to_one / departures_from_0;
  p.trans[0] = {1.0 - p01, p01};
  p.trans[1] = {epsilon_escape, 1.0 - epsilon_escape};
  p.emit[0] = LogNormal::fit(part.d0);
  p.emit[1] = LogNormal::fit(part.d1);
  return p;
}

namespace detail {

inline double safe_log(double p) {
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

/// Forward-backward in the log domain. Fills posteriors for both states and,
/// if requested, expected transition counts summed over k.
struct FbResult {
  std::vector<std::array<double, 2>> gamma;
  std::array<std::array<double, 2>, 2> xi_sum{};
  double loglik = 0.0;
};

inline FbResult forward_backward_full(std::span<const double> obs, const HmmParams &params,
                                      bool want_xi) {
  const std::size_t n = obs.size();
  require(n > 0, "empty observation vector");
  std::vector<std::array<double, 2>> logb(n);
  for (std::size_t k = 0; k < n; ++k) {
    require(std::isfinite(obs[k]) && obs[k] > 0.0, "observations must be strictly positive");
    logb[k] = {params.emit[0].log_pdf(obs[k]),
               obs[k] <= kObservationFloor ? -std::numeric_limits<double>::infinity()
                                           : params.emit[1].log_pdf(obs[k])};
  }
  const double lpi[2] = {safe_log(params.pi[0]), safe_log(params.pi[1])};
  double lp[2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) lp[i][j] = safe_log(params.trans[i][j]);

  std::vector<std::array<double, 2>> fwd(n), bwd(n);
  for (int i = 0; i < 2; ++i) fwd[0][i] = lpi[i] + logb[0][i];
  for (std::size_t k = 1; k < n; ++k)
    for (int j = 0; j < 2; ++j)
      fwd[k][j] = log_add(fwd[k - 1][0] + lp[0][j], fwd[k - 1][1] + lp[1][j]) + logb[k][j];
  bwd[n - 1] = {0.0, 0.0};
  for (std::size_t k = n - 1; k-- > 0;)
    for (int i = 0; i < 2; ++i)
      bwd[k][i] = log_add(lp[i][0] + logb[k + 1][0] + bwd[k + 1][0],
                          lp[i][1] + logb[k + 1][1] + bwd[k + 1][1]);

  FbResult r;
  r.loglik = log_add(fwd[n - 1][0], fwd[n - 1][1]);
  require(std::isfinite(r.loglik), "observation sequence has zero likelihood under the parameters");
  r.gamma.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = fwd[k][0] + bwd[k][0];
    const double b = fwd[k][1] + bwd[k][1];
    const double norm = log_add(a, b);
    const double g1 = std::clamp(std::exp(b - norm), 0.0, 1.0);
    r.gamma[k] = {1.0 - g1, g1};
  }
  if (want_xi) {
    for (std::size_t k = 0; k + 1 < n; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          r.xi_sum[i][j] += std::exp(fwd[k][i] + lp[i][j] + logb[k + 1][j] + bwd[k + 1][j] - r.loglik);
  }
  return r;
}

inline std::vector<double> floored(std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = floored_observation(values[k]);
  return out;
}

}  // namespace detail

/// Smoothed state-1 posteriors and the delay estimate for one vector.
///
/// Values are expected to be already floored at kObservationFloor; zero or
/// negative values are rejected.
inline PosteriorTrack forward_backward(const ObservationVector &obs, const HmmParams &params) {
  params.validate();
  const auto r = detail::forward_backward_full(obs.values, params, false);
  PosteriorTrack t;
  t.link = obs.link;
  t.point = obs.point;
  t.loglik = r.loglik;
  t.alpha.resize(r.gamma.size());
  for (std::size_t k = 0; k < r.gamma.size(); ++k) t.alpha[k] = r.gamma[k][1];
  t.k_star_hat = estimate_k_star(t);
  t.detected = t.k_star_hat.has_value();
  return t;
}

/// Floors the observation values and runs forward_backward.
inline PosteriorTrack infer(const ObservationVector &obs, const HmmParams &params) {
  ObservationVector f = obs;
  f.values = detail::floored(obs.values);
  return forward_backward(f, params);
}

/// hard: fit each state on the samples whose posterior argmax is that state.
/// soft: posterior-weighted fit over all samples.
enum class EmissionRefit { hard, soft };

struct BaumWelchOptions {
  std::size_t max_iters = 15;
  double tol = 1e-4;
  EmissionRefit refit = EmissionRefit::hard;
};

struct BaumWelchResult {
  HmmParams params;
  /// Total log-likelihood of params0 followed by one entry per completed update.
  std::vector<double> loglik;
  std::size_t iterations = 0;
  bool converged = false;
  /// Posterior tracks under the returned parameters.
  std::vector<PosteriorTrack> tracks;
};

/// Called after every completed update with (iteration, params, tracks).
using BaumWelchObserver =
    std::function<void(std::size_t, const HmmParams &, const std::vector<PosteriorTrack> &)>;

inline BaumWelchResult baum_welch(const std::vector<ObservationVector> &obs_set,
                                  const HmmParams &params0, BaumWelchOptions options = {},
                                  const BaumWelchObserver &observer = {}) {
  require(!obs_set.empty(), "Baum-Welch needs at least one observation vector");
  params0.validate();
  std::vector<std::vector<double>> data;
  data.reserve(obs_set.size());
  for (const auto &o : obs_set) data.push_back(detail::floored(o.values));

  auto e_step = [&](const HmmParams &p, std::vector<detail::FbResult> &out) {
    out.clear();
    double total = 0.0;
    for (const auto &d : data) {
      out.push_back(detail::forward_backward_full(d, p, true));
      total += out.back().loglik;
    }
    return total;
  };
  auto to_tracks = [&](const std::vector<detail::FbResult> &fb) {
    std::vector<PosteriorTrack> tracks(fb.size());
    for (std::size_t s = 0; s < fb.size(); ++s) {
      auto &t = tracks[s];
      t.link = obs_set[s].link;
      t.point = obs_set[s].point;
      t.loglik = fb[s].loglik;
      t.alpha.resize(fb[s].gamma.size());
      for (std::size_t k = 0; k < t.alpha.size(); ++k) t.alpha[k] = fb[s].gamma[k][1];
      t.k_star_hat = estimate_k_star(t);
      t.detected = t.k_star_hat.has_value();
    }
    return tracks;
  };

  BaumWelchResult result;
  result.params = params0;
  std::vector<detail::FbResult> fb;
  double current = e_step(params0, fb);
  result.loglik.push_back(current);

  for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
    const HmmParams &old = result.params;
    HmmParams next = old;

    std::array<double, 2> start{0.0, 0.0};
    std::array<std::array<double, 2>, 2> xi{};
    std::array<std::vector<double>, 2> hard;
    std::vector<double> pooled;
    std::array<std::vector<double>, 2> weight;
    for (std::size_t s = 0; s < fb.size(); ++s) {
      start[0] += fb[s].gamma[0][0];
      start[1] += fb[s].gamma[0][1];
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) xi[i][j] += fb[s].xi_sum[i][j];
      for (std::size_t k = 0; k < data[s].size(); ++k) {
        hard[fb[s].gamma[k][1] > 0.5 ? 1 : 0].push_back(data[s][k]);
        pooled.push_back(data[s][k]);
        weight[0].push_back(fb[s].gamma[k][0]);
        weight[1].push_back(fb[s].gamma[k][1]);
      }
    }
    const double starts = start[0] + start[1];
    next.pi = {start[0] / starts, start[1] / starts};
    for (int i = 0; i < 2; ++i) {
      const double row = xi[i][0] + xi[i][1];
      if (row > 0.0) next.trans[i] = {xi[i][0] / row, xi[i][1] / row};
    }
    const double p10 = std::max(next.trans[1][0], next.epsilon_escape);
    next.trans[1] = {p10, 1.0 - p10};
    for (int i = 0; i < 2; ++i) {
      if (options.refit == EmissionRefit::hard) {
        if (!hard[i].empty()) next.emit[i] = LogNormal::fit(hard[i]);  // empty: keep previous
      } else if (std::accumulate(weight[i].begin(), weight[i].end(), 0.0) > 0.0) {
        next.emit[i] = LogNormal::fit_weighted(pooled, weight[i]);
      }
    }

    const double updated = e_step(next, fb);
    result.loglik.push_back(updated);
    result.params = next;
    result.iterations = iter;
    const bool done = updated - current < options.tol;
    current = updated;
    if (observer) observer(iter, result.params, to_tracks(fb));
    if (done) {
      result.converged = true;
      break;
    }
  }
  result.tracks = to_tracks(fb);
  return result;
}

}  // namespace hmmrange
