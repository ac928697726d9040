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
 * \file experiment.hpp
 * \brief Evaluation protocol on simulated scenes: train in one room, test in
 *        another, score HMM / FTC / background subtraction, run empty-room
 *        false-positive trials, calibration-window studies and localization
 *        comparisons.
 *
 * Every random draw is derived from a master seed with derive_seed(), so runs
 * are reproducible bit for bit for a given configuration.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hmmrange/baselines.hpp"
#include "hmmrange/cir_sim.hpp"
#include "hmmrange/common.hpp"
#include "hmmrange/hmm.hpp"
#include "hmmrange/localizer.hpp"
#include "hmmrange/metrics.hpp"
#include "hmmrange/observation.hpp"

namespace hmmrange {

// ---------------------------------------------------------------------------
// Scene presets
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Link> all_pairs(std::size_t radios) {
  std::vector<Link> links;
  for (std::size_t i = 0; i < radios; ++i)
    for (std::size_t j = i + 1; j < radios; ++j) links.push_back({i, j});
  return links;
}

inline std::vector<Point> grid_points(double x_first, double dx, std::size_t nx, double y_first,
                                      double dy, std::size_t ny) {
  std::vector<Point> pts;
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix)
      pts.push_back({x_first + dx * static_cast<double>(ix), y_first + dy * static_cast<double>(iy)});
  return pts;
}

}  // namespace detail

/// Furnished office: four radios, six links, 90 cm person grid, heavy clutter.
inline Scene room_a_scene(std::uint64_t seed = 1) {
  Scene s;
  s.name = "room-A";
  s.seed = seed;
  auto &g = s.geometry;
  g.room_bounds = {0.0, 0.0, 6.0, 5.0};
  const std::vector<Point> radios{{0.45, 0.45}, {5.55, 0.45}, {5.55, 4.55}, {0.45, 4.55}};
  g.tx_positions = radios;
  g.rx_positions = radios;
  g.person_points = detail::grid_points(1.05, 0.9, 5, 0.95, 0.9, 4);
  g.bin_width = 1e-9;
  g.bin_count = 48;
  g.lead_bins = 8;
  s.links = detail::all_pairs(radios.size());
  s.clutter.path_count = 640;
  s.clutter.decay_constant = 60e-9;
  s.clutter.path_amplitude_scale = 1.0;
  s.clutter.noise_std = 1.0;
  s.clutter.person_path_gain = 0.1;
  s.clutter.person_tail_perturbation = 0.8;
  s.clutter.integration_factor = 1;
  return s;
}

/// Larger, emptier classroom: same radio layout scaled up, lighter clutter.
inline Scene room_b_scene(std::uint64_t seed = 2) {
  Scene s;
  s.name = "room-B";
  s.seed = seed;
  auto &g = s.geometry;
  g.room_bounds = {0.0, 0.0, 8.0, 7.0};
  const std::vector<Point> radios{{0.45, 0.45}, {7.55, 0.45}, {7.55, 6.55}, {0.45, 6.55}};
  g.tx_positions = radios;
  g.rx_positions = radios;
  g.person_points = detail::grid_points(1.35, 0.9, 6, 1.25, 0.9, 5);
  g.bin_width = 1e-9;
  g.bin_count = 48;
  g.lead_bins = 8;
  s.links = detail::all_pairs(radios.size());
  s.clutter.path_count = 427;
  s.clutter.decay_constant = 60e-9;
  s.clutter.path_amplitude_scale = 1.0;
  s.clutter.noise_std = 1.0;
  s.clutter.person_path_gain = 0.1;
  s.clutter.person_tail_perturbation = 0.8;
  s.clutter.integration_factor = 1;
  return s;
}

/// One link 1 m long, 18 cm behind a wall; 30 person points on a 60 x 120 cm
/// lattice in the adjacent room; 5 dB wall loss and 8x pulse integration.
inline Scene through_wall_scene(std::uint64_t seed = 3) {
  Scene s;
  s.name = "through-wall";
  s.seed = seed;
  auto &g = s.geometry;
  g.room_bounds = {-2.0, -3.0, 2.0, 0.0};
  g.person_region = Rect{-2.0, 0.0, 2.0, 7.0};
  g.tx_positions = {{-0.5, -0.18}};
  g.rx_positions = {{0.5, -0.18}};
  g.person_points = detail::grid_points(-1.2, 0.6, 5, 0.6, 1.2, 6);
  g.bin_width = 1e-9;
  g.bin_count = 60;
  g.lead_bins = 8;
  s.links = {{0, 0}};
  s.clutter.path_count = 640;
  s.clutter.decay_constant = 60e-9;
  s.clutter.path_amplitude_scale = 1.0;
  s.clutter.noise_std = 0.5;
  s.clutter.person_path_gain = 0.3;
  s.clutter.person_tail_perturbation = 0.5;
  s.clutter.integration_factor = 8;
  s.clutter.wall_attenuation_db = 5.0;
  return s;
}

inline Scene preset_scene(const std::string &name, std::uint64_t seed) {
  if (name == "room-A") return room_a_scene(seed);
  if (name == "room-B") return room_b_scene(seed);
  if (name == "through-wall") return through_wall_scene(seed);
  throw Error("unknown scene preset '" + name + "' (expected room-A, room-B or through-wall)");
}

// ---------------------------------------------------------------------------
// Captured data
// ---------------------------------------------------------------------------

/// All captures of one scene: an empty-room pool per link and a person set
/// per (link, point).
struct SceneData {
  Scene scene;
  std::vector<std::vector<CirTrace>> calibration;        // [link][capture]
  std::vector<std::vector<std::vector<CirTrace>>> test;  // [link][point][capture]

  std::size_t links() const { return calibration.size(); }
  std::size_t points() const { return scene.geometry.person_points.size(); }
  std::size_t truth(std::size_t link, std::size_t point) const {
    return scene.truth_bin(link, scene.geometry.person_points[point]);
  }
  SampleSet calibration_set(std::size_t link) const {
    return SampleSet::from_traces(calibration[link], Condition::calibration, link);
  }
  SampleSet test_set(std::size_t link, std::size_t point) const {
    return SampleSet::from_traces(test[link][point], Condition::test, link);
  }
};

inline SceneData capture_scene(const Scene &scene, std::size_t calibration_count,
                               std::size_t test_count, std::uint64_t seed) {
  scene.validate();
  require(calibration_count >= 2 && test_count >= 2, "sample counts must be at least 2");
  SceneData d;
  d.scene = scene;
  const std::size_t L = scene.links.size();
  const std::size_t P = scene.geometry.person_points.size();
  d.calibration.resize(L);
  d.test.assign(L, std::vector<std::vector<CirTrace>>(P));
  for (std::size_t m = 0; m < L; ++m) {
    d.calibration[m] = make_static_scene(scene, m, derive_seed(seed, 1, m), calibration_count);
    for (std::size_t p = 0; p < P; ++p)
      d.test[m][p] = make_person_scene(scene, m, scene.geometry.person_points[p],
                                       derive_seed(seed, 2, m, p), test_count);
  }
  return d;
}

/// Independent empty-room captures per link, `count` each.
inline std::vector<std::vector<CirTrace>> capture_empty_pools(const Scene &scene, std::size_t count,
                                                              std::uint64_t seed) {
  std::vector<std::vector<CirTrace>> pools;
  for (std::size_t m = 0; m < scene.links.size(); ++m)
    pools.push_back(make_static_scene(scene, m, derive_seed(seed, 3, m), count));
  return pools;
}

inline std::vector<SampleSet> as_sample_sets(const std::vector<std::vector<CirTrace>> &pools) {
  std::vector<SampleSet> out;
  for (std::size_t m = 0; m < pools.size(); ++m)
    out.push_back(SampleSet::from_traces(pools[m], Condition::calibration, m));
  return out;
}

/// Observation vectors for every (link, point), labeled with the truth bin.
/// An optional calibration replacement per link supports window studies.
inline std::vector<LabeledObservation> labeled_observations(
    const SceneData &d, const std::vector<SampleSet> *calibration_override = nullptr) {
  std::vector<LabeledObservation> out;
  for (std::size_t m = 0; m < d.links(); ++m) {
    const SampleSet cal = calibration_override ? (*calibration_override)[m] : d.calibration_set(m);
    const BinStats cal_stats = bin_stats(cal);
    for (std::size_t p = 0; p < d.points(); ++p) {
      auto o = symmetric_kl(cal_stats, bin_stats(d.test_set(m, p)));
      o.link = m;
      o.point = p;
      out.push_back({std::move(o), d.truth(m, p)});
    }
  }
  return out;
}

inline std::vector<ObservationVector> unlabeled(const std::vector<LabeledObservation> &data) {
  std::vector<ObservationVector> out;
  out.reserve(data.size());
  for (const auto &d : data) out.push_back(d.obs);
  return out;
}

inline std::vector<EstimateRecord> records_from_tracks(const std::vector<LabeledObservation> &data,
                                                       const std::vector<PosteriorTrack> &tracks) {
  require(data.size() == tracks.size(), "track count does not match the dataset");
  std::vector<EstimateRecord> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    out.push_back({data[i].obs.point, data[i].obs.link, data[i].k_star, tracks[i].k_star_hat});
  return out;
}

// ---------------------------------------------------------------------------
// Work pool
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each call must
/// write only its own output slot, which keeps results independent of the
/// thread count.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)> &fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto &th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Train-room / test-room protocol
// ---------------------------------------------------------------------------

enum class Method { hmm, ftc, zetik, all };

inline Method parse_method(const std::string &s) {
  if (s == "hmm") return Method::hmm;
  if (s == "ftc") return Method::ftc;
  if (s == "zetik") return Method::zetik;
  if (s == "all") return Method::all;
  throw Error("invalid method '" + s + "' (expected hmm, ftc, zetik or all)");
}

struct ExperimentConfig {
  Scene train;
  Scene test;
  Method method = Method::all;
  std::size_t calibration_count = 10;
  std::size_t test_count = 10;
  std::uint64_t seed = 1;
  double epsilon_escape = kDefaultEscape;
  BaumWelchOptions baum_welch{};
  ZetikOptions zetik{};
  std::size_t gamma_points = 100;
  /// Empty-room trials per link for the false-positive rate; 0 skips them.
  std::size_t fp_trials_per_link = 0;

  void validate() const {
    train.validate();
    test.validate();
    require(calibration_count >= 2 && test_count >= 2, "sample counts must be at least 2");
    require(train.geometry.bin_count == test.geometry.bin_count, "train and test scenes must share the window length");
    require(train.geometry.bin_width == test.geometry.bin_width, "train and test scenes must share the bin width");
  }
};

struct MetricsReport {
  std::string method;
  DelayMetrics metrics;
  std::optional<double> fp_rate;
  std::vector<EstimateRecord> records;

  // Method metadata.
  std::optional<double> gamma;          // FTC threshold transferred from the training room
  std::optional<double> oracle_gamma;   // FTC threshold that is best on the test room
  std::optional<double> oracle_rmse_ns;
  std::optional<HmmParams> initial_params;
  std::optional<HmmParams> final_params;
  std::vector<double> loglik_per_iteration;
  std::vector<double> rmse_per_iteration;  // ns, index 0 is the initial parameters
  std::size_t iterations = 0;
  std::optional<double> zetik_smoothing;
  SweepResult train_sweep;
  SweepResult test_sweep;
};

struct ExperimentReport {
  std::vector<MetricsReport> reports;
  std::string train_scene;
  std::string test_scene;
};

struct FpResult {
  std::size_t trials = 0;
  std::size_t detections = 0;
  double rate() const { return trials ? static_cast<double>(detections) / static_cast<double>(trials) : 0.0; }
};

using EmptyRoomDetector = std::function<bool(const ObservationVector &)>;

/// Random half/half splits of each empty-room pool into a "calibration" and a
/// "possible person" set; a trial is a false positive when the detector fires.
inline FpResult false_positive_trials(const std::vector<SampleSet> &pools, std::size_t trials_per_pool,
                                      std::uint64_t seed, const EmptyRoomDetector &detector) {
  require(trials_per_pool > 0, "number of false-positive trials must be positive");
  require(!pools.empty(), "no empty-room sample pools");
  for (const auto &pool : pools)
    require(pool.realizations() >= 4, "empty-room pool too small to split into two halves of >= 2 samples");
  FpResult r;
  for (std::size_t q = 0; q < pools.size(); ++q) {
    const auto &pool = pools[q];
    const std::size_t half = pool.realizations() / 2;
    std::vector<std::size_t> order(pool.realizations());
    for (std::size_t t = 0; t < trials_per_pool; ++t) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(seed, 0xF9ULL, q, t));
      std::shuffle(order.begin(), order.end(), rng);
      SampleSet cal, test;
      cal.link = test.link = pool.link;
      test.condition = Condition::test;
      for (std::size_t i = 0; i < order.size(); ++i)
        (i < half ? cal : test).samples.push_back(pool.samples[order[i]]);
      const auto obs = observe(cal, test);
      ++r.trials;
      if (detector(obs)) ++r.detections;
    }
  }
  return r;
}

/// HMM false-positive trials: forward-backward under fixed parameters, no
/// re-estimation.
inline FpResult false_positive_trials(const std::vector<SampleSet> &pools, std::size_t trials_per_pool,
                                      std::uint64_t seed, const HmmParams &params) {
  return false_positive_trials(pools, trials_per_pool, seed,
                               [&](const ObservationVector &o) { return infer(o, params).detected; });
}

namespace detail {

/// Lower median of the detections in a run of per-capture estimates.
inline std::optional<std::size_t> consensus(const std::vector<std::optional<std::size_t>> &estimates) {
  std::vector<std::size_t> hits;
  for (const auto &e : estimates)
    if (e) hits.push_back(*e);
  if (hits.empty()) return std::nullopt;
  std::sort(hits.begin(), hits.end());
  return hits[(hits.size() - 1) / 2];
}

}  // namespace detail

/// Background-subtraction estimate for one (link, point): the detector runs
/// over the empty-room captures and then the person captures; the reported
/// bin is the lower median of the detections on the person captures.
inline std::optional<std::size_t> zetik_point_estimate(const SceneData &d, std::size_t link,
                                                       std::size_t point, const ZetikOptions &options) {
  std::vector<std::vector<double>> stream;
  for (const auto &t : d.calibration[link]) stream.push_back(t.amplitudes);
  for (const auto &t : d.test[link][point]) stream.push_back(t.amplitudes);
  ZetikOptions o = options;
  o.lead_bins = d.scene.geometry.lead_bins;
  const auto per = zetik_estimate(stream, o);
  return detail::consensus({per.begin() + static_cast<std::ptrdiff_t>(d.calibration[link].size()), per.end()});
}

inline ExperimentReport run_experiment(const ExperimentConfig &config) {
  config.validate();
  const SceneData train = capture_scene(config.train, config.calibration_count, config.test_count,
                                        derive_seed(config.seed, 0x7A1ULL));
  const SceneData test = capture_scene(config.test, config.calibration_count, config.test_count,
                                       derive_seed(config.seed, 0x7E57ULL));
  const auto train_obs = labeled_observations(train);
  const auto test_obs = labeled_observations(test);
  const double T = config.test.geometry.bin_width;
  const std::size_t n = config.test.geometry.bin_count;

  const bool want_fp = config.fp_trials_per_link > 0;
  // Empty-room pools split into two halves of calibration_count captures.
  const auto empty = want_fp ? capture_empty_pools(config.test, 2 * config.calibration_count,
                                                   derive_seed(config.seed, 0xE0ULL))
                             : std::vector<std::vector<CirTrace>>{};
  const auto pools = as_sample_sets(empty);

  ExperimentReport out;
  out.train_scene = config.train.name;
  out.test_scene = config.test.name;
  const bool all = config.method == Method::all;

  if (all || config.method == Method::hmm) {
    MetricsReport r;
    r.method = "hmm";
    const HmmParams p0 = init_params(train_obs, config.epsilon_escape);
    r.initial_params = p0;
    {
      std::vector<PosteriorTrack> tracks;
      for (const auto &o : test_obs) tracks.push_back(infer(o.obs, p0));
      r.rmse_per_iteration.push_back(delay_metrics(records_from_tracks(test_obs, tracks), T, n).rmse_ns);
    }
    const auto bw = baum_welch(unlabeled(test_obs), p0, config.baum_welch,
                               [&](std::size_t, const HmmParams &, const std::vector<PosteriorTrack> &tracks) {
                                 r.rmse_per_iteration.push_back(
                                     delay_metrics(records_from_tracks(test_obs, tracks), T, n).rmse_ns);
                               });
    r.final_params = bw.params;
    r.loglik_per_iteration = bw.loglik;
    r.iterations = bw.iterations;
    r.records = records_from_tracks(test_obs, bw.tracks);
    r.metrics = delay_metrics(r.records, T, n);
    if (want_fp)
      r.fp_rate = false_positive_trials(pools, config.fp_trials_per_link, derive_seed(config.seed, 0xF0ULL), bw.params).rate();
    out.reports.push_back(std::move(r));
  }
  if (all || config.method == Method::ftc) {
    MetricsReport r;
    r.method = "ftc";
    r.train_sweep = ftc_sweep(train_obs, default_gamma_grid(train_obs, config.gamma_points), T);
    r.test_sweep = ftc_sweep(test_obs, default_gamma_grid(test_obs, config.gamma_points), T);
    r.gamma = r.train_sweep.best_gamma;
    r.oracle_gamma = r.test_sweep.best_gamma;
    r.oracle_rmse_ns = r.test_sweep.best_rmse();
    r.records = ftc_records(test_obs, *r.gamma);
    r.metrics = delay_metrics(r.records, T, n);
    if (want_fp) {
      const double g = *r.gamma;
      r.fp_rate = false_positive_trials(pools, config.fp_trials_per_link, derive_seed(config.seed, 0xF1ULL),
                                        [g](const ObservationVector &o) { return ftc_estimate(o, g).has_value(); })
                      .rate();
    }
    out.reports.push_back(std::move(r));
  }
  if (all || config.method == Method::zetik) {
    MetricsReport r;
    r.method = "zetik";
    r.zetik_smoothing = config.zetik.smoothing;
    for (std::size_t m = 0; m < test.links(); ++m)
      for (std::size_t p = 0; p < test.points(); ++p)
        r.records.push_back({p, m, test.truth(m, p), zetik_point_estimate(test, m, p, config.zetik)});
    r.metrics = delay_metrics(r.records, T, n);
    if (want_fp) {
      ZetikOptions zo = config.zetik;
      zo.lead_bins = config.test.geometry.lead_bins;
      FpResult fp;
      for (const auto &pool : empty) {
        std::vector<std::vector<double>> stream;
        for (const auto &t : pool) stream.push_back(t.amplitudes);
        const auto per = zetik_estimate(stream, zo);
        for (const auto &e : per) {
          ++fp.trials;
          fp.detections += e ? 1 : 0;
        }
      }
      r.fp_rate = fp.rate();
    }
    out.reports.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empty-room calibration window study
// ---------------------------------------------------------------------------

struct Window {
  std::size_t block = 0;
  std::size_t start = 0;  // absolute index into the pool
  std::size_t size = 0;
};

/// Sequential windows of `size` captures, stepping by `step`, never spanning
/// two blocks. A block of length L yields floor((L - size) / step) + 1 windows.
inline std::vector<Window> enumerate_windows(const std::vector<std::size_t> &block_lengths,
                                             std::size_t size, std::size_t step = 1) {
  require(size >= 2, "window size must be at least 2");
  require(step >= 1, "window step must be at least 1");
  std::vector<Window> out;
  std::size_t offset = 0;
  for (std::size_t b = 0; b < block_lengths.size(); ++b) {
    const std::size_t len = block_lengths[b];
    if (len >= size)
      for (std::size_t s = 0; s + size <= len; s += step) out.push_back({b, offset + s, size});
    offset += len;
  }
  return out;
}

struct SubsetStudy {
  std::vector<Window> windows;
  std::vector<double> rmse_ns;  // per window

  /// Empirical CDF rows (rmse, fraction <= rmse) sorted by rmse.
  std::vector<std::pair<double, double>> cdf() const {
    std::vector<double> v = rmse_ns;
    std::sort(v.begin(), v.end());
    std::vector<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < v.size(); ++i)
      rows.emplace_back(v[i], static_cast<double>(i + 1) / static_cast<double>(v.size()));
    return rows;
  }
};

/// Runs the full pipeline (observations, Baum-Welch from params0, delay
/// estimates) once per calibration window and records the delay RMSE.
inline SubsetStudy empty_room_subset_study(const SceneData &data, const std::vector<std::size_t> &block_lengths,
                                           std::size_t subset_size, const HmmParams &params0,
                                           const BaumWelchOptions &bw = {}, std::size_t step = 1,
                                           std::size_t threads = 1) {
  std::size_t pool = 0;
  for (auto l : block_lengths) pool += l;
  for (std::size_t m = 0; m < data.links(); ++m)
    require(data.calibration[m].size() == pool, "block lengths do not match the calibration pool");
  SubsetStudy study;
  study.windows = enumerate_windows(block_lengths, subset_size, step);
  require(!study.windows.empty(), "calibration pool has too few captures for the requested window size");
  study.rmse_ns.assign(study.windows.size(), 0.0);
  parallel_for(study.windows.size(), threads, [&](std::size_t w) {
    const auto &win = study.windows[w];
    std::vector<SampleSet> cal;
    for (std::size_t m = 0; m < data.links(); ++m) cal.push_back(data.calibration_set(m).slice(win.start, win.size));
    const auto obs = labeled_observations(data, &cal);
    const auto res = baum_welch(unlabeled(obs), params0, bw);
    study.rmse_ns[w] = delay_metrics(records_from_tracks(obs, res.tracks), data.scene.geometry.bin_width,
                                     data.scene.geometry.bin_count)
                           .rmse_ns;
  });
  return study;
}

// ---------------------------------------------------------------------------
// Localization comparison
// ---------------------------------------------------------------------------

struct LocalizationRow {
  std::size_t point = 0;
  Point truth;
  Point soft;
  Point hard;
  Point sla;
  double soft_error = 0.0;  // m
  double hard_error = 0.0;
  double sla_error = 0.0;
};

struct LocalizationReport {
  std::vector<LocalizationRow> rows;
  double rms_soft = 0.0, rms_hard = 0.0, rms_sla = 0.0;           // m
  double median_soft = 0.0, median_hard = 0.0, median_sla = 0.0;  // m
  std::size_t soft_failures = 0, hard_failures = 0, sla_failures = 0;
};

struct LocalizationOptions {
  double pixel_pitch = 0.1;
  ImageOptions image{};
};

/// Localizes every person point with the soft image, the hard image and the
/// least-squares baseline. A method that cannot produce an estimate for a
/// point falls back to the center of the monitored area.
inline LocalizationReport localization_report(const SceneData &data, const std::vector<PosteriorTrack> &tracks,
                                              const LocalizationOptions &options = {}) {
  require(data.links() >= 3, "localization needs at least 3 links");
  require(tracks.size() == data.links() * data.points(), "expected one track per (link, point)");
  const auto &geom = data.scene.geometry;
  const PixelGrid grid = PixelGrid::covering(geom.allowed_person_region(), options.pixel_pitch);
  const Rect area = geom.allowed_person_region();
  const Point fallback{0.5 * (area.x0 + area.x1), 0.5 * (area.y0 + area.y1)};
  LocalizationReport rep;
  for (std::size_t p = 0; p < data.points(); ++p) {
    std::vector<LinkPosterior> posts;
    std::vector<LinkEstimate> ests;
    for (const auto &t : tracks) {
      if (t.point != p) continue;
      posts.push_back({t, data.scene.tx_of(t.link), data.scene.rx_of(t.link), geom.bin_width});
      ests.push_back({t.k_star_hat, data.scene.tx_of(t.link), data.scene.rx_of(t.link), geom.bin_width, geom.bin_count});
    }
    LocalizationRow row;
    row.point = p;
    row.truth = geom.person_points[p];
    try {
      row.soft = locate(presence_image_soft(posts, grid, options.image));
    } catch (const NoEstimateError &) {
      row.soft = fallback;
      ++rep.soft_failures;
    }
    try {
      row.hard = locate(presence_image_hard(ests, grid, options.image));
    } catch (const NoEstimateError &) {
      row.hard = fallback;
      ++rep.hard_failures;
    }
    std::size_t detections = 0;
    for (const auto &e : ests) detections += e.k_hat ? 1 : 0;
    if (detections >= 3) {
      row.sla = sla_locate(ests).position;
    } else {
      row.sla = fallback;
      ++rep.sla_failures;
    }
    row.soft_error = distance(row.soft, row.truth);
    row.hard_error = distance(row.hard, row.truth);
    row.sla_error = distance(row.sla, row.truth);
    rep.rows.push_back(row);
  }
  std::vector<double> s, h, l;
  for (const auto &r : rep.rows) {
    s.push_back(r.soft_error);
    h.push_back(r.hard_error);
    l.push_back(r.sla_error);
  }
  rep.rms_soft = rms(s);
  rep.rms_hard = rms(h);
  rep.rms_sla = rms(l);
  rep.median_soft = median(s);
  rep.median_hard = median(h);
  rep.median_sla = median(l);
  return rep;
}

/// Trains on `train`, refines on `test` with Baum-Welch and returns the
/// resulting posterior tracks of the test scene.
inline BaumWelchResult train_and_refine(const SceneData &train, const SceneData &test,
                                        double epsilon_escape = kDefaultEscape,
                                        const BaumWelchOptions &bw = {}) {
  const HmmParams p0 = init_params(labeled_observations(train), epsilon_escape);
  return baum_welch(unlabeled(labeled_observations(test)), p0, bw);
}

}  // namespace hmmrange
