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
 * \file cir_sim.hpp
 * \brief Synthetic cluttered UWB channel generator.
 *
 * Each link owns a static multipath channel: a line-of-sight path in bin 1
 * plus `path_count` scatterers at uniformly drawn excess delays whose powers
 * are exponential (Rayleigh magnitudes) with mean following an exponential
 * power-delay profile. Bin energies r_k are generated directly; each capture
 * adds Gaussian receiver noise whose variance is noise_std^2 divided by the
 * integration factor, on top of a constant noise-energy floor of
 * 4 * noise_std.
 *
 * A person at point p adds a scattered path at bin
 * k* = ceil(excess(p) / d_k) and perturbs every clutter bin k >= k* by a
 * persistent log-normal factor exp(w_k tail * g_k) plus per-capture jitter,
 * where w_k rises linearly from 1 / (onset + 1) at k* to 1.
 * Bins before k* are drawn exactly as in the static scene.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hmmrange/common.hpp"
#include "hmmrange/geometry.hpp"

namespace hmmrange {

/// Transmitter and receiver indices into SceneGeometry's radio lists.
struct Link {
  std::size_t tx = 0;
  std::size_t rx = 0;

  friend bool operator==(const Link &, const Link &) = default;
};

struct SceneGeometry {
  std::vector<Point> tx_positions;
  std::vector<Point> rx_positions;
  std::vector<Point> person_points;
  Rect room_bounds;
  /// Set for through-wall scenes: persons stand here instead of in room_bounds.
  std::optional<Rect> person_region;
  double bin_width = 1e-9;  // seconds
  std::size_t bin_count = 48;
  /// Noise-only bins preceding the line-of-sight bin in the amplitude view.
  std::size_t lead_bins = 8;

  double bin_distance() const { return kSpeedOfLight * bin_width; }

  const Rect &allowed_person_region() const {
    return person_region ? *person_region : room_bounds;
  }

  void validate() const {
    require(room_bounds.valid(), "room bounds must have positive extent");
    require(bin_width > 0.0, "bin width must be positive");
    require(bin_count > 0, "bin count must be positive");
    require(!tx_positions.empty() && !rx_positions.empty(), "scene needs at least one tx and one rx");
    for (const auto &p : tx_positions) require(room_bounds.contains(p), "transmitter outside room bounds");
    for (const auto &p : rx_positions) require(room_bounds.contains(p), "receiver outside room bounds");
    if (person_region) require(person_region->valid(), "person region must have positive extent");
    for (const auto &p : person_points)
      require(allowed_person_region().contains(p), "person point outside the allowed region");
  }
};

struct ClutterModel {
  std::size_t path_count = 640;
  double decay_constant = 60e-9;  // seconds
  double path_amplitude_scale = 1.0;
  double noise_std = 1.0;
  double person_path_gain = 0.1;
  double person_tail_perturbation = 0.8;
  std::size_t integration_factor = 1;
  /// Bins over which the person's perturbation ramps up to full strength.
  std::size_t person_onset_bins = 3;
  /// Flat attenuation of every path energy (clutter and person), in dB.
  double wall_attenuation_db = 0.0;

  void validate() const {
    require(path_count > 0, "path_count must be positive");
    require(decay_constant > 0.0, "decay_constant must be positive");
    require(path_amplitude_scale > 0.0, "path_amplitude_scale must be positive");
    require(noise_std >= 0.0, "noise_std must be nonnegative");
    require(person_path_gain >= 0.0, "person_path_gain must be nonnegative");
    require(person_tail_perturbation >= 0.0 && person_tail_perturbation <= 1.0,
            "person_tail_perturbation must lie in [0, 1]");
    require(integration_factor >= 1, "integration_factor must be at least 1");
    require(wall_attenuation_db >= 0.0, "wall attenuation must be nonnegative");
  }

  double capture_noise_std() const {
    return noise_std / std::sqrt(static_cast<double>(integration_factor));
  }
  double noise_floor() const { return 4.0 * noise_std; }
  double attenuation() const { return std::pow(10.0, -wall_attenuation_db / 10.0); }
};

/// A complete scene: geometry, clutter, the links to measure and a master seed.
struct Scene {
  std::string name;
  SceneGeometry geometry;
  ClutterModel clutter;
  std::vector<Link> links;
  std::uint64_t seed = 1;

  void validate() const {
    geometry.validate();
    clutter.validate();
    require(!links.empty(), "scene needs at least one link");
    for (const auto &l : links)
      require(l.tx < geometry.tx_positions.size() && l.rx < geometry.rx_positions.size(),
              "link references a radio that does not exist");
  }

  Point tx_of(std::size_t link) const { return geometry.tx_positions.at(links.at(link).tx); }
  Point rx_of(std::size_t link) const { return geometry.rx_positions.at(links.at(link).rx); }

  /// Ground-truth bin of a person at p on the given link.
  std::size_t truth_bin(std::size_t link, Point p) const {
    return excess_to_bin(excess_path(tx_of(link), p, rx_of(link)), geometry.bin_distance());
  }
};

/// One captured channel realization reduced to per-bin energies.
struct CirTrace {
  std::vector<double> energies;  // r_1 .. r_n (index 0 is bin 1)
  /// Signed amplitudes: lead_bins noise samples followed by sign_k * sqrt(r_k).
  std::vector<double> amplitudes;
  Link link;
  std::optional<std::size_t> truth_k_star;
};

/// The persistent part of a link's channel.
struct StaticChannel {
  std::vector<double> path_energy;  // mean clutter energy per bin, before attenuation
  std::vector<double> sign;         // +1 / -1 per bin, used by the amplitude view
};

/// Expected clutter energy in 1-based bin k, averaged over channel draws.
inline double expected_bin_energy(const ClutterModel &clutter, const SceneGeometry &geom,
                                  std::size_t k) {
  const double scale2 = clutter.path_amplitude_scale * clutter.path_amplitude_scale;
  const double T = geom.bin_width;
  const double D = clutter.decay_constant;
  const double window = T * static_cast<double>(geom.bin_count);
  const double kd = static_cast<double>(k);
  const double scattered = static_cast<double>(clutter.path_count) * scale2 * D / window *
                           (std::exp(-(kd - 1.0) * T / D) - std::exp(-kd * T / D));
  return scattered + (k == 1 ? scale2 : 0.0);
}

inline StaticChannel draw_channel(const Scene &scene, std::size_t link) {
  const auto &geom = scene.geometry;
  const auto &clutter = scene.clutter;
  const std::size_t n = geom.bin_count;
  std::mt19937_64 rng(derive_seed(scene.seed, 0xC4A77E1ULL, scene.links.at(link).tx,
                                  scene.links.at(link).rx));
  StaticChannel ch;
  ch.path_energy.assign(n, 0.0);
  ch.sign.assign(n, 1.0);
  const double scale2 = clutter.path_amplitude_scale * clutter.path_amplitude_scale;
  ch.path_energy[0] = scale2;  // line of sight
  const double window = geom.bin_width * static_cast<double>(n);
  std::uniform_real_distribution<double> delay(0.0, window);
  for (std::size_t i = 0; i < clutter.path_count; ++i) {
    const double tau = delay(rng);
    const double mean_power = scale2 * std::exp(-tau / clutter.decay_constant);
    std::exponential_distribution<double> power(1.0 / mean_power);
    const std::size_t k = std::min(excess_to_bin(tau, geom.bin_width), n);
    ch.path_energy[k - 1] += power(rng);
  }
  std::bernoulli_distribution coin(0.5);
  for (auto &s : ch.sign) s = coin(rng) ? 1.0 : -1.0;
  return ch;
}

namespace detail {

inline constexpr double kPersonJitter = 0.3;

inline CirTrace realize(const Scene &scene, std::size_t link, const std::vector<double> &mean,
                        const std::vector<double> &jitter_std, const StaticChannel &ch,
                        std::mt19937_64 &rng, std::optional<std::size_t> truth) {
  const auto &clutter = scene.clutter;
  const std::size_t n = mean.size();
  const std::size_t lead = scene.geometry.lead_bins;
  const double sigma = clutter.capture_noise_std();
  std::normal_distribution<double> z(0.0, 1.0);
  CirTrace t;
  t.link = scene.links[link];
  t.truth_k_star = truth;
  t.energies.resize(n);
  t.amplitudes.resize(lead + n);
  for (std::size_t i = 0; i < lead; ++i) t.amplitudes[i] = sigma * z(rng);
  for (std::size_t k = 0; k < n; ++k) {
    double r = mean[k] + sigma * z(rng);
    if (jitter_std[k] > 0.0) r += jitter_std[k] * z(rng);
    r = std::max(r, 0.0);
    t.energies[k] = r;
    t.amplitudes[lead + k] = ch.sign[k] * std::sqrt(r);
  }
  return t;
}

}  // namespace detail

/// `count` independent captures of the empty scene on one link.
inline std::vector<CirTrace> make_static_scene(const Scene &scene, std::size_t link,
                                               std::uint64_t seed, std::size_t count) {
  scene.validate();
  require(link < scene.links.size(), "invalid link index " + std::to_string(link));
  require(count > 0, "sample count must be positive");
  const StaticChannel ch = draw_channel(scene, link);
  const double att = scene.clutter.attenuation();
  std::vector<double> mu(ch.path_energy.size());
  for (std::size_t k = 0; k < mu.size(); ++k)
    mu[k] = scene.clutter.noise_floor() + att * ch.path_energy[k];
  const std::vector<double> no_jitter(mu.size(), 0.0);
  std::mt19937_64 rng(derive_seed(seed, 0x57A71CULL, link));
  std::vector<CirTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(detail::realize(scene, link, mu, no_jitter, ch, rng, std::nullopt));
  return out;
}

/// `count` captures with a person standing at `person`.
inline std::vector<CirTrace> make_person_scene(const Scene &scene, std::size_t link, Point person,
                                               std::uint64_t seed, std::size_t count) {
  scene.validate();
  require(link < scene.links.size(), "invalid link index " + std::to_string(link));
  require(count > 0, "sample count must be positive");
  require(scene.geometry.allowed_person_region().contains(person),
          "person point outside the allowed region");
  const auto &clutter = scene.clutter;
  const StaticChannel ch = draw_channel(scene, link);
  const std::size_t n = ch.path_energy.size();
  const std::size_t k_star = scene.truth_bin(link, person);
  const double att = clutter.attenuation();
  const double tail = clutter.person_tail_perturbation;

  std::mt19937_64 rng(derive_seed(seed, 0x9E550ULL, link));
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> mu(n);
  std::vector<double> jitter(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double clutter_energy = att * ch.path_energy[k];
    if (k + 1 >= k_star) {
      const double ramp = std::min(
          1.0, static_cast<double>(k + 2 - k_star) / static_cast<double>(clutter.person_onset_bins + 1));
      const double factor = std::exp(ramp * tail * z(rng));
      clutter_energy *= factor;
      jitter[k] = detail::kPersonJitter * ramp * tail * clutter_energy;
    }
    mu[k] = clutter.noise_floor() + clutter_energy;
  }
  if (k_star <= n) {
    const double bump =
        att * clutter.person_path_gain * expected_bin_energy(clutter, scene.geometry, k_star);
    mu[k_star - 1] += bump;
    jitter[k_star - 1] = std::hypot(jitter[k_star - 1], detail::kPersonJitter * bump);
  }
  // Captures use a stream independent of the perturbation draw so that bins
  // before k* see exactly the static-scene noise process.
  std::mt19937_64 capture_rng(derive_seed(seed, 0xCA97ULL, link));
  std::vector<CirTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(detail::realize(scene, link, mu, jitter, ch, capture_rng, k_star));
  return out;
}

/// CSV with columns link,realization,bin,energy (bins 1-based).
inline void write_traces_csv(std::ostream &os, std::size_t link_index,
                             const std::vector<CirTrace> &traces, bool header = true) {
  if (header) os << "link,realization,bin,energy\n";
  os.precision(17);
  for (std::size_t r = 0; r < traces.size(); ++r)
    for (std::size_t k = 0; k < traces[r].energies.size(); ++k)
      os << link_index << ',' << r << ',' << (k + 1) << ',' << traces[r].energies[k] << '\n';
}

}  // namespace hmmrange
