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
 * \file scene_io.hpp
 * \brief JSON forms of scenes and HMM parameters, CSV readers for captures,
 *        and the output manifest.
 *
 * A scene file is a JSON object. It may name a preset ("preset": "room-A")
 * and override any field; without a preset every geometry field is required.
 *
 *   {
 *     "name": "lab", "seed": 7,
 *     "geometry": {
 *       "tx": [[0, 0]], "rx": [[4, 0]], "person_points": [[2, 1]],
 *       "room": [-1, -1, 5, 3], "person_region": null,
 *       "bin_width": 1e-9, "bin_count": 48, "lead_bins": 8
 *     },
 *     "clutter": { "path_count": 640, "noise_std": 1.0, ... },
 *     "links": [[0, 0]]
 *   }
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hmmrange/cir_sim.hpp"
#include "hmmrange/common.hpp"
#include "hmmrange/experiment.hpp"
#include "hmmrange/hmm.hpp"

namespace hmmrange {

using json = nlohmann::json;

namespace detail {

inline Point point_from(const json &j) {
  require(j.is_array() && j.size() == 2, "a point must be a [x, y] array");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

inline json point_to(Point p) { return json::array({p.x, p.y}); }

inline Rect rect_from(const json &j) {
  require(j.is_array() && j.size() == 4, "a rectangle must be a [x0, y0, x1, y1] array");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

inline json rect_to(const Rect &r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

inline std::vector<Point> points_from(const json &j) {
  require(j.is_array(), "expected an array of points");
  std::vector<Point> out;
  for (const auto &p : j) out.push_back(point_from(p));
  return out;
}

inline json points_to(const std::vector<Point> &v) {
  json a = json::array();
  for (const auto &p : v) a.push_back(point_to(p));
  return a;
}

template <typename T>
void maybe(const json &j, const char *key, T &field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace detail

inline json scene_to_json(const Scene &s) {
  const auto &g = s.geometry;
  const auto &c = s.clutter;
  json links = json::array();
  for (const auto &l : s.links) links.push_back(json::array({l.tx, l.rx}));
  return {
      {"name", s.name},
      {"seed", s.seed},
      {"geometry",
       {{"tx", detail::points_to(g.tx_positions)},
        {"rx", detail::points_to(g.rx_positions)},
        {"person_points", detail::points_to(g.person_points)},
        {"room", detail::rect_to(g.room_bounds)},
        {"person_region", g.person_region ? detail::rect_to(*g.person_region) : json(nullptr)},
        {"bin_width", g.bin_width},
        {"bin_count", g.bin_count},
        {"lead_bins", g.lead_bins}}},
      {"clutter",
       {{"path_count", c.path_count},
        {"decay_constant", c.decay_constant},
        {"path_amplitude_scale", c.path_amplitude_scale},
        {"noise_std", c.noise_std},
        {"person_path_gain", c.person_path_gain},
        {"person_tail_perturbation", c.person_tail_perturbation},
        {"person_onset_bins", c.person_onset_bins},
        {"integration_factor", c.integration_factor},
        {"wall_attenuation_db", c.wall_attenuation_db}}},
      {"links", links},
  };
}

/// Builds a scene from JSON, starting from a preset when one is named.
inline Scene scene_from_json(const json &j) {
  try {
    require(j.is_object(), "scene JSON must be an object");
    Scene s;
    const bool preset = j.contains("preset");
    if (preset) s = preset_scene(j.at("preset").get<std::string>(), j.value("seed", std::uint64_t{1}));
    detail::maybe(j, "name", s.name);
    detail::maybe(j, "seed", s.seed);
    auto &g = s.geometry;
    if (j.contains("geometry")) {
      const auto &jg = j.at("geometry");
      if (!preset)
        for (const char *key : {"tx", "rx", "person_points", "room"})
          require(jg.contains(key), std::string("scene geometry is missing '") + key + "'");
      if (jg.contains("tx")) g.tx_positions = detail::points_from(jg.at("tx"));
      if (jg.contains("rx")) g.rx_positions = detail::points_from(jg.at("rx"));
      if (jg.contains("person_points")) g.person_points = detail::points_from(jg.at("person_points"));
      if (jg.contains("room")) g.room_bounds = detail::rect_from(jg.at("room"));
      if (jg.contains("person_region")) {
        if (jg.at("person_region").is_null())
          g.person_region.reset();
        else
          g.person_region = detail::rect_from(jg.at("person_region"));
      }
      detail::maybe(jg, "bin_width", g.bin_width);
      detail::maybe(jg, "bin_count", g.bin_count);
      detail::maybe(jg, "lead_bins", g.lead_bins);
    } else {
      require(preset, "scene JSON needs either a preset or a geometry block");
    }
    if (j.contains("clutter")) {
      const auto &jc = j.at("clutter");
      auto &c = s.clutter;
      detail::maybe(jc, "path_count", c.path_count);
      detail::maybe(jc, "decay_constant", c.decay_constant);
      detail::maybe(jc, "path_amplitude_scale", c.path_amplitude_scale);
      detail::maybe(jc, "noise_std", c.noise_std);
      detail::maybe(jc, "person_path_gain", c.person_path_gain);
      detail::maybe(jc, "person_tail_perturbation", c.person_tail_perturbation);
      detail::maybe(jc, "person_onset_bins", c.person_onset_bins);
      detail::maybe(jc, "integration_factor", c.integration_factor);
      detail::maybe(jc, "wall_attenuation_db", c.wall_attenuation_db);
    }
    if (j.contains("links")) {
      s.links.clear();
      for (const auto &l : j.at("links")) {
        require(l.is_array() && l.size() == 2, "a link must be a [tx, rx] index pair");
        s.links.push_back({l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>()});
      }
    } else if (!preset) {
      require(g.tx_positions.size() == g.rx_positions.size(), "links must be listed when tx and rx counts differ");
      for (std::size_t i = 0; i < g.tx_positions.size(); ++i) s.links.push_back({i, i});
    }
    if (s.name.empty()) s.name = "custom";
    s.validate();
    return s;
  } catch (const json::exception &e) {
    throw Error(std::string("invalid scene JSON: ") + e.what());
  }
}

/// A preset name or a path to a scene JSON file.
inline Scene load_scene(const std::string &name_or_path, std::uint64_t seed) {
  if (name_or_path == "room-A" || name_or_path == "room-B" || name_or_path == "through-wall")
    return preset_scene(name_or_path, seed);
  std::ifstream in(name_or_path);
  require(static_cast<bool>(in), "cannot open scene file '" + name_or_path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw Error("cannot parse scene file '" + name_or_path + "': " + e.what());
  }
  return scene_from_json(j);
}

inline json params_to_json(const HmmParams &p) {
  return {
      {"pi", {p.pi[0], p.pi[1]}},
      {"trans", {{p.trans[0][0], p.trans[0][1]}, {p.trans[1][0], p.trans[1][1]}}},
      {"emit",
       {{{"location", p.emit[0].location}, {"scale", p.emit[0].scale}},
        {{"location", p.emit[1].location}, {"scale", p.emit[1].scale}}}},
      {"epsilon_escape", p.epsilon_escape},
  };
}

inline HmmParams params_from_json(const json &j) {
  try {
    HmmParams p;
    p.pi = {j.at("pi").at(0).get<double>(), j.at("pi").at(1).get<double>()};
    for (int i = 0; i < 2; ++i) {
      p.trans[i] = {j.at("trans").at(i).at(0).get<double>(), j.at("trans").at(i).at(1).get<double>()};
      p.emit[i] = {j.at("emit").at(i).at("location").get<double>(), j.at("emit").at(i).at("scale").get<double>()};
    }
    p.epsilon_escape = j.value("epsilon_escape", kDefaultEscape);
    p.validate();
    return p;
  } catch (const json::exception &e) {
    throw Error(std::string("invalid HMM parameter JSON: ") + e.what());
  }
}

inline json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open '" + path.string() + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception &e) {
    throw Error("cannot parse '" + path.string() + "': " + e.what());
  }
}

/// Rows of `key_columns` integer keys, a 1-based bin and a value, grouped by
/// key with values ordered by bin.
inline std::map<std::vector<std::size_t>, std::vector<double>> read_keyed_csv(std::istream &is,
                                                                              std::size_t key_columns,
                                                                              const std::string &expected_header) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "empty CSV");
  require(line.rfind(expected_header, 0) == 0, "CSV header must be " + expected_header);
  std::map<std::vector<std::size_t>, std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> f(key_columns + 2);
    for (auto &field : f)
      require(static_cast<bool>(std::getline(ss, field, ',')), "malformed CSV line " + std::to_string(line_no));
    try {
      std::vector<std::size_t> key;
      for (std::size_t i = 0; i < key_columns; ++i) key.push_back(static_cast<std::size_t>(std::stoull(f[i])));
      const auto bin = static_cast<std::size_t>(std::stoull(f[key_columns]));
      const double value = std::stod(f[key_columns + 1]);
      require(bin >= 1, "bins are 1-based");
      rows[key].emplace_back(bin, value);
    } catch (const std::logic_error &) {
      throw Error("malformed number in CSV line " + std::to_string(line_no));
    }
  }
  std::map<std::vector<std::size_t>, std::vector<double>> out;
  for (auto &[key, entries] : rows) {
    std::sort(entries.begin(), entries.end());
    std::vector<double> v;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      require(entries[i].first == i + 1, "bins must be contiguous from 1");
      v.push_back(entries[i].second);
    }
    out[key] = std::move(v);
  }
  return out;
}

/// Files written by one command, with the command line that produced them.
class Manifest {
 public:
  Manifest(std::filesystem::path dir, std::string command) : dir_(std::move(dir)) {
    doc_["command"] = std::move(command);
    doc_["files"] = json::array();
  }

  void set(const std::string &key, json value) { doc_["parameters"][key] = std::move(value); }

  /// Opens dir/name for writing and records it.
  std::ofstream open(const std::string &name, const std::string &description) {
    const auto path = dir_ / name;
    std::ofstream out(path);
    require(static_cast<bool>(out), "cannot write '" + path.string() + "'");
    doc_["files"].push_back({{"path", name}, {"description", description}});
    return out;
  }

  void write_json(const std::string &name, const json &j, const std::string &description) {
    auto out = open(name, description);
    out << j.dump(2) << '\n';
  }

  void finish() {
    std::ofstream out(dir_ / "manifest.json");
    require(static_cast<bool>(out), "cannot write the manifest");
    out << doc_.dump(2) << '\n';
  }

  const json &document() const { return doc_; }

 private:
  std::filesystem::path dir_;
  json doc_;
};

}  // namespace hmmrange
