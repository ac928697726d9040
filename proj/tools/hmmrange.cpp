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

// Command-line front end: simulate, observe, train, estimate, sweep,
// fp-trials, localize, report. Every command writes into --out and leaves a
// manifest.json listing its files and parameters.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hmmrange/baselines.hpp"
#include "hmmrange/experiment.hpp"
#include "hmmrange/hmm.hpp"
#include "hmmrange/localizer.hpp"
#include "hmmrange/observation.hpp"
#include "hmmrange/scene_io.hpp"

namespace fs = std::filesystem;
using namespace hmmrange;

namespace {

struct SceneOverrides {
  std::optional<double> bin_width;
  std::optional<std::size_t> bin_count;
  std::optional<std::size_t> lead_bins;
  std::optional<std::size_t> path_count;
  std::optional<double> decay_constant;
  std::optional<double> amplitude_scale;
  std::optional<double> noise_std;
  std::optional<double> person_gain;
  std::optional<double> tail;
  std::optional<std::size_t> onset_bins;
  std::optional<std::size_t> integration;
  std::optional<double> wall_db;

  void add(CLI::App *app) {
    app->add_option("--bin-width", bin_width, "Delay-bin duration T in seconds (preset: 1e-9)");
    app->add_option("--bin-count", bin_count, "Bins per observation window n (preset: 48, through-wall 60)");
    app->add_option("--lead-bins", lead_bins, "Noise-only amplitude samples before bin 1 (preset: 8)");
    app->add_option("--path-count", path_count, "Clutter paths per link");
    app->add_option("--decay-constant", decay_constant, "Power-delay-profile decay in seconds");
    app->add_option("--path-amplitude-scale", amplitude_scale, "Clutter amplitude scale (preset: 1)");
    app->add_option("--noise-std", noise_std, "Receiver noise std per capture before integration");
    app->add_option("--person-gain", person_gain, "Person path energy relative to the clutter at k*");
    app->add_option("--tail-perturbation", tail, "Log-std of the person's effect on bins after k*");
    app->add_option("--onset-bins", onset_bins, "Bins over which the person's effect ramps up");
    app->add_option("--integration", integration, "Pulse integration factor");
    app->add_option("--wall-db", wall_db, "Wall attenuation in dB");
  }

  void apply(Scene &s) const {
    if (bin_width) s.geometry.bin_width = *bin_width;
    if (bin_count) s.geometry.bin_count = *bin_count;
    if (lead_bins) s.geometry.lead_bins = *lead_bins;
    if (path_count) s.clutter.path_count = *path_count;
    if (decay_constant) s.clutter.decay_constant = *decay_constant;
    if (amplitude_scale) s.clutter.path_amplitude_scale = *amplitude_scale;
    if (noise_std) s.clutter.noise_std = *noise_std;
    if (person_gain) s.clutter.person_path_gain = *person_gain;
    if (tail) s.clutter.person_tail_perturbation = *tail;
    if (onset_bins) s.clutter.person_onset_bins = *onset_bins;
    if (integration) s.clutter.integration_factor = *integration;
    if (wall_db) s.clutter.wall_attenuation_db = *wall_db;
    s.validate();
  }
};

struct HmmFlags {
  double epsilon = kDefaultEscape;
  std::size_t max_iters = 15;
  double tol = 1e-4;
  std::string refit = "hard";

  void add(CLI::App *app, bool with_epsilon = true) {
    if (with_epsilon)
      app->add_option("--epsilon", epsilon, "Escape probability floor P10")->capture_default_str();
    app->add_option("--max-iters", max_iters, "Baum-Welch iteration limit")->capture_default_str();
    app->add_option("--tol", tol, "Baum-Welch stop when the log-likelihood gain is below this")
        ->capture_default_str();
    app->add_option("--refit", refit, "Emission refit: hard (argmax partitions) or soft")
        ->capture_default_str()
        ->check(CLI::IsMember({"hard", "soft"}));
  }

  BaumWelchOptions options() const {
    require(max_iters >= 1, "--max-iters must be at least 1");
    require(tol >= 0.0, "--tol must be nonnegative");
    return {max_iters, tol, refit == "soft" ? EmissionRefit::soft : EmissionRefit::hard};
  }
};

struct ImageFlags {
  double pitch = 0.1;
  double p = 0.2;
  double sigma = 0.2;
  bool count_nonzero = false;

  void add(CLI::App *app) {
    app->add_option("--pixel-pitch", pitch, "Pixel pitch in meters")->capture_default_str();
    app->add_option("--p-norm", p, "Exponent of the per-pixel p-norm fusion")->capture_default_str();
    app->add_option("--smoothing-sigma", sigma, "Gaussian blur sigma in meters")->capture_default_str();
    app->add_flag("--count-nonzero", count_nonzero, "Fuse by counting links with nonzero evidence");
  }

  LocalizationOptions options() const {
    LocalizationOptions o;
    o.pixel_pitch = pitch;
    o.image.p = p;
    o.image.smoothing_sigma = sigma;
    o.image.count_nonzero = count_nonzero;
    return o;
  }
};

fs::path prepare_out(const std::string &out) {
  require(!out.empty(), "--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

std::vector<LabeledObservation> attach_truth(const std::vector<ObservationVector> &obs, const fs::path &truth_csv) {
  std::ifstream in(truth_csv);
  require(static_cast<bool>(in), "cannot open '" + truth_csv.string() + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("point,link,k_star", 0) == 0,
          "truth CSV header must be point,link,k_star");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> truth;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    require(std::getline(ss, a, ',') && std::getline(ss, b, ',') && std::getline(ss, c, ','),
            "malformed truth CSV line");
    try {
      truth[{std::stoull(a), std::stoull(b)}] = std::stoull(c);
    } catch (const std::logic_error &) {
      throw Error("malformed number in truth CSV");
    }
  }
  std::vector<LabeledObservation> out;
  for (const auto &o : obs) {
    const auto it = truth.find({o.point, o.link});
    require(it != truth.end(), "no truth for point " + std::to_string(o.point) + " link " + std::to_string(o.link));
    out.push_back({o, it->second});
  }
  return out;
}

std::vector<ObservationVector> load_observations(const std::string &path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  return read_observations_csv(in);
}

void write_truth_csv(std::ostream &os, const std::vector<LabeledObservation> &data) {
  os << "point,link,k_star\n";
  for (const auto &d : data) os << d.obs.point << ',' << d.obs.link << ',' << d.k_star << '\n';
}

json metrics_json(const DelayMetrics &m) {
  return {{"rmse_ns", m.rmse_ns},
          {"bias_ns", m.bias_ns},
          {"fn_rate", m.fn_rate},
          {"count", m.count},
          {"false_negatives", m.false_negatives}};
}

void write_records_csv(std::ostream &os, const std::string &method, const std::vector<EstimateRecord> &records,
                       const DelayMetrics &m, bool header) {
  if (header) os << "method,point,link,truth,estimate,error_ns\n";
  os.precision(10);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    os << method << ',' << r.point << ',' << r.link << ',' << r.truth << ',';
    if (r.estimate) os << *r.estimate;
    os << ',' << m.errors_ns[i] << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string &scene_arg, const SceneOverrides &ov, std::size_t cal, std::size_t test,
                 std::uint64_t seed, const std::string &out) {
  Scene scene = load_scene(scene_arg, seed);
  ov.apply(scene);
  const auto dir = prepare_out(out);
  const SceneData d = capture_scene(scene, cal, test, seed);
  Manifest man(dir, "simulate");
  man.set("scene", scene_arg);
  man.set("seed", seed);
  man.set("calibration_count", cal);
  man.set("test_count", test);
  man.write_json("scene.json", scene_to_json(scene), "scene geometry and clutter model");
  {
    auto os = man.open("calibration.csv", "empty-room bin energies");
    for (std::size_t m = 0; m < d.links(); ++m) write_traces_csv(os, m, d.calibration[m], m == 0);
  }
  {
    auto os = man.open("test.csv", "person-present bin energies");
    os << "point,link,realization,bin,energy\n";
    os.precision(17);
    for (std::size_t m = 0; m < d.links(); ++m)
      for (std::size_t p = 0; p < d.points(); ++p)
        for (std::size_t r = 0; r < d.test[m][p].size(); ++r)
          for (std::size_t k = 0; k < d.test[m][p][r].energies.size(); ++k)
            os << p << ',' << m << ',' << r << ',' << (k + 1) << ',' << d.test[m][p][r].energies[k] << '\n';
  }
  {
    auto os = man.open("truth.csv", "ground-truth bin per (point, link)");
    os << "point,link,k_star\n";
    for (std::size_t p = 0; p < d.points(); ++p)
      for (std::size_t m = 0; m < d.links(); ++m) os << p << ',' << m << ',' << d.truth(m, p) << '\n';
  }
  man.finish();
  std::cout << "simulated " << d.links() << " links x " << d.points() << " points into " << dir.string() << '\n';
  return 0;
}

int cmd_observe(const std::string &data_dir, const std::string &out) {
  const fs::path in(data_dir);
  const Scene scene = scene_from_json(read_json_file(in / "scene.json"));
  std::ifstream cal_in(in / "calibration.csv");
  require(static_cast<bool>(cal_in), "cannot open calibration.csv in '" + data_dir + "'");
  const auto cal_rows = read_keyed_csv(cal_in, 2, "link,realization,bin,energy");
  std::ifstream test_in(in / "test.csv");
  require(static_cast<bool>(test_in), "cannot open test.csv in '" + data_dir + "'");
  const auto test_rows = read_keyed_csv(test_in, 3, "point,link,realization,bin,energy");

  std::map<std::size_t, SampleSet> cal;
  for (const auto &[key, v] : cal_rows) {
    auto &s = cal[key[0]];
    s.link = key[0];
    s.samples.push_back(v);
  }
  std::map<std::pair<std::size_t, std::size_t>, SampleSet> test;
  for (const auto &[key, v] : test_rows) {
    auto &s = test[{key[0], key[1]}];
    s.link = key[1];
    s.condition = Condition::test;
    s.samples.push_back(v);
  }
  std::vector<LabeledObservation> labeled;
  for (const auto &[key, set] : test) {
    const auto it = cal.find(key.second);
    require(it != cal.end(), "no calibration captures for link " + std::to_string(key.second));
    auto o = observe(it->second, set, key.first);
    labeled.push_back({std::move(o), scene.truth_bin(key.second, scene.geometry.person_points.at(key.first))});
  }
  const auto dir = prepare_out(out);
  Manifest man(dir, "observe");
  man.set("data", data_dir);
  {
    auto os = man.open("observations.csv", "symmetric KL observation per (point, link, bin)");
    write_observations_csv(os, unlabeled(labeled));
  }
  {
    auto os = man.open("truth.csv", "ground-truth bin per (point, link)");
    write_truth_csv(os, labeled);
  }
  man.finish();
  std::cout << "wrote " << labeled.size() << " observation vectors\n";
  return 0;
}

int cmd_train(const std::string &obs_path, const std::string &truth_path, double epsilon, const std::string &out) {
  const auto data = attach_truth(load_observations(obs_path), truth_path);
  const HmmParams p = init_params(data, epsilon);
  const auto dir = prepare_out(out);
  Manifest man(dir, "train");
  man.set("observations", obs_path);
  man.set("truth", truth_path);
  man.set("epsilon_escape", epsilon);
  man.write_json("lambda.json", params_to_json(p), "HMM parameters from labeled observations");
  man.finish();
  std::cout << params_to_json(p).dump() << '\n';
  return 0;
}

int cmd_estimate(const std::string &obs_path, const std::string &lambda_path, const std::string &truth_path,
                 const HmmFlags &hf, bool no_refine, double bin_width, const std::string &out) {
  const auto obs = load_observations(obs_path);
  require(!obs.empty(), "no observation vectors in '" + obs_path + "'");
  const HmmParams p0 = params_from_json(read_json_file(lambda_path));
  BaumWelchResult res;
  if (no_refine) {
    res.params = p0;
    double total = 0.0;
    for (const auto &o : obs) {
      res.tracks.push_back(infer(o, p0));
      total += res.tracks.back().loglik;
    }
    res.loglik = {total};
  } else {
    res = baum_welch(obs, p0, hf.options());
  }
  const auto dir = prepare_out(out);
  Manifest man(dir, "estimate");
  man.set("observations", obs_path);
  man.set("lambda", lambda_path);
  man.set("baum_welch", !no_refine);
  man.set("max_iters", hf.max_iters);
  man.set("tol", hf.tol);
  man.set("refit", hf.refit);
  man.set("iterations", res.iterations);
  {
    auto os = man.open("estimates.csv", "delay-bin estimate per (point, link); empty when not detected");
    os << "point,link,k_hat\n";
    for (const auto &t : res.tracks) {
      os << t.point << ',' << t.link << ',';
      if (t.k_star_hat) os << *t.k_star_hat;
      os << '\n';
    }
  }
  {
    auto os = man.open("posteriors.csv", "state-1 posterior per (point, link, bin)");
    os << "point,link,bin,alpha\n";
    os.precision(12);
    for (const auto &t : res.tracks)
      for (std::size_t k = 0; k < t.alpha.size(); ++k)
        os << t.point << ',' << t.link << ',' << (k + 1) << ',' << t.alpha[k] << '\n';
  }
  {
    auto os = man.open("loglik.csv", "total log-likelihood per Baum-Welch iteration");
    os << "iteration,loglik\n";
    os.precision(17);
    for (std::size_t i = 0; i < res.loglik.size(); ++i) os << i << ',' << res.loglik[i] << '\n';
  }
  man.write_json("lambda_final.json", params_to_json(res.params), "parameters after refinement");
  if (!truth_path.empty()) {
    const auto labeled = attach_truth(obs, truth_path);
    man.set("bin_width", bin_width);
    const auto records = records_from_tracks(labeled, res.tracks);
    const auto m = delay_metrics(records, bin_width, obs.front().size());
    man.write_json("metrics.json", metrics_json(m), "delay error summary");
    auto os = man.open("per_point.csv", "per-estimate errors");
    write_records_csv(os, "hmm", records, m, true);
    std::cout << "rmse_ns " << m.rmse_ns << " fn_rate " << m.fn_rate << '\n';
  }
  man.finish();
  return 0;
}

int cmd_sweep(const std::string &obs_path, const std::string &truth_path, std::size_t points,
              std::optional<double> gamma, double bin_width, const std::string &out) {
  const auto data = attach_truth(load_observations(obs_path), truth_path);
  require(!data.empty(), "no observation vectors");
  const auto grid = gamma ? std::vector<double>{*gamma} : default_gamma_grid(data, points);
  const auto sw = ftc_sweep(data, grid, bin_width);
  const auto dir = prepare_out(out);
  Manifest man(dir, "sweep");
  man.set("observations", obs_path);
  man.set("truth", truth_path);
  man.set("gamma_points", points);
  man.set("bin_width", bin_width);
  {
    auto os = man.open("sweep.csv", "FTC RMSE and misses per threshold");
    write_sweep_csv(os, sw);
  }
  man.write_json("summary.json",
                 {{"best_gamma", sw.best_gamma}, {"best_rmse_ns", sw.best_rmse()}, {"points", grid.size()}},
                 "best threshold");
  man.finish();
  std::cout << "best gamma " << sw.best_gamma << " rmse_ns " << sw.best_rmse() << '\n';
  return 0;
}

int cmd_fp(const std::string &scene_arg, const SceneOverrides &ov, std::size_t cal, std::size_t trials,
           const std::string &method, const std::string &lambda_path, std::optional<double> gamma,
           std::uint64_t seed, const std::string &out) {
  Scene scene = load_scene(scene_arg, seed);
  ov.apply(scene);
  require(cal >= 2, "--calibration-count must be at least 2");
  const auto pools = as_sample_sets(capture_empty_pools(scene, 2 * cal, derive_seed(seed, 0xE0ULL)));
  FpResult r;
  if (method == "hmm") {
    require(!lambda_path.empty(), "--lambda is required for the hmm detector");
    r = false_positive_trials(pools, trials, seed, params_from_json(read_json_file(lambda_path)));
  } else {
    require(gamma.has_value(), "--gamma is required for the ftc detector");
    const double g = *gamma;
    r = false_positive_trials(pools, trials, seed,
                              [g](const ObservationVector &o) { return ftc_estimate(o, g).has_value(); });
  }
  const auto dir = prepare_out(out);
  Manifest man(dir, "fp-trials");
  man.set("scene", scene_arg);
  man.set("method", method);
  man.set("calibration_count", cal);
  man.set("trials_per_link", trials);
  man.set("seed", seed);
  if (gamma) man.set("gamma", *gamma);
  if (!lambda_path.empty()) man.set("lambda", lambda_path);
  man.write_json("fp.json", {{"trials", r.trials}, {"detections", r.detections}, {"fp_rate", r.rate()}},
                 "empty-room false-positive rate");
  man.finish();
  std::cout << "fp_rate " << r.rate() << " (" << r.detections << " / " << r.trials << ")\n";
  return 0;
}

int cmd_localize(const std::string &scene_arg, const std::string &train_arg, const SceneOverrides &ov,
                 std::size_t cal, std::size_t test, const HmmFlags &hf, const ImageFlags &imf,
                 const std::string &lambda_path, std::optional<std::size_t> image_point, std::uint64_t seed,
                 const std::string &out) {
  Scene scene = load_scene(scene_arg, derive_seed(seed, 0x10CULL));
  ov.apply(scene);
  const SceneData data = capture_scene(scene, cal, test, derive_seed(seed, 0x7E57ULL));
  HmmParams p0;
  if (!lambda_path.empty()) {
    p0 = params_from_json(read_json_file(lambda_path));
  } else {
    Scene train = load_scene(train_arg, derive_seed(seed, 0x7A1ULL));
    ov.apply(train);
    p0 = init_params(labeled_observations(capture_scene(train, cal, test, derive_seed(seed, 0x7A1ULL))), hf.epsilon);
  }
  const auto bw = baum_welch(unlabeled(labeled_observations(data)), p0, hf.options());
  const auto opts = imf.options();
  const auto rep = localization_report(data, bw.tracks, opts);

  const auto dir = prepare_out(out);
  Manifest man(dir, "localize");
  man.set("scene", scene_arg);
  man.set("train_scene", lambda_path.empty() ? json(train_arg) : json(nullptr));
  man.set("lambda", lambda_path.empty() ? json(nullptr) : json(lambda_path));
  man.set("seed", seed);
  man.set("pixel_pitch", imf.pitch);
  man.set("p_norm", imf.p);
  man.set("smoothing_sigma", imf.sigma);
  man.set("count_nonzero", imf.count_nonzero);
  man.set("iterations", bw.iterations);
  {
    auto os = man.open("localization.csv", "per-point location estimates and errors (m)");
    os << "point,truth_x,truth_y,soft_x,soft_y,hard_x,hard_y,sla_x,sla_y,soft_error,hard_error,sla_error\n";
    os.precision(10);
    for (const auto &r : rep.rows)
      os << r.point << ',' << r.truth.x << ',' << r.truth.y << ',' << r.soft.x << ',' << r.soft.y << ',' << r.hard.x
         << ',' << r.hard.y << ',' << r.sla.x << ',' << r.sla.y << ',' << r.soft_error << ',' << r.hard_error << ','
         << r.sla_error << '\n';
  }
  man.write_json("summary.json",
                 {{"rms_m", {{"soft", rep.rms_soft}, {"hard", rep.rms_hard}, {"sla", rep.rms_sla}}},
                  {"median_m", {{"soft", rep.median_soft}, {"hard", rep.median_hard}, {"sla", rep.median_sla}}},
                  {"failures", {{"soft", rep.soft_failures}, {"hard", rep.hard_failures}, {"sla", rep.sla_failures}}}},
                 "RMS and median localization error");
  if (image_point) {
    require(*image_point < data.points(), "--image-point out of range");
    const PixelGrid grid = PixelGrid::covering(scene.geometry.allowed_person_region(), opts.pixel_pitch);
    std::vector<LinkPosterior> posts;
    std::vector<LinkEstimate> ests;
    for (const auto &t : bw.tracks)
      if (t.point == *image_point) {
        posts.push_back({t, scene.tx_of(t.link), scene.rx_of(t.link), scene.geometry.bin_width});
        ests.push_back({t.k_star_hat, scene.tx_of(t.link), scene.rx_of(t.link), scene.geometry.bin_width,
                        scene.geometry.bin_count});
      }
    auto soft = presence_image_soft(posts, grid, opts.image);
    auto hard = presence_image_hard(ests, grid, opts.image);
    {
      auto os = man.open("image_soft.csv", "posterior-increment presence image (x, y, value)");
      write_image_csv(os, soft);
    }
    {
      auto os = man.open("image_hard.csv", "range-only presence image (x, y, value)");
      write_image_csv(os, hard);
    }
  }
  man.finish();
  std::cout << "median error (m): soft " << rep.median_soft << " hard " << rep.median_hard << " sla "
            << rep.median_sla << '\n';
  return 0;
}

struct ReportFlags {
  std::string train = "room-A";
  std::string test = "room-B";
  std::string method = "all";
  std::size_t cal = 10;
  std::size_t test_count = 10;
  double zetik_smoothing = 0.9;
  std::size_t gamma_points = 100;
  std::size_t fp_trials = 0;
  std::vector<std::size_t> window_sizes;
  std::vector<std::size_t> window_blocks{100, 100};
  std::size_t window_step = 1;
};

int cmd_report(const ReportFlags &rf, const SceneOverrides &ov, const HmmFlags &hf, std::uint64_t seed,
               const std::string &out) {
  ExperimentConfig c;
  c.train = load_scene(rf.train, derive_seed(seed, 0x7A1ULL));
  c.test = load_scene(rf.test, derive_seed(seed, 0x7E57ULL));
  ov.apply(c.train);
  ov.apply(c.test);
  c.method = parse_method(rf.method);
  c.calibration_count = rf.cal;
  c.test_count = rf.test_count;
  c.seed = seed;
  c.epsilon_escape = hf.epsilon;
  c.baum_welch = hf.options();
  require(rf.zetik_smoothing > 0.0 && rf.zetik_smoothing < 1.0, "--zetik-smoothing must lie in (0, 1)");
  c.zetik.smoothing = rf.zetik_smoothing;
  c.gamma_points = rf.gamma_points;
  c.fp_trials_per_link = rf.fp_trials;
  const auto rep = run_experiment(c);

  const auto dir = prepare_out(out);
  Manifest man(dir, "report");
  man.set("train_scene", rf.train);
  man.set("test_scene", rf.test);
  man.set("method", rf.method);
  man.set("calibration_count", rf.cal);
  man.set("test_count", rf.test_count);
  man.set("seed", seed);
  man.set("epsilon_escape", hf.epsilon);
  man.set("max_iters", hf.max_iters);
  man.set("tol", hf.tol);
  man.set("refit", hf.refit);
  man.set("zetik_smoothing", rf.zetik_smoothing);
  man.set("gamma_points", rf.gamma_points);
  man.set("fp_trials_per_link", rf.fp_trials);

  json summary = json::object();
  auto per_point = man.open("per_point.csv", "per-estimate delay errors for every method");
  bool header = true;
  for (const auto &r : rep.reports) {
    json m = metrics_json(r.metrics);
    if (r.fp_rate) m["fp_rate"] = *r.fp_rate;
    if (r.gamma) m["gamma"] = *r.gamma;
    if (r.oracle_gamma) m["oracle_gamma"] = *r.oracle_gamma;
    if (r.oracle_rmse_ns) m["oracle_rmse_ns"] = *r.oracle_rmse_ns;
    if (r.initial_params) m["initial_params"] = params_to_json(*r.initial_params);
    if (r.final_params) m["final_params"] = params_to_json(*r.final_params);
    if (r.method == "hmm") {
      m["iterations"] = r.iterations;
      m["epsilon_escape"] = hf.epsilon;
      auto os = man.open("hmm_iterations.csv", "log-likelihood and delay RMSE per Baum-Welch iteration");
      os << "iteration,loglik,rmse_ns\n";
      os.precision(17);
      for (std::size_t i = 0; i < r.loglik_per_iteration.size(); ++i)
        os << i << ',' << r.loglik_per_iteration[i] << ','
           << (i < r.rmse_per_iteration.size() ? r.rmse_per_iteration[i] : 0.0) << '\n';
    }
    if (r.zetik_smoothing) m["zetik_smoothing"] = *r.zetik_smoothing;
    if (r.method == "ftc") {
      auto a = man.open("ftc_sweep_train.csv", "FTC sweep on the training scene");
      write_sweep_csv(a, r.train_sweep);
      auto b = man.open("ftc_sweep_test.csv", "FTC sweep on the test scene (oracle)");
      write_sweep_csv(b, r.test_sweep);
    }
    summary[r.method] = m;
    write_records_csv(per_point, r.method, r.records, r.metrics, header);
    header = false;
  }
  per_point.close();

  if (!rf.window_sizes.empty()) {
    const SceneData wd = capture_scene(c.test, [&] {
      std::size_t pool = 0;
      for (auto b : rf.window_blocks) pool += b;
      return pool;
    }(), rf.test_count, derive_seed(seed, 0x3D0ULL));
    const SceneData td = capture_scene(c.train, rf.cal, rf.test_count, derive_seed(seed, 0x7A1ULL));
    const HmmParams p0 = init_params(labeled_observations(td), hf.epsilon);
    json windows = json::object();
    for (std::size_t size : rf.window_sizes) {
      const auto study = empty_room_subset_study(wd, rf.window_blocks, size, p0, hf.options(), rf.window_step);
      auto os = man.open("window_cdf_" + std::to_string(size) + ".csv", "empirical CDF of per-window delay RMSE");
      os << "rmse_ns,fraction\n";
      for (const auto &[v, f] : study.cdf()) os << v << ',' << f << '\n';
      windows[std::to_string(size)] = {{"windows", study.windows.size()}, {"median_rmse_ns", median(study.rmse_ns)}};
    }
    summary["window_study"] = windows;
  }
  man.write_json("summary.json", summary, "metrics and method metadata per method");
  man.finish();
  for (const auto &r : rep.reports)
    std::cout << r.method << ": rmse_ns " << r.metrics.rmse_ns << " fn_rate " << r.metrics.fn_rate << '\n';
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Bistatic delay estimation with a two-state HMM on simulated UWB channel impulse responses"};
  app.require_subcommand(1);

  std::string out;
  std::uint64_t seed = 1;
  std::string scene_arg = "room-A";
  std::size_t cal = 10, test = 10;
  SceneOverrides ov;
  HmmFlags hf;
  ImageFlags imf;

  auto *sim = app.add_subcommand("simulate", "Capture empty-room and person-present CIR energies");
  sim->add_option("--scene", scene_arg, "Preset (room-A, room-B, through-wall) or scene JSON")->capture_default_str();
  sim->add_option("--calibration-count", cal, "Empty-room captures per link")->capture_default_str();
  sim->add_option("--test-count", test, "Captures per (link, point)")->capture_default_str();
  sim->add_option("--seed", seed, "Master seed")->capture_default_str();
  sim->add_option("--out", out, "Output directory")->required();
  ov.add(sim);

  std::string data_dir;
  auto *obs = app.add_subcommand("observe", "Symmetric KL observation vectors from simulated captures");
  obs->add_option("--data", data_dir, "Directory written by simulate")->required();
  obs->add_option("--out", out, "Output directory")->required();

  std::string obs_path, truth_path, lambda_path;
  auto *train = app.add_subcommand("train", "Initial HMM parameters from labeled observations");
  train->add_option("--observations", obs_path, "observations.csv")->required();
  train->add_option("--truth", truth_path, "truth.csv")->required();
  train->add_option("--epsilon", hf.epsilon, "Escape probability P10")->capture_default_str();
  train->add_option("--out", out, "Output directory")->required();

  bool no_refine = false;
  double bin_width = 1e-9;
  auto *est = app.add_subcommand("estimate", "Baum-Welch refinement and per-vector delay estimates");
  est->add_option("--observations", obs_path, "observations.csv")->required();
  est->add_option("--lambda", lambda_path, "HMM parameter JSON")->required();
  est->add_option("--truth", truth_path, "Optional truth.csv for error metrics");
  est->add_flag("--no-baum-welch", no_refine, "Use the given parameters without refinement");
  est->add_option("--bin-width", bin_width, "Bin duration T in seconds, for error metrics")->capture_default_str();
  est->add_option("--out", out, "Output directory")->required();
  hf.add(est, false);

  std::size_t gamma_points = 100;
  std::optional<double> gamma;
  auto *sweep = app.add_subcommand("sweep", "First-threshold-crossing RMSE over a threshold grid");
  sweep->add_option("--observations", obs_path, "observations.csv")->required();
  sweep->add_option("--truth", truth_path, "truth.csv")->required();
  sweep->add_option("--points", gamma_points, "Log-spaced thresholds between the 1st and 99th percentile")
      ->capture_default_str();
  sweep->add_option("--gamma", gamma, "Evaluate a single threshold instead of the grid");
  sweep->add_option("--bin-width", bin_width, "Bin duration T in seconds")->capture_default_str();
  sweep->add_option("--out", out, "Output directory")->required();

  std::size_t trials = 1000;
  std::string method = "hmm";
  auto *fp = app.add_subcommand("fp-trials", "Empty-room false-positive rate from random even splits");
  fp->add_option("--scene", scene_arg, "Preset or scene JSON")->capture_default_str();
  fp->add_option("--calibration-count", cal, "Captures in each half of the split")->capture_default_str();
  fp->add_option("--trials-per-link", trials, "Random splits per link")->capture_default_str();
  fp->add_option("--method", method, "Detector: hmm or ftc")->capture_default_str()->check(CLI::IsMember({"hmm", "ftc"}));
  fp->add_option("--lambda", lambda_path, "HMM parameter JSON (hmm detector)");
  fp->add_option("--gamma", gamma, "Threshold (ftc detector)");
  fp->add_option("--seed", seed, "Master seed")->capture_default_str();
  fp->add_option("--out", out, "Output directory")->required();
  ov.add(fp);

  std::string train_arg = "room-B";
  std::optional<std::size_t> image_point;
  auto *loc = app.add_subcommand("localize", "Soft image, hard image and least-squares localization");
  loc->add_option("--scene", scene_arg, "Preset or scene JSON (at least 3 links)")->capture_default_str();
  loc->add_option("--train-scene", train_arg, "Scene used to initialize the HMM")->capture_default_str();
  loc->add_option("--lambda", lambda_path, "Initial HMM parameters instead of --train-scene");
  loc->add_option("--calibration-count", cal, "Empty-room captures per link")->capture_default_str();
  loc->add_option("--test-count", test, "Captures per (link, point)")->capture_default_str();
  loc->add_option("--image-point", image_point, "Also write both presence images for this point");
  loc->add_option("--seed", seed, "Master seed")->capture_default_str();
  loc->add_option("--out", out, "Output directory")->required();
  ov.add(loc);
  hf.add(loc);
  imf.add(loc);

  ReportFlags rf;
  auto *rep = app.add_subcommand("report", "Train-room / test-room comparison of HMM, FTC and background subtraction");
  rep->add_option("--train-scene", rf.train, "Training scene")->capture_default_str();
  rep->add_option("--test-scene", rf.test, "Test scene")->capture_default_str();
  rep->add_option("--method", rf.method, "hmm, ftc, zetik or all")->capture_default_str()
      ->check(CLI::IsMember({"hmm", "ftc", "zetik", "all"}));
  rep->add_option("--calibration-count", rf.cal, "Empty-room captures per link")->capture_default_str();
  rep->add_option("--test-count", rf.test_count, "Captures per (link, point)")->capture_default_str();
  rep->add_option("--zetik-smoothing", rf.zetik_smoothing, "Background smoothing constant")->capture_default_str();
  rep->add_option("--gamma-points", rf.gamma_points, "FTC threshold grid size")->capture_default_str();
  rep->add_option("--fp-trials-per-link", rf.fp_trials, "Empty-room trials per link (0 skips)")->capture_default_str();
  rep->add_option("--window-size", rf.window_sizes, "Calibration window sizes for the window study");
  rep->add_option("--window-blocks", rf.window_blocks, "Calibration block lengths for the window study")
      ->capture_default_str();
  rep->add_option("--window-step", rf.window_step, "Window step")->capture_default_str();
  rep->add_option("--seed", seed, "Master seed")->capture_default_str();
  rep->add_option("--out", out, "Output directory")->required();
  ov.add(rep);
  hf.add(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(scene_arg, ov, cal, test, seed, out);
    if (*obs) return cmd_observe(data_dir, out);
    if (*train) return cmd_train(obs_path, truth_path, hf.epsilon, out);
    if (*est) return cmd_estimate(obs_path, lambda_path, truth_path, hf, no_refine, bin_width, out);
    if (*sweep) return cmd_sweep(obs_path, truth_path, gamma_points, gamma, bin_width, out);
    if (*fp) return cmd_fp(scene_arg, ov, cal, trials, method, lambda_path, gamma, seed, out);
    if (*loc) return cmd_localize(scene_arg, train_arg, ov, cal, test, hf, imf, lambda_path, image_point, seed, out);
    if (*rep) return cmd_report(rf, ov, hf, seed, out);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
