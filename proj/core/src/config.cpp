#include "xsei/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xsei/common.hpp"
#include "xsei/features.hpp"

namespace xsei::harness {

using nlohmann::json;

const std::vector<std::string>& known_models() {
  static const std::vector<std::string> names = {"knn",    "cart",     "ensemble",
                                                 "linear", "lbnn_avg", "lbnn_max"};
  return names;
}

std::string to_string(GridLayout l) { return l == GridLayout::product ? "product" : "sweeps"; }

GridLayout grid_layout_from_string(const std::string& s) {
  if (s == "product") return GridLayout::product;
  if (s == "sweeps") return GridLayout::sweeps;
  throw Error("unknown grid layout '" + s + "' (expected product or sweeps)");
}

double GridCell::sample_time_ms() const {
  return signal::kBaseSamplePeriodMs * static_cast<double>(sample_factor);
}

std::string GridCell::id() const {
  return "t" + std::to_string(sample_factor) + "_snr" + format_double(snr_db) + "_s" +
         std::to_string(seed);
}

std::vector<signal::LoadProfile> default_profiles() {
  signal::LoadProfile heater;
  heater.name = "resistive";
  heater.amplitude = 10.0;
  heater.amplitude_jitter = 0.03;
  heater.harmonics = {{3, 0.02, 0.0}};
  heater.measurement_noise = 0.005;
  heater.arc_fraction = 0.5;
  heater.arc_episode_min_ms = 200.0;
  heater.arc_episode_max_ms = 500.0;
  heater.arc.shoulder = 0.2;
  heater.arc.peak_clip = 0.3;
  heater.arc.triangle_mix = 0.4;
  heater.arc.half_wave_asymmetry = 0.5;
  heater.arc.spike_rate = 2.0;
  heater.arc.spike_amplitude = 0.3;

  signal::LoadProfile smps;
  smps.name = "switch_mode";
  smps.amplitude = 6.0;
  smps.amplitude_jitter = 0.03;
  smps.harmonics = {{3, 0.25, 0.3}, {5, 0.12, 0.6}, {7, 0.05, 0.9}};
  smps.ripple_amplitude = 0.03;
  smps.ripple_frequency_hz = 2500.0;
  smps.measurement_noise = 0.005;
  smps.arc_fraction = 0.5;
  smps.arc_episode_min_ms = 200.0;
  smps.arc_episode_max_ms = 500.0;
  smps.arc.shoulder = 0.2;
  smps.arc.peak_clip = 0.3;
  smps.arc.triangle_mix = 0.4;
  smps.arc.half_wave_asymmetry = 0.5;
  smps.arc.spike_rate = 2.0;
  smps.arc.spike_amplitude = 0.3;
  return {heater, smps};
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.dataset.profiles = default_profiles();
  c.features = features::known_features();
  c.models = known_models();
  return c;
}

void ExperimentConfig::validate() const {
  if (dataset.profiles.empty()) throw Error("config: at least one load profile is required");
  for (const auto& p : dataset.profiles) p.validate();
  if (dataset.windows_per_profile == 0) throw Error("config: windows_per_profile must be >= 1");
  if (dataset.window_width < 2 || dataset.window_step == 0) {
    throw Error("config: window width must be >= 2 and step >= 1");
  }
  if (dataset.windows_per_recording == 0) throw Error("config: windows_per_recording must be >= 1");
  features::FeaturePool pool(features);
  for (const auto& m : models) {
    if (std::find(known_models().begin(), known_models().end(), m) == known_models().end()) {
      throw Error("config: unknown model '" + m + "'");
    }
  }
  for (const auto& g : eval.ground_truth) {
    if (!pool.contains(g)) throw Error("config: ground-truth feature '" + g + "' is not in the pool");
  }
  if (eval.ground_truth.empty()) throw Error("config: ground-truth feature set is empty");
  if (eval.top_k == 0 || eval.top_k > pool.size()) throw Error("config: top_k must be in [1, pool size]");
  if (eval.regions == 0) throw Error("config: region count must be >= 1");
  if (!(eval.threshold >= 0.0 && eval.threshold <= 1.0)) throw Error("config: threshold must be in [0,1]");
  if (zoo.knn_k == 0) throw Error("config: knn_k must be >= 1");
  if (zoo.ensemble.size == 0) throw Error("config: ensemble size must be >= 1");
  if (zoo.num_classes != 2) throw Error("config: the synthetic data has exactly two classes");
  zoo.lbnn.adam.validate();
  if (zoo.lbnn.batch_size == 0) throw Error("config: lbnn batch_size must be >= 1");
  if (probes.count == 0) throw Error("config: probe count must be >= 1");
  if (!(probes.start_fraction >= 0.0 && probes.length_fraction > 0.0 &&
        probes.start_fraction + probes.length_fraction <= 1.0)) {
    throw Error("config: probe span must lie inside the window");
  }
  if (grid.sample_factors.empty() || grid.snrs.empty() || grid.seeds.empty()) {
    throw Error("config: grid axes must be nonempty");
  }
  for (auto f : grid.sample_factors) {
    if (f == 0 || f > dataset.window_width / 2) throw Error("config: invalid sample factor");
  }
  if (grid.fixed_factor == 0) throw Error("config: fixed_factor must be >= 1");
  if (!(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction < 1.0)) {
    throw Error("config: split fractions must leave a nonempty test share");
  }
}

namespace {

json profile_json(const signal::LoadProfile& p) {
  json h = json::array();
  for (const auto& x : p.harmonics) {
    h.push_back({{"order", x.order}, {"relative_amplitude", x.relative_amplitude},
                 {"phase_rad", x.phase_rad}});
  }
  return {{"name", p.name},
          {"amplitude", p.amplitude},
          {"amplitude_jitter", p.amplitude_jitter},
          {"fundamental_hz", p.fundamental_hz},
          {"random_phase", p.random_phase},
          {"harmonics", h},
          {"ripple_amplitude", p.ripple_amplitude},
          {"ripple_frequency_hz", p.ripple_frequency_hz},
          {"measurement_noise", p.measurement_noise},
          {"sample_period_ms", p.sample_period_ms},
          {"arc_fraction", p.arc_fraction},
          {"arc_episode_min_ms", p.arc_episode_min_ms},
          {"arc_episode_max_ms", p.arc_episode_max_ms},
          {"arc",
           {{"shoulder", p.arc.shoulder},
            {"peak_clip", p.arc.peak_clip},
            {"triangle_mix", p.arc.triangle_mix},
            {"half_wave_asymmetry", p.arc.half_wave_asymmetry},
            {"spike_rate", p.arc.spike_rate},
            {"spike_amplitude", p.arc.spike_amplitude},
            {"spike_frequency_hz", p.arc.spike_frequency_hz},
            {"spike_decay_ms", p.arc.spike_decay_ms}}}};
}

signal::LoadProfile profile_from(const json& j) {
  signal::LoadProfile p;
  p.name = j.at("name").get<std::string>();
  p.amplitude = j.at("amplitude").get<double>();
  p.amplitude_jitter = j.at("amplitude_jitter").get<double>();
  p.fundamental_hz = j.at("fundamental_hz").get<double>();
  p.random_phase = j.at("random_phase").get<bool>();
  for (const auto& h : j.at("harmonics")) {
    p.harmonics.push_back({h.at("order").get<int>(), h.at("relative_amplitude").get<double>(),
                           h.value("phase_rad", 0.0)});
  }
  p.ripple_amplitude = j.at("ripple_amplitude").get<double>();
  p.ripple_frequency_hz = j.at("ripple_frequency_hz").get<double>();
  p.measurement_noise = j.at("measurement_noise").get<double>();
  p.sample_period_ms = j.at("sample_period_ms").get<double>();
  p.arc_fraction = j.at("arc_fraction").get<double>();
  p.arc_episode_min_ms = j.at("arc_episode_min_ms").get<double>();
  p.arc_episode_max_ms = j.at("arc_episode_max_ms").get<double>();
  const auto& a = j.at("arc");
  p.arc.shoulder = a.at("shoulder").get<double>();
  p.arc.peak_clip = a.at("peak_clip").get<double>();
  p.arc.triangle_mix = a.at("triangle_mix").get<double>();
  p.arc.half_wave_asymmetry = a.at("half_wave_asymmetry").get<double>();
  p.arc.spike_rate = a.at("spike_rate").get<double>();
  p.arc.spike_amplitude = a.at("spike_amplitude").get<double>();
  p.arc.spike_frequency_hz = a.at("spike_frequency_hz").get<double>();
  p.arc.spike_decay_ms = a.at("spike_decay_ms").get<double>();
  return p;
}

json config_json(const ExperimentConfig& c) {
  json profiles = json::array();
  for (const auto& p : c.dataset.profiles) profiles.push_back(profile_json(p));
  const auto& e = c.zoo.ensemble;
  const auto& l = c.zoo.linear;
  const auto& t = c.zoo.lbnn;
  return {
      {"seed", c.seed},
      {"dataset",
       {{"profiles", profiles},
        {"windows_per_profile", c.dataset.windows_per_profile},
        {"window_width", c.dataset.window_width},
        {"window_step", c.dataset.window_step},
        {"windows_per_recording", c.dataset.windows_per_recording},
        {"min_arc_fraction", c.dataset.window_options.min_arc_fraction},
        {"discard_ambiguous", c.dataset.window_options.discard_ambiguous}}},
      {"features", c.features},
      {"models", c.models},
      {"zoo",
       {{"knn_k", c.zoo.knn_k},
        {"tree_max_depth", c.zoo.tree_max_depth},
        {"tree_min_leaf", c.zoo.tree_min_leaf},
        {"num_classes", c.zoo.num_classes},
        {"ensemble",
         {{"size", e.size},
          {"max_depth", e.max_depth},
          {"min_leaf", e.min_leaf},
          {"bootstrap", e.bootstrap},
          {"max_features", e.max_features}}},
        {"linear",
         {{"penalty", models::to_string(l.penalty)},
          {"strength", l.strength},
          {"max_iterations", l.max_iterations},
          {"tolerance", l.tolerance}}},
        {"lbnn",
         {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.adam.learning_rate},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"epsilon", t.adam.epsilon},
          {"decay_every", t.adam.decay_every},
          {"decay_factor", t.adam.decay_factor}}}}},
      {"explain",
       {{"ground_truth", c.eval.ground_truth},
        {"top_k", c.eval.top_k},
        {"removal", explain::to_string(c.eval.removal)},
        {"max_explain", c.eval.max_explain},
        {"regions", c.eval.regions},
        {"threshold", c.eval.threshold},
        {"occlusion_baseline", explain::to_string(c.eval.occlusion_baseline)},
        {"region_derivation", soft::to_string(c.eval.derivation)},
        {"pairwise_tolerance", c.eval.pairwise_tolerance}}},
      {"probes",
       {{"count", c.probes.count},
        {"start_fraction", c.probes.start_fraction},
        {"length_fraction", c.probes.length_fraction}}},
      {"grid",
       {{"sample_factors", c.grid.sample_factors},
        {"snrs", c.grid.snrs},
        {"seeds", c.grid.seeds},
        {"layout", to_string(c.grid.layout)},
        {"fixed_snr", c.grid.fixed_snr},
        {"fixed_factor", c.grid.fixed_factor}}},
      {"split", {{"train", c.train_fraction}, {"val", c.val_fraction}}},
      {"prefilter", c.prefilter}};
}

ExperimentConfig config_from(const json& j) {
  ExperimentConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& d = j.at("dataset");
  for (const auto& p : d.at("profiles")) c.dataset.profiles.push_back(profile_from(p));
  c.dataset.windows_per_profile = d.at("windows_per_profile").get<std::size_t>();
  c.dataset.window_width = d.at("window_width").get<std::size_t>();
  c.dataset.window_step = d.at("window_step").get<std::size_t>();
  c.dataset.windows_per_recording = d.at("windows_per_recording").get<std::size_t>();
  c.dataset.window_options.min_arc_fraction = d.at("min_arc_fraction").get<double>();
  c.dataset.window_options.discard_ambiguous = d.at("discard_ambiguous").get<bool>();
  c.features = j.at("features").get<std::vector<std::string>>();
  c.models = j.at("models").get<std::vector<std::string>>();
  const auto& z = j.at("zoo");
  c.zoo.knn_k = z.at("knn_k").get<std::size_t>();
  c.zoo.tree_max_depth = z.at("tree_max_depth").get<std::size_t>();
  c.zoo.tree_min_leaf = z.at("tree_min_leaf").get<std::size_t>();
  c.zoo.num_classes = z.at("num_classes").get<std::size_t>();
  const auto& e = z.at("ensemble");
  c.zoo.ensemble.size = e.at("size").get<std::size_t>();
  c.zoo.ensemble.max_depth = e.at("max_depth").get<std::size_t>();
  c.zoo.ensemble.min_leaf = e.at("min_leaf").get<std::size_t>();
  c.zoo.ensemble.bootstrap = e.at("bootstrap").get<bool>();
  c.zoo.ensemble.max_features = e.at("max_features").get<std::size_t>();
  const auto& l = z.at("linear");
  c.zoo.linear.penalty = models::penalty_from_string(l.at("penalty").get<std::string>());
  c.zoo.linear.strength = l.at("strength").get<double>();
  c.zoo.linear.max_iterations = l.at("max_iterations").get<std::size_t>();
  c.zoo.linear.tolerance = l.at("tolerance").get<double>();
  const auto& t = z.at("lbnn");
  c.zoo.lbnn.epochs = t.at("epochs").get<std::size_t>();
  c.zoo.lbnn.batch_size = t.at("batch_size").get<std::size_t>();
  c.zoo.lbnn.adam.learning_rate = t.at("learning_rate").get<double>();
  c.zoo.lbnn.adam.beta1 = t.at("beta1").get<double>();
  c.zoo.lbnn.adam.beta2 = t.at("beta2").get<double>();
  c.zoo.lbnn.adam.epsilon = t.at("epsilon").get<double>();
  c.zoo.lbnn.adam.decay_every = t.at("decay_every").get<std::size_t>();
  c.zoo.lbnn.adam.decay_factor = t.at("decay_factor").get<double>();
  const auto& x = j.at("explain");
  c.eval.ground_truth = x.at("ground_truth").get<std::vector<std::string>>();
  c.eval.top_k = x.at("top_k").get<std::size_t>();
  c.eval.removal = explain::removal_from_string(x.at("removal").get<std::string>());
  c.eval.max_explain = x.at("max_explain").get<std::size_t>();
  c.eval.regions = x.at("regions").get<std::size_t>();
  c.eval.threshold = x.at("threshold").get<double>();
  c.eval.occlusion_baseline =
      explain::occlusion_baseline_from_string(x.at("occlusion_baseline").get<std::string>());
  c.eval.derivation = soft::region_derivation_from_string(x.at("region_derivation").get<std::string>());
  c.eval.pairwise_tolerance = x.at("pairwise_tolerance").get<double>();
  const auto& p = j.at("probes");
  c.probes.count = p.at("count").get<std::size_t>();
  c.probes.start_fraction = p.at("start_fraction").get<double>();
  c.probes.length_fraction = p.at("length_fraction").get<double>();
  const auto& g = j.at("grid");
  c.grid.sample_factors = g.at("sample_factors").get<std::vector<std::size_t>>();
  c.grid.snrs = g.at("snrs").get<std::vector<double>>();
  c.grid.seeds = g.at("seeds").get<std::vector<std::uint64_t>>();
  c.grid.layout = grid_layout_from_string(g.at("layout").get<std::string>());
  c.grid.fixed_snr = g.at("fixed_snr").get<double>();
  c.grid.fixed_factor = g.at("fixed_factor").get<std::size_t>();
  c.train_fraction = j.at("split").at("train").get<double>();
  c.val_fraction = j.at("split").at("val").get<double>();
  c.prefilter = j.at("prefilter").get<bool>();
  return c;
}

/// Rejects keys of `user` that `reference` does not have, recursing into objects.
void check_keys(const json& user, const json& reference, const std::string& where) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    if (!reference.contains(key)) throw Error("config: unknown key '" + where + key + "'");
    if (value.is_object() && reference.at(key).is_object()) {
      check_keys(value, reference.at(key), where + key + ".");
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw Error("config must be a JSON object");
  json base = config_json(default_config());
  base["jobs"] = 1;
  check_keys(user, base, "");
  try {
    if (user.contains("dataset") && user["dataset"].contains("profiles")) {
      const json profile_defaults = profile_json(signal::LoadProfile{});
      json merged = json::array();
      for (const auto& p : user["dataset"]["profiles"]) {
        check_keys(p, profile_defaults, "dataset.profiles.");
        json full = profile_defaults;
        full.merge_patch(p);
        merged.push_back(full);
      }
      user["dataset"]["profiles"] = merged;
    }
    json full = base;
    full.merge_patch(user);
    ExperimentConfig c = config_from(full);
    c.jobs = full.at("jobs").get<std::size_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::string config_hash(const ExperimentConfig& config) {
  return sha256_hex(config_json(config).dump());
}

std::vector<GridCell> expand_grid(const GridConfig& grid) {
  std::vector<GridCell> cells;
  const auto add = [&cells](GridCell c) {
    if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
  };
  for (auto seed : grid.seeds) {
    if (grid.layout == GridLayout::product) {
      for (auto f : grid.sample_factors) {
        for (double s : grid.snrs) add({f, s, seed});
      }
    } else {
      for (auto f : grid.sample_factors) add({f, grid.fixed_snr, seed});
      for (double s : grid.snrs) add({grid.fixed_factor, s, seed});
    }
  }
  return cells;
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error("empty entry in list '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw Error("empty list");
  return out;
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(text)) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s[0] == '-') throw Error("'" + s + "' is not a nonnegative integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || !std::isfinite(v)) throw Error("'" + s + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text) { return split_list(text); }

}  // namespace xsei::harness
