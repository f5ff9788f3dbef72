#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xsei/explain.hpp"
#include "xsei/models.hpp"
#include "xsei/nn.hpp"
#include "xsei/signal.hpp"
#include "xsei/soft.hpp"

namespace xsei::harness {

/// Model names understood by the zoo.
const std::vector<std::string>& known_models();

struct DatasetConfig {
  std::vector<signal::LoadProfile> profiles;
  std::size_t windows_per_profile = 300;
  std::size_t window_width = 10000;
  std::size_t window_step = 5000;
  std::size_t windows_per_recording = 20;
  signal::WindowOptions window_options;
};

struct ZooConfig {
  std::size_t knn_k = 5;
  std::size_t tree_max_depth = 8;
  std::size_t tree_min_leaf = 2;
  models::EnsembleOptions ensemble;
  models::LinearOptions linear;
  nn::TrainConfig lbnn;
  std::size_t num_classes = 2;
};

/// Arc windows with one arc burst at a fixed relative position, used for
/// occlusion.
struct ProbeConfig {
  std::size_t count = 16;
  double start_fraction = 0.4;
  double length_fraction = 0.15;
};

enum class GridLayout { product, sweeps };

std::string to_string(GridLayout l);
GridLayout grid_layout_from_string(const std::string& s);

struct GridConfig {
  std::vector<std::size_t> sample_factors{1, 2, 5, 10, 20};
  std::vector<double> snrs{-5, -3, -1, 1, 3, 5};
  std::vector<std::uint64_t> seeds{1};
  /// product: every factor x snr pair. sweeps: factors at `fixed_snr` plus
  /// snrs at `fixed_factor`.
  GridLayout layout = GridLayout::sweeps;
  double fixed_snr = 5.0;
  std::size_t fixed_factor = 10;
};

struct GridCell {
  std::size_t sample_factor = 1;
  double snr_db = 0.0;
  std::uint64_t seed = 0;

  double sample_time_ms() const;
  /// Directory-safe identifier, e.g. t10_snr-3_s1.
  std::string id() const;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  std::vector<std::string> features;
  std::vector<std::string> models;
  ZooConfig zoo;
  soft::EvalConfig eval;
  ProbeConfig probes;
  GridConfig grid;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  bool prefilter = false;
  std::size_t jobs = 1;

  void validate() const;
};

/// The two built-in load profiles: a resistive heater and a switch-mode supply.
std::vector<signal::LoadProfile> default_profiles();
ExperimentConfig default_config();

/// Parses a JSON config. Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every setting that affects results (jobs excluded).
std::string to_json(const ExperimentConfig& config);
/// SHA-256 of to_json().
std::string config_hash(const ExperimentConfig& config);

/// Grid cells in execution order, duplicates removed.
std::vector<GridCell> expand_grid(const GridConfig& grid);

/// Parses "1,2,5" style lists.
std::vector<std::size_t> parse_size_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);
std::vector<std::string> parse_name_list(const std::string& text);

}  // namespace xsei::harness
