#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xsei/config.hpp"
#include "xsei/models.hpp"
#include "xsei/nn.hpp"
#include "xsei/report.hpp"
#include "xsei/signal_io.hpp"
#include "xsei/soft.hpp"

namespace xsei::harness {

/// Synthesizes `windows_per_profile` windows for every load profile. Each
/// profile is rendered as a series of recordings of `windows_per_recording`
/// windows; recording r of profile p uses seed derive_seed(seed, "recording", {p, r}).
signal::Dataset generate_dataset(const ExperimentConfig& config);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle cut into train / val / test shares.
Split split_indices(std::size_t count, double train_fraction, double val_fraction,
                    std::uint64_t seed);

/// Everything one cell trains and evaluates on.
struct CellData {
  std::vector<signal::SignalWindow> train, val, test;
  models::FeatureData train_features, val_features, test_features;
  std::vector<signal::SignalWindow> probes;
  std::vector<signal::SignalWindow> probe_twins;
};

/// Downsamples and adds noise to every window of `source` for `cell`, splits
/// it, extracts features and renders the occlusion probes.
CellData prepare_cell(const signal::Dataset& source, const ExperimentConfig& config,
                      const GridCell& cell);

/// Arc probe windows at the cell's base sample rate (before downsampling),
/// with their arc-free twins.
std::pair<std::vector<signal::SignalWindow>, std::vector<signal::SignalWindow>> make_probes(
    const ExperimentConfig& config, std::uint64_t seed);

struct TrainedZoo {
  std::vector<models::TrainedModel> models;
  std::map<std::string, std::vector<nn::EpochStats>> curves;
};

/// Fits the configured models in config order. Seeds derive from `seed` and the model name.
TrainedZoo train_zoo(const ExperimentConfig& config, const CellData& data, std::uint64_t seed);
models::TrainedModel train_model(const std::string& name, const ExperimentConfig& config,
                                 const CellData& data, std::uint64_t seed,
                                 std::vector<nn::EpochStats>* curve = nullptr);

/// Soft evaluation inputs for a prepared cell.
soft::EvalData eval_data(const CellData& data);
soft::EvalConfig eval_config(const ExperimentConfig& config, std::uint64_t seed);

/// Prepares, trains and evaluates one cell without touching the filesystem.
CellReport run_cell(const signal::Dataset& source, const ExperimentConfig& config,
                    const GridCell& cell, TrainedZoo* zoo = nullptr);

struct GridRunOptions {
  std::filesystem::path out;
  bool resume = true;
  std::size_t jobs = 1;
  /// Stop after this many newly computed cells (0 = no limit). Used to
  /// exercise resumption.
  std::size_t max_new_cells = 0;
  /// Also store the source dataset under `out/dataset`.
  bool write_source = true;
  std::function<void(const std::string&)> log;
};

struct GridRunResult {
  std::vector<CellReport> cells;  // grid order, completed cells only
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
  bool complete = false;
};

/// Runs every grid cell, persisting per-cell results, checkpoints and loss
/// curves under `options.out`, then writes report.csv, report.txt,
/// plotdata.csv and manifest.json. Cells already recorded in a manifest with
/// the same config hash are loaded instead of recomputed.
GridRunResult run_grid(const ExperimentConfig& config, const signal::Dataset& source,
                       const GridRunOptions& options);

/// Provenance block for a grid report.
Provenance grid_provenance(const ExperimentConfig& config);

}  // namespace xsei::harness
