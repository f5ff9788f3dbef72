#include "xsei/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "xsei/common.hpp"
#include "xsei/features.hpp"
#include "xsei/model_io.hpp"

namespace xsei::harness {

namespace fs = std::filesystem;
using nlohmann::json;

signal::Dataset generate_dataset(const ExperimentConfig& config) {
  config.validate();
  const auto& dc = config.dataset;
  signal::Dataset ds;
  const double period = dc.profiles.front().sample_period_ms;
  for (const auto& p : dc.profiles) {
    if (p.sample_period_ms != period) throw Error("all load profiles must share one sample period");
  }
  ds.manifest.sample_period_ms = period;
  ds.manifest.window_width = dc.window_width;
  ds.manifest.window_step = dc.window_step;
  ds.manifest.seeds = {{"root", config.seed}};
  const std::size_t duration = dc.window_step * (dc.windows_per_recording - 1) + dc.window_width;
  std::uint32_t next_id = 0;
  for (std::size_t p = 0; p < dc.profiles.size(); ++p) {
    std::size_t collected = 0;
    for (std::size_t r = 0; collected < dc.windows_per_profile; ++r) {
      if (r > 10000) {
        throw Error("load profile '" + dc.profiles[p].name +
                    "' yields too few usable windows; check arc settings");
      }
      const auto seed = derive_seed(config.seed, "recording",
                                    {static_cast<std::int64_t>(p), static_cast<std::int64_t>(r)});
      auto [wave, mask] = signal::synthesize(dc.profiles[p], duration, seed);
      for (auto& w : signal::window(wave, mask, dc.window_width, dc.window_step, dc.window_options)) {
        if (collected == dc.windows_per_profile) break;
        w.id = next_id++;
        ds.windows.push_back(std::move(w));
        ++collected;
      }
    }
  }
  ds.sync_manifest();
  return ds;
}

Split split_indices(std::size_t count, double train_fraction, double val_fraction,
                    std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  const auto n_val = std::min(count - n_train, static_cast<std::size_t>(std::llround(
                                                   val_fraction * static_cast<double>(count))));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
               idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::pair<std::vector<signal::SignalWindow>, std::vector<signal::SignalWindow>> make_probes(
    const ExperimentConfig& config, std::uint64_t seed) {
  const auto& dc = config.dataset;
  const std::size_t width = dc.window_width;
  const auto begin = static_cast<std::size_t>(std::llround(config.probes.start_fraction * static_cast<double>(width)));
  const auto length = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.probes.length_fraction * static_cast<double>(width))));
  const signal::Span span{begin, std::min(width, begin + length)};
  std::vector<signal::SignalWindow> probes, twins;
  for (std::size_t k = 0; k < config.probes.count; ++k) {
    const auto& profile = dc.profiles[k % dc.profiles.size()];
    const auto s = derive_seed(seed, "probe", {static_cast<std::int64_t>(k)});
    const auto make = [&](std::span<const signal::Span> spans, int label) {
      auto [wave, mask] = signal::synthesize_with_arcs(profile, width, s, spans);
      signal::SignalWindow w;
      w.id = static_cast<std::uint32_t>(k);
      w.samples = std::move(wave.samples);
      w.sample_period_ms = wave.sample_period_ms;
      w.label = label;
      w.mask = std::move(mask);
      w.load = profile.name;
      return w;
    };
    probes.push_back(make(std::span(&span, 1), signal::kArcClass));
    twins.push_back(make({}, signal::kNormalClass));
  }
  return {std::move(probes), std::move(twins)};
}

namespace {

models::FeatureData feature_data(const std::vector<signal::SignalWindow>& windows,
                                 const features::FeaturePool& pool) {
  return models::FeatureData::from_table(features::extract_table(windows, pool), 2);
}

}  // namespace

CellData prepare_cell(const signal::Dataset& source, const ExperimentConfig& config,
                      const GridCell& cell) {
  if (source.windows.empty()) throw Error("source dataset has no windows");
  const features::FeaturePool pool(config.features);
  std::vector<signal::SignalWindow> all;
  all.reserve(source.windows.size());
  for (const auto& w : source.windows) {
    auto ds = signal::downsample(w, cell.sample_factor, config.prefilter);
    all.push_back(signal::add_noise(ds, cell.snr_db,
                                    derive_seed(cell.seed, "noise", {static_cast<std::int64_t>(w.id)})));
  }
  const auto split = split_indices(all.size(), config.train_fraction, config.val_fraction,
                                   derive_seed(cell.seed, "split"));
  CellData d;
  for (auto i : split.train) d.train.push_back(all[i]);
  for (auto i : split.val) d.val.push_back(all[i]);
  for (auto i : split.test) d.test.push_back(std::move(all[i]));
  if (d.train.empty() || d.test.empty()) throw Error("split leaves an empty train or test set");
  d.train_features = feature_data(d.train, pool);
  d.val_features = feature_data(d.val, pool);
  d.test_features = feature_data(d.test, pool);

  auto [probes, twins] = make_probes(config, cell.seed);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const auto clean = signal::downsample(probes[k], cell.sample_factor, config.prefilter);
    auto noisy = signal::add_noise(clean, cell.snr_db,
                                   derive_seed(cell.seed, "probe-noise", {static_cast<std::int64_t>(k)}));
    auto twin = signal::downsample(twins[k], cell.sample_factor, config.prefilter);
    // Twin gets the probe's noise.
    for (std::size_t t = 0; t < twin.samples.size(); ++t) {
      twin.samples[t] += noisy.samples[t] - clean.samples[t];
    }
    d.probes.push_back(std::move(noisy));
    d.probe_twins.push_back(std::move(twin));
  }
  return d;
}

models::TrainedModel train_model(const std::string& name, const ExperimentConfig& config,
                                 const CellData& data, std::uint64_t seed,
                                 std::vector<nn::EpochStats>* curve) {
  const auto& z = config.zoo;
  if (name == "knn") return models::fit_knn(data.train_features, std::min(z.knn_k, data.train_features.rows.size()));
  if (name == "cart") return models::fit_cart(data.train_features, z.tree_max_depth, z.tree_min_leaf);
  if (name == "ensemble") {
    return models::fit_ensemble(data.train_features, z.ensemble, derive_seed(seed, "model:ensemble"));
  }
  if (name == "linear") {
    return models::fit_linear(data.train_features, z.linear, derive_seed(seed, "model:linear"));
  }
  if (name == "lbnn_avg" || name == "lbnn_max") {
    const auto variant = name == "lbnn_avg" ? models::PoolVariant::avg : models::PoolVariant::max;
    // Both variants share one seed.
    return models::fit_lbnn(data.train, data.val, variant, {z.num_classes, z.lbnn},
                            derive_seed(seed, "model:lbnn"), curve);
  }
  throw Error("unknown model '" + name + "'");
}

TrainedZoo train_zoo(const ExperimentConfig& config, const CellData& data, std::uint64_t seed) {
  TrainedZoo zoo;
  for (const auto& name : config.models) {
    std::vector<nn::EpochStats> curve;
    zoo.models.push_back(train_model(name, config, data, seed, &curve));
    if (!curve.empty()) zoo.curves[name] = std::move(curve);
  }
  return zoo;
}

soft::EvalData eval_data(const CellData& data) {
  soft::EvalData e;
  e.feature_test = data.test_features;
  e.background = data.train_features.rows;
  e.signal_test = data.test;
  e.probes = data.probes;
  e.probe_twins = data.probe_twins;
  return e;
}

soft::EvalConfig eval_config(const ExperimentConfig& config, std::uint64_t seed) {
  soft::EvalConfig e = config.eval;
  e.seed = derive_seed(seed, "explain");
  return e;
}

CellReport run_cell(const signal::Dataset& source, const ExperimentConfig& config,
                    const GridCell& cell, TrainedZoo* zoo_out) {
  CellReport out;
  out.cell = cell;
  try {
    const auto data = prepare_cell(source, config, cell);
    auto zoo = train_zoo(config, data, cell.seed);
    out.report = soft::soft_evaluate(zoo.models, eval_data(data), eval_config(config, cell.seed));
    out.report.provenance["sample_factor"] = std::to_string(cell.sample_factor);
    out.report.provenance["snr_db"] = format_double(cell.snr_db);
    out.report.provenance["seed"] = std::to_string(cell.seed);
    if (zoo_out) *zoo_out = std::move(zoo);
  } catch (const Error& e) {
    out.report = {};
    out.error = e.what();
  }
  return out;
}

Provenance grid_provenance(const ExperimentConfig& config) {
  Provenance p = soft::provenance(eval_config(config, 0));
  p.erase("explain_seed");
  p["config_hash"] = config_hash(config);
  p["root_seed"] = std::to_string(config.seed);
  std::string seeds;
  for (auto s : config.grid.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
  p["grid_seeds"] = seeds;
  p["toolkit_version"] = std::string(version());
  p["seed_scheme"] = "derive_seed(root, tag, indices) via std::seed_seq";
  return p;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_digest(const signal::Dataset& ds) {
  std::string bytes;
  bytes.reserve(ds.windows.size() * 64);
  for (const auto& w : ds.windows) {
    bytes += std::to_string(w.id) + ":" + std::to_string(w.label) + ":" + format_double(w.sample_period_ms) + ":";
    bytes.append(reinterpret_cast<const char*>(w.samples.data()), w.samples.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(w.mask.flags.data()), w.mask.flags.size());
  }
  return sha256_hex(bytes);
}

struct CellEntry {
  std::string status;  // ok or failed
  std::string error;
  std::vector<std::string> files;
};

std::string manifest_json(const ExperimentConfig& config, const std::string& input_hash,
                          const std::vector<GridCell>& cells,
                          const std::map<std::string, CellEntry>& entries,
                          const std::vector<std::string>& top_files, bool complete) {
  json jc = json::array();
  for (const auto& c : cells) {
    const auto it = entries.find(c.id());
    if (it == entries.end()) continue;
    jc.push_back({{"id", c.id()},
                  {"sample_factor", c.sample_factor},
                  {"sample_time_ms", format_double(c.sample_time_ms())},
                  {"snr_db", c.snr_db},
                  {"seed", c.seed},
                  {"status", it->second.status},
                  {"error", it->second.error},
                  {"files", it->second.files}});
  }
  json j = {{"config_hash", config_hash(config)},
            {"input_hash", input_hash},
            {"toolkit_version", std::string(version())},
            {"seeds", {{"root", config.seed}, {"grid", config.grid.seeds}}},
            {"cell_count", cells.size()},
            {"complete", complete},
            {"files", top_files},
            {"cells", jc}};
  return j.dump(2) + "\n";
}

std::vector<std::string> persist_cell(const fs::path& out, const CellReport& report,
                                      const TrainedZoo& zoo) {
  const fs::path dir = out / "cells" / report.cell.id();
  fs::remove_all(dir);
  std::vector<std::string> files;
  const auto rel = [&out](const fs::path& p) { return fs::relative(p, out).generic_string(); };
  for (const auto& m : zoo.models) {
    const fs::path p = dir / "models" / (m->descriptor().name + ".ckpt");
    fs::create_directories(p.parent_path());
    models::save_model(p, *m);
    files.push_back(rel(p));
  }
  for (const auto& [name, curve] : zoo.curves) {
    const fs::path p = dir / "curves" / (name + ".csv");
    write_text(p, nn::loss_curve_csv(curve));
    files.push_back(rel(p));
  }
  const fs::path result = dir / "result.json";
  write_text(result, cell_to_json(report));
  files.push_back(rel(result));
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

GridRunResult run_grid(const ExperimentConfig& config, const signal::Dataset& source,
                       const GridRunOptions& options) {
  config.validate();
  if (options.out.empty()) throw Error("grid output directory is not set");
  const auto log = [&](const std::string& s) {
    if (options.log) options.log(s);
  };
  fs::create_directories(options.out);
  const auto cells = expand_grid(config.grid);
  const std::string input_hash = sha256_hex(config_hash(config) + dataset_digest(source));
  const fs::path manifest_path = options.out / "manifest.json";

  std::map<std::string, CellEntry> entries;
  std::map<std::string, CellReport> done;
  if (options.resume && fs::exists(manifest_path)) {
    try {
      const json old = json::parse(read_text(manifest_path));
      if (old.at("input_hash").get<std::string>() == input_hash) {
        for (const auto& e : old.at("cells")) {
          if (e.at("status").get<std::string>() != "ok") continue;
          const auto id = e.at("id").get<std::string>();
          const fs::path result = options.out / "cells" / id / "result.json";
          if (!fs::exists(result)) continue;
          done[id] = cell_from_json(read_text(result));
          entries[id] = {"ok", "", e.at("files").get<std::vector<std::string>>()};
        }
      } else {
        log("manifest belongs to a different configuration; recomputing every cell");
      }
    } catch (const std::exception& e) {
      log(std::string("ignoring unreadable manifest: ") + e.what());
      done.clear();
      entries.clear();
    }
  }

  std::vector<std::string> top_files = {"config.json"};
  write_text(options.out / "config.json", to_json(config) + "\n");
  if (options.write_source) {
    for (const auto& f : signal::write_dataset(source, options.out / "dataset")) {
      top_files.push_back(fs::relative(f, options.out).generic_string());
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!done.contains(cells[i].id())) pending.push_back(i);
  }
  GridRunResult result;
  result.reused = done.size();

  std::mutex writer;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> started{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      if (options.max_new_cells > 0 && started.fetch_add(1) >= options.max_new_cells) return;
      const auto& cell = cells[pending[k]];
      TrainedZoo zoo;
      CellReport report = run_cell(source, config, cell, &zoo);
      CellEntry entry;
      try {
        entry.files = persist_cell(options.out, report, zoo);
        entry.status = report.error.empty() ? "ok" : "failed";
        entry.error = report.error;
      } catch (const std::exception& e) {
        report.error = std::string("persisting cell failed: ") + e.what();
        entry = {"failed", report.error, {}};
      }
      std::lock_guard lock(writer);
      log("cell " + cell.id() + (report.error.empty() ? " done" : " failed: " + report.error));
      entries[cell.id()] = entry;
      done[cell.id()] = std::move(report);
      ++result.computed;
      write_text(manifest_path, manifest_json(config, input_hash, cells, entries, top_files, false));
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, pending.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& c : cells) {
    const auto it = done.find(c.id());
    if (it == done.end()) continue;
    if (!it->second.error.empty()) ++result.failed;
    result.cells.push_back(it->second);
  }
  result.complete = result.cells.size() == cells.size();
  if (result.complete && !result.cells.empty()) {
    const auto prov = grid_provenance(config);
    write_text(options.out / "report.csv", report_csv(result.cells, prov));
    write_text(options.out / "report.txt", report_text(result.cells, prov));
    write_text(options.out / "plotdata.csv", report_plotdata(result.cells));
    top_files.insert(top_files.end(), {"plotdata.csv", "report.csv", "report.txt"});
  }
  std::sort(top_files.begin(), top_files.end());
  write_text(manifest_path,
             manifest_json(config, input_hash, cells, entries, top_files, result.complete));
  return result;
}

}  // namespace xsei::harness
