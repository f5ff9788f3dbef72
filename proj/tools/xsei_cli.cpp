#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xsei/common.hpp"
#include "xsei/config.hpp"
#include "xsei/explain.hpp"
#include "xsei/features.hpp"
#include "xsei/grid.hpp"
#include "xsei/model_io.hpp"
#include "xsei/report.hpp"
#include "xsei/signal_io.hpp"

namespace fs = std::filesystem;
using namespace xsei;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string models;
  std::string sample_times;
  std::string snrs;
  std::optional<std::size_t> regions;
  std::string removal;
  std::optional<double> threshold;
  std::string format = "text";
  std::optional<std::size_t> epochs;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Root seed (falls back to XSEI_SEED, then the config)");
  app->add_option("--out", c.out, "Output path");
  app->add_option("--models", c.models, "Comma-separated model names");
  app->add_option("--sample-times", c.sample_times, "Comma-separated downsampling factors");
  app->add_option("--snrs", c.snrs, "Comma-separated SNR values in dB");
  app->add_option("--regions", c.regions, "Occlusion region count");
  app->add_option("--removal", c.removal, "Shapley removal: baseline, random or marginal");
  app->add_option("--threshold", c.threshold, "Region responsibility threshold");
  app->add_option("--format", c.format, "Report format: csv, text or plotdata");
  app->add_option("--epochs", c.epochs, "LBNN training epochs");
}

harness::ExperimentConfig build_config(const Common& c) {
  auto cfg = c.config.empty() ? harness::default_config() : harness::load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
  } else if (const char* env = std::getenv("XSEI_SEED"); env && *env) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw Error(std::string("XSEI_SEED is not an unsigned integer: ") + env);
    }
  }
  if (!c.models.empty()) cfg.models = harness::parse_name_list(c.models);
  if (!c.sample_times.empty()) cfg.grid.sample_factors = harness::parse_size_list(c.sample_times);
  if (!c.snrs.empty()) cfg.grid.snrs = harness::parse_double_list(c.snrs);
  if (c.regions) cfg.eval.regions = *c.regions;
  if (!c.removal.empty()) cfg.eval.removal = explain::removal_from_string(c.removal);
  if (c.threshold) cfg.eval.threshold = *c.threshold;
  if (c.epochs) cfg.zoo.lbnn.epochs = *c.epochs;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

signal::Dataset source_dataset(const std::string& dir, const harness::ExperimentConfig& cfg) {
  if (!dir.empty()) return signal::read_dataset(dir);
  auto ds = harness::generate_dataset(cfg);
  // Match what a saved and reloaded dataset would contain.
  signal::quantize_to_float(ds);
  return ds;
}

/// The single cell a train/eval run works on.
harness::GridCell single_cell(const harness::ExperimentConfig& cfg, const Common& c) {
  harness::GridCell cell{cfg.grid.fixed_factor, cfg.grid.fixed_snr, cfg.seed};
  if (!c.sample_times.empty()) {
    if (cfg.grid.sample_factors.size() != 1) throw Error("--sample-times takes one value here");
    cell.sample_factor = cfg.grid.sample_factors[0];
  }
  if (!c.snrs.empty()) {
    if (cfg.grid.snrs.size() != 1) throw Error("--snrs takes one value here");
    cell.snr_db = cfg.grid.snrs[0];
  }
  return cell;
}

std::string cell_json(const harness::GridCell& cell) {
  nlohmann::json j = {{"sample_factor", cell.sample_factor},
                      {"snr_db", cell.snr_db},
                      {"seed", cell.seed}};
  return j.dump(2) + "\n";
}

harness::GridCell read_cell(const fs::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  return {j.at("sample_factor").get<std::size_t>(), j.at("snr_db").get<double>(),
          j.at("seed").get<std::uint64_t>()};
}

/// Run directory written by `train`.
struct TrainedRun {
  harness::ExperimentConfig config;
  harness::GridCell cell;
  std::vector<models::TrainedModel> models;
};

TrainedRun load_run(const fs::path& dir) {
  TrainedRun run;
  run.config = harness::load_config(dir / "config.json");
  run.cell = read_cell(dir / "cell.json");
  for (const auto& name : run.config.models) {
    run.models.push_back(models::load_model(dir / "models" / (name + ".ckpt")));
  }
  return run;
}

int cmd_synth(const Common& c, const std::string& encoding) {
  if (c.out.empty()) throw Error("synth needs --out");
  const auto cfg = build_config(c);
  auto ds = harness::generate_dataset(cfg);
  ds.manifest.encoding = signal::encoding_from_string(encoding);
  const auto files = signal::write_dataset(ds, c.out);
  std::size_t arcs = 0;
  for (const auto& w : ds.windows) arcs += w.label == signal::kArcClass;
  std::cout << "wrote " << ds.windows.size() << " windows (" << arcs << " arc) to " << c.out
            << "\n";
  return 0;
}

int cmd_ingest(const std::string& in, const Common& c, const std::string& encoding) {
  auto ds = signal::read_dataset(in);
  std::size_t arcs = 0;
  for (const auto& w : ds.windows) arcs += w.label == signal::kArcClass;
  std::cout << "windows " << ds.windows.size() << "\narc " << arcs << "\nnormal "
            << ds.windows.size() - arcs << "\nsample_period_ms "
            << format_double(ds.manifest.sample_period_ms) << "\nwindow_width "
            << ds.manifest.window_width << "\nencoding " << to_string(ds.manifest.encoding)
            << "\n";
  if (!c.out.empty()) {
    if (!encoding.empty()) ds.manifest.encoding = signal::encoding_from_string(encoding);
    signal::write_dataset(ds, c.out);
    std::cout << "rewrote dataset to " << c.out << "\n";
  }
  return 0;
}

int cmd_train(const Common& c, const std::string& dataset) {
  if (c.out.empty()) throw Error("train needs --out");
  const auto cfg = build_config(c);
  const auto cell = single_cell(cfg, c);
  const auto source = source_dataset(dataset, cfg);
  const auto data = harness::prepare_cell(source, cfg, cell);
  const auto zoo = harness::train_zoo(cfg, data, cell.seed);
  const fs::path out = c.out;
  write_file(out / "config.json", harness::to_json(cfg) + "\n");
  write_file(out / "cell.json", cell_json(cell));
  for (std::size_t i = 0; i < zoo.models.size(); ++i) {
    const auto& m = *zoo.models[i];
    fs::create_directories(out / "models");
    models::save_model(out / "models" / (cfg.models[i] + ".ckpt"), m);
    const double acc = m.family() == models::Family::feature_pool
                           ? models::accuracy(m, data.test_features)
                           : models::accuracy(m, data.test);
    std::cout << cfg.models[i] << " test accuracy " << format_double(acc) << "\n";
  }
  for (const auto& [name, curve] : zoo.curves) {
    write_file(out / "curves" / (name + ".csv"), nn::loss_curve_csv(curve));
  }
  return 0;
}

int cmd_eval(const std::string& in, const Common& c, const std::string& dataset) {
  auto run = load_run(in);
  // Evaluation settings may be overridden; training settings may not.
  if (c.regions) run.config.eval.regions = *c.regions;
  if (!c.removal.empty()) run.config.eval.removal = explain::removal_from_string(c.removal);
  if (c.threshold) run.config.eval.threshold = *c.threshold;
  run.config.validate();
  const auto source = source_dataset(dataset, run.config);
  const auto data = harness::prepare_cell(source, run.config, run.cell);
  harness::CellReport cr;
  cr.cell = run.cell;
  cr.report = soft::soft_evaluate(run.models, harness::eval_data(data),
                                  harness::eval_config(run.config, run.cell.seed));
  const auto prov = harness::grid_provenance(run.config);
  const std::vector<harness::CellReport> cells{cr};
  if (!c.out.empty()) {
    const fs::path out = c.out;
    write_file(out / "config.json", harness::to_json(run.config) + "\n");
    write_file(out / "result.json", harness::cell_to_json(cr));
    write_file(out / "report.csv", harness::report_csv(cells, prov));
    write_file(out / "report.txt", harness::report_text(cells, prov));
    write_file(out / "plotdata.csv", harness::report_plotdata(cells));
  }
  std::cout << harness::emit_report(cells, prov, harness::report_format_from_string(c.format));
  return 0;
}

int cmd_explain(const std::string& in, const Common& c, const std::string& dataset,
                const std::string& model_name, std::size_t index, bool probe,
                const std::string& occlusion_baseline) {
  auto run = load_run(in);
  if (c.regions) run.config.eval.regions = *c.regions;
  if (!c.removal.empty()) run.config.eval.removal = explain::removal_from_string(c.removal);
  if (!occlusion_baseline.empty()) {
    run.config.eval.occlusion_baseline = explain::occlusion_baseline_from_string(occlusion_baseline);
  }
  run.config.validate();
  std::size_t which = run.models.size();
  for (std::size_t i = 0; i < run.config.models.size(); ++i) {
    if (run.config.models[i] == model_name) which = i;
  }
  if (which == run.models.size()) throw Error("model '" + model_name + "' is not in " + in);
  const auto& model = *run.models[which];
  const auto source = source_dataset(dataset, run.config);
  const auto data = harness::prepare_cell(source, run.config, run.cell);
  const auto ec = harness::eval_config(run.config, run.cell.seed);
  std::string csv;
  if (model.family() == models::Family::feature_pool) {
    if (index >= data.test_features.rows.size()) throw Error("--index is past the test set");
    const auto& row = data.test_features.rows[index];
    const int target = static_cast<int>(argmax(model.predict_row(row)));
    const auto a = explain::explain_sample(
        model, row, target, ec.removal, data.train_features.rows,
        derive_seed(ec.seed, "shapley", {static_cast<std::int64_t>(index)}));
    csv = explain::attribution_csv(model.feature_names(), a);
  } else {
    const auto& windows = probe ? data.probes : data.test;
    if (index >= windows.size()) throw Error("--index is past the window set");
    const auto& win = windows[index];
    const int target = probe ? win.label : static_cast<int>(argmax(model.predict_samples(win.samples)));
    const auto map = explain::occlude(model, win, target, ec.regions, ec.occlusion_baseline,
                                      derive_seed(ec.seed, "occlusion", {static_cast<std::int64_t>(index)}));
    csv = explain::occlusion_csv(map);
  }
  if (c.out.empty()) {
    std::cout << csv;
  } else {
    write_file(c.out, csv);
  }
  return 0;
}

fs::path report_csv_path(const fs::path& in) {
  return fs::is_directory(in) ? in / "report.csv" : in;
}

int cmd_config(const Common& c) {
  const auto text = harness::to_json(build_config(c)) + "\n";
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_file(c.out, text);
  }
  return 0;
}

int cmd_score(const std::string& in) {
  harness::Provenance prov;
  const auto cells = harness::parse_report_csv(read_file(report_csv_path(in)), &prov);
  std::cout << harness::report_text(cells, prov);
  return 0;
}

int cmd_report(const std::string& in, const Common& c) {
  const fs::path dir = in;
  const auto format = harness::report_format_from_string(c.format);
  std::vector<harness::CellReport> cells;
  harness::Provenance prov;
  if (fs::exists(dir / "config.json") && fs::exists(dir / "cells")) {
    const auto cfg = harness::load_config(dir / "config.json");
    for (const auto& cell : harness::expand_grid(cfg.grid)) {
      const fs::path result = dir / "cells" / cell.id() / "result.json";
      if (fs::exists(result)) cells.push_back(harness::cell_from_json(read_file(result)));
    }
    prov = harness::grid_provenance(cfg);
  } else if (fs::exists(dir / "result.json")) {
    cells.push_back(harness::cell_from_json(read_file(dir / "result.json")));
    prov = harness::grid_provenance(harness::load_config(dir / "config.json"));
  } else {
    if (format == harness::ReportFormat::plotdata) {
      throw Error("plot data needs a grid or eval directory, not a bare report.csv");
    }
    cells = harness::parse_report_csv(read_file(report_csv_path(dir)), &prov);
  }
  if (cells.empty()) throw Error("no completed cells under " + in);
  const auto text = harness::emit_report(cells, prov, format);
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_file(c.out, text);
  }
  return 0;
}

int cmd_grid(const Common& c, const std::string& dataset, std::size_t jobs, bool no_resume,
             std::size_t max_new, const std::string& grid_seeds, const std::string& layout,
             bool quiet) {
  if (c.out.empty()) throw Error("grid needs --out");
  auto cfg = build_config(c);
  if (!grid_seeds.empty()) {
    cfg.grid.seeds.clear();
    for (auto s : harness::parse_size_list(grid_seeds)) cfg.grid.seeds.push_back(s);
  }
  if (!layout.empty()) cfg.grid.layout = harness::grid_layout_from_string(layout);
  if (jobs > 0) cfg.jobs = jobs;
  cfg.validate();
  const auto source = source_dataset(dataset, cfg);
  harness::GridRunOptions opt;
  opt.out = c.out;
  opt.resume = !no_resume;
  opt.jobs = cfg.jobs;
  opt.max_new_cells = max_new;
  if (!quiet) opt.log = [](const std::string& s) { std::cerr << s << "\n"; };
  const auto result = harness::run_grid(cfg, source, opt);
  std::cerr << "cells computed " << result.computed << ", reused " << result.reused << ", failed "
            << result.failed << (result.complete ? "" : " (incomplete)") << "\n";
  if (result.complete && !result.cells.empty()) {
    const auto fmt = harness::report_format_from_string(c.format);
    std::cout << harness::emit_report(result.cells, harness::grid_provenance(cfg), fmt);
  }
  return result.complete ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable soft evaluation of arc-fault classifiers", "xsei"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(version()));

  Common c;
  std::string in, dataset, encoding, model_name, grid_seeds, layout, occ_baseline;
  std::size_t jobs = 0, max_new = 0, index = 0;
  bool no_resume = false, quiet = false, probe = false;

  auto* synth = app.add_subcommand("synth", "Synthesize a labeled dataset");
  add_common(synth, c);
  synth->add_option("--encoding", encoding, "binary or csv")->default_val("binary");

  auto* ingest = app.add_subcommand("ingest", "Validate a dataset directory, optionally rewrite it");
  add_common(ingest, c);
  ingest->add_option("--in", in, "Dataset directory")->required();
  ingest->add_option("--encoding", encoding, "Encoding of the rewritten copy");

  auto* train = app.add_subcommand("train", "Train the model zoo on one cell");
  add_common(train, c);
  train->add_option("--dataset", dataset, "Dataset directory (default: synthesize)");

  auto* eval = app.add_subcommand("eval", "Soft-evaluate the models of a train directory");
  add_common(eval, c);
  eval->add_option("--in", in, "Train output directory")->required();
  eval->add_option("--dataset", dataset, "Dataset directory (default: synthesize)");

  auto* expl = app.add_subcommand("explain", "Attribution of one test sample");
  add_common(expl, c);
  expl->add_option("--in", in, "Train output directory")->required();
  expl->add_option("--model", model_name, "Model name")->required();
  expl->add_option("--index", index, "Test row, or probe with --probe");
  expl->add_flag("--probe", probe, "Occlude a probe window instead of a test window");
  expl->add_option("--occlusion-baseline", occ_baseline, "constant, blur or noise");
  expl->add_option("--dataset", dataset, "Dataset directory (default: synthesize)");

  auto* score = app.add_subcommand("score", "Print the score table of a report");
  add_common(score, c);
  score->add_option("--in", in, "Report directory or report.csv")->required();

  auto* grid = app.add_subcommand("grid", "Run the sample-time x SNR grid");
  add_common(grid, c);
  grid->add_option("--dataset", dataset, "Dataset directory (default: synthesize)");
  grid->add_option("--jobs", jobs, "Worker threads");
  grid->add_flag("--no-resume", no_resume, "Recompute every cell");
  grid->add_option("--max-new-cells", max_new, "Stop after this many new cells");
  grid->add_option("--grid-seeds", grid_seeds, "Comma-separated cell seeds");
  grid->add_option("--layout", layout, "sweeps or product");
  grid->add_flag("--quiet", quiet, "No per-cell log");

  auto* config = app.add_subcommand("config", "Print the resolved configuration as JSON");
  add_common(config, c);

  auto* report = app.add_subcommand("report", "Emit a report from a grid or eval directory");
  add_common(report, c);
  report->add_option("--in", in, "Grid or eval directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return cmd_synth(c, encoding);
    if (*ingest) return cmd_ingest(in, c, encoding);
    if (*train) return cmd_train(c, dataset);
    if (*eval) return cmd_eval(in, c, dataset);
    if (*expl) return cmd_explain(in, c, dataset, model_name, index, probe, occ_baseline);
    if (*score) return cmd_score(in);
    if (*grid) return cmd_grid(c, dataset, jobs, no_resume, max_new, grid_seeds, layout, quiet);
    if (*report) return cmd_report(in, c);
    if (*config) return cmd_config(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
