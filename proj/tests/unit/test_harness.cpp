#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xsei/common.hpp"
#include "xsei/config.hpp"
#include "xsei/grid.hpp"
#include "xsei/report.hpp"

using namespace xsei;
using namespace xsei::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xsei_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ExperimentConfig tiny_config() {
  auto c = default_config();
  c.dataset.windows_per_profile = 30;
  c.dataset.windows_per_recording = 10;
  c.models = {"knn", "cart", "lbnn_avg"};
  c.zoo.lbnn.epochs = 1;
  c.zoo.ensemble.size = 5;
  c.probes.count = 4;
  c.eval.max_explain = 4;
  c.grid.sample_factors = {10, 20};
  c.grid.snrs = {5, -3};
  c.grid.fixed_factor = 20;
  c.grid.fixed_snr = 5;
  return c;
}

soft::ModelResult fake_result(const std::string& name, double acc, double score) {
  soft::ModelResult r;
  r.name = name;
  r.accuracy = acc;
  r.scored = true;
  r.score.value = score;
  r.score.numerator = 1;
  r.score.denominator = 3;
  r.method = soft::Method::occlusion;
  r.family = models::Family::raw_signal;
  r.regions = {{0, 5}, {5, 10}, {10, 15}};
  r.mean_res = {0.5, -0.125, 0.0};
  r.truth_regions = {true, false, false};
  r.marked_regions = {true, false, false};
  return r;
}

std::vector<CellReport> fake_cells() {
  std::vector<CellReport> cells;
  const std::vector<GridCell> grid{{10, 5, 1}, {10, 5, 2}, {20, 5, 1}, {20, 5, 2}};
  double k = 0;
  for (const auto& g : grid) {
    CellReport c;
    c.cell = g;
    c.report.results = {fake_result("knn", 0.9 - 0.01 * k, 0.25),
                        fake_result("lbnn_avg", 0.8 + 0.02 * k, 1.0 / 3.0 + 0.1 * k)};
    c.report.results[0].method = soft::Method::shap_top5;
    c.report.results[0].family = models::Family::feature_pool;
    c.report.results[0].feature_names = {"mean", "variance"};
    c.report.results[0].mean_abs_phi = {0.1, 0.3};
    c.report.results[0].top_features = {"variance", "mean"};
    c.report.results[0].regions.clear();
    c.report.results[0].mean_res.clear();
    c.report.results[0].truth_regions.clear();
    c.report.results[0].marked_regions.clear();
    c.report.provenance = {{"regions", "3"}};
    cells.push_back(c);
    k += 1;
  }
  CellReport failed;
  failed.cell = {5, 5, 1};
  failed.error = "boom, with a comma";
  cells.push_back(failed);
  return cells;
}

}  // namespace

TEST(Config, DefaultsAndJsonRoundTrip) {
  const auto c = default_config();
  EXPECT_EQ(c.dataset.profiles.size(), 2u);
  EXPECT_EQ(c.dataset.windows_per_profile, 300u);
  EXPECT_EQ(c.grid.sample_factors, (std::vector<std::size_t>{1, 2, 5, 10, 20}));
  EXPECT_EQ(c.grid.snrs, (std::vector<double>{-5, -3, -1, 1, 3, 5}));
  EXPECT_EQ(c.models, known_models());
  const auto json = to_json(c);
  const auto back = parse_config(json);
  EXPECT_EQ(to_json(back), json);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 64u);
}

TEST(Config, PartialOverridesAndRejections) {
  const auto c = parse_config(R"({"seed": 9, "grid": {"snrs": [1, 2]}, "models": ["knn"]})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.grid.snrs, (std::vector<double>{1, 2}));
  EXPECT_EQ(c.grid.sample_factors, default_config().grid.sample_factors);
  EXPECT_EQ(c.models, (std::vector<std::string>{"knn"}));
  EXPECT_NE(config_hash(c), config_hash(default_config()));
  EXPECT_THROW(parse_config(R"({"sed": 1})"), Error);
  EXPECT_THROW(parse_config(R"({"models": ["svm"]})"), Error);
  EXPECT_THROW(parse_config(R"({"grid": {"snrs": []}})"), Error);
  EXPECT_THROW(parse_config("{"), Error);
  auto jobs = default_config();
  jobs.jobs = 4;
  EXPECT_EQ(config_hash(jobs), config_hash(default_config()));
}

TEST(Config, Lists) {
  EXPECT_EQ(parse_size_list("1, 2,5"), (std::vector<std::size_t>{1, 2, 5}));
  EXPECT_EQ(parse_double_list("-5,-3,1.5"), (std::vector<double>{-5, -3, 1.5}));
  EXPECT_EQ(parse_name_list("knn,lbnn_avg"), (std::vector<std::string>{"knn", "lbnn_avg"}));
  EXPECT_THROW(parse_size_list("1,x"), Error);
  EXPECT_THROW(parse_double_list(""), Error);
}

TEST(Grid, Expansion) {
  GridConfig g;
  g.sample_factors = {1, 2, 5, 10, 20};
  g.snrs = {-5, -3, -1, 1, 3, 5};
  g.layout = GridLayout::sweeps;
  const auto sweeps = expand_grid(g);
  EXPECT_EQ(sweeps.size(), 5u + 6u - 1u);
  g.layout = GridLayout::product;
  EXPECT_EQ(expand_grid(g).size(), 30u);
  g.seeds = {1, 2, 3};
  EXPECT_EQ(expand_grid(g).size(), 90u);
  g.snrs = {5};
  g.seeds = {1};
  EXPECT_EQ(expand_grid(g).size(), 5u);
  EXPECT_EQ((GridCell{10, -3, 1}.id()), "t10_snr-3_s1");
  EXPECT_DOUBLE_EQ((GridCell{10, -3, 1}.sample_time_ms()), 0.05);
}

TEST(Grid, SplitIsSeededPartition) {
  const auto s = split_indices(100, 0.8, 0.1, 4);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_indices(100, 0.8, 0.1, 4).train, s.train);
  EXPECT_NE(split_indices(100, 0.8, 0.1, 5).train, s.train);
}

TEST(Grid, DatasetGenerationDeterministic) {
  auto c = tiny_config();
  const auto a = generate_dataset(c);
  const auto b = generate_dataset(c);
  ASSERT_EQ(a.windows.size(), b.windows.size());
  EXPECT_GT(a.windows.size(), 20u);
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    EXPECT_EQ(a.windows[i].samples, b.windows[i].samples);
    EXPECT_EQ(a.windows[i].id, i);
  }
  std::size_t arcs = 0;
  for (const auto& w : a.windows) arcs += w.label == signal::kArcClass;
  EXPECT_GT(arcs, 0u);
  EXPECT_LT(arcs, a.windows.size());
}

TEST(Grid, ProbesShareGroundTruth) {
  const auto c = tiny_config();
  const auto [probes, twins] = make_probes(c, 3);
  ASSERT_EQ(probes.size(), c.probes.count);
  ASSERT_EQ(twins.size(), probes.size());
  const auto first = soft::ground_truth_regions(probes[0].mask, 20).flags;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    EXPECT_EQ(probes[i].label, signal::kArcClass);
    EXPECT_EQ(soft::ground_truth_regions(probes[i].mask, 20).flags, first);
    EXPECT_EQ(soft::ground_truth_regions(twins[i], probes[i], 20).flags, first);
  }
}

TEST(Report, CsvRoundTripIsByteIdentical) {
  const auto cells = fake_cells();
  const Provenance prov{{"root_seed", "1"}, {"regions", "3"}};
  const auto csv = report_csv(cells, prov);
  Provenance back_prov;
  const auto back = parse_report_csv(csv, &back_prov);
  EXPECT_EQ(back_prov, prov);
  EXPECT_EQ(back.size(), cells.size());
  EXPECT_EQ(report_csv(back, back_prov), csv);
}

TEST(Report, TextTableShapeAndAverages) {
  const auto cells = fake_cells();
  const auto text = report_text(cells, {{"root_seed", "1"}});
  std::istringstream in(text);
  std::string line;
  std::size_t table_lines = 0;
  while (std::getline(in, line) && !line.empty()) ++table_lines;
  EXPECT_EQ(table_lines, 2u + 1u);

  const auto s = summarize(cells);
  ASSERT_EQ(s.models, (std::vector<std::string>{"knn", "lbnn_avg"}));
  // The failed cell keeps its column with no values.
  ASSERT_EQ(s.columns.size(), 3u);
  for (std::size_t m = 0; m < s.models.size(); ++m) {
    EXPECT_TRUE(std::isnan(s.accuracy[m][2]));
    double acc = 0, score = 0;
    for (std::size_t c = 0; c < 2; ++c) {
      acc += s.accuracy[m][c];
      score += s.score[m][c];
    }
    EXPECT_NEAR(s.average_accuracy[m], acc / 2.0, 1e-12);
    EXPECT_NEAR(s.average_score[m], score / 2.0, 1e-12);
  }
  // Seeds 1 and 2 of the first column are averaged.
  EXPECT_NEAR(s.accuracy[1][0], (0.8 + 0.82) / 2.0, 1e-12);
}

TEST(Report, PlotdataSeries) {
  const auto cells = fake_cells();
  const auto text = report_plotdata(cells);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "series,sample_time_ms,snr_db,seed,model,index,label,value");
  std::size_t res = 0, phi = 0;
  while (std::getline(in, line)) {
    if (line.rfind("res,0.05,5,1,lbnn_avg,", 0) == 0) ++res;
    if (line.rfind("phi,0.05,5,1,knn,", 0) == 0) ++phi;
  }
  EXPECT_EQ(res, 3u);
  EXPECT_EQ(phi, 2u);
}

TEST(Report, CellJsonLossless) {
  for (const auto& c : fake_cells()) {
    const auto json = cell_to_json(c);
    EXPECT_EQ(cell_to_json(cell_from_json(json)), json);
  }
  EXPECT_EQ(report_format_from_string("plotdata"), ReportFormat::plotdata);
  EXPECT_THROW(report_format_from_string("xml"), Error);
}

TEST(RunGrid, EmptyModelListSucceeds) {
  auto c = tiny_config();
  c.models.clear();
  const auto ds = generate_dataset(c);
  GridRunOptions opt;
  opt.out = scratch("empty");
  opt.write_source = false;
  const auto r = run_grid(c, ds, opt);
  EXPECT_TRUE(r.complete);
  EXPECT_EQ(r.failed, 0u);
  for (const auto& cell : r.cells) EXPECT_TRUE(cell.report.results.empty());
}

TEST(RunGrid, ResumeMatchesUninterrupted) {
  const auto c = tiny_config();
  const auto ds = generate_dataset(c);
  GridRunOptions full;
  full.out = scratch("full");
  const auto a = run_grid(c, ds, full);
  ASSERT_TRUE(a.complete);
  EXPECT_EQ(a.cells.size() + a.failed, expand_grid(c.grid).size());
  EXPECT_EQ(a.computed, 3u);

  GridRunOptions part = full;
  part.out = scratch("part");
  part.max_new_cells = 1;
  const auto first = run_grid(c, ds, part);
  EXPECT_FALSE(first.complete);
  EXPECT_EQ(first.computed, 1u);
  EXPECT_FALSE(fs::exists(part.out / "report.csv"));
  part.max_new_cells = 0;
  part.jobs = 2;
  const auto second = run_grid(c, ds, part);
  EXPECT_TRUE(second.complete);
  EXPECT_EQ(second.reused, 1u);
  EXPECT_EQ(second.computed, 2u);

  for (const char* f : {"manifest.json", "report.csv", "report.txt", "plotdata.csv"}) {
    EXPECT_TRUE(slurp(full.out / f) == slurp(part.out / f)) << f;
  }
  for (const auto& cell : expand_grid(c.grid)) {
    const auto dir = fs::path("cells") / cell.id();
    EXPECT_TRUE(slurp(full.out / dir / "result.json") == slurp(part.out / dir / "result.json"))
        << dir;
    EXPECT_TRUE(slurp(full.out / dir / "models" / "lbnn_avg.ckpt") ==
                slurp(part.out / dir / "models" / "lbnn_avg.ckpt"))
        << dir;
  }
}

TEST(RunGrid, ChangedConfigInvalidatesResume) {
  auto c = tiny_config();
  c.models = {"knn"};
  c.grid.sample_factors = {20};
  c.grid.snrs = {5};
  const auto ds = generate_dataset(c);
  GridRunOptions opt;
  opt.out = scratch("invalidate");
  opt.write_source = false;
  EXPECT_EQ(run_grid(c, ds, opt).computed, 1u);
  EXPECT_EQ(run_grid(c, ds, opt).reused, 1u);
  c.zoo.knn_k = 3;
  EXPECT_EQ(run_grid(c, ds, opt).computed, 1u);
}

TEST(RunGrid, CellFailureRecorded) {
  auto c = tiny_config();
  c.models = {"knn"};
  c.grid.sample_factors = {20};
  c.grid.snrs = {5};
  auto ds = generate_dataset(c);
  // A source with a single class cannot be trained on.
  for (auto& w : ds.windows) w.label = signal::kNormalClass;
  GridRunOptions opt;
  opt.out = scratch("failure");
  opt.write_source = false;
  const auto r = run_grid(c, ds, opt);
  EXPECT_EQ(r.failed + r.cells.size(), 1u);
  const auto csv = slurp(opt.out / "manifest.json");
  EXPECT_NE(csv.find("\"cell_count\": 1"), std::string::npos);
}
