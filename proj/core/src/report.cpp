#include "xsei/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "xsei/common.hpp"

namespace xsei::harness {

using nlohmann::json;

std::string to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::text: return "text";
    case ReportFormat::plotdata: return "plotdata";
  }
  return "csv";
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "text") return ReportFormat::text;
  if (s == "plotdata") return ReportFormat::plotdata;
  throw Error("unknown report format '" + s + "' (expected csv, text or plotdata)");
}

namespace {

constexpr const char* kCsvHeader =
    "sample_factor,sample_time_ms,snr_db,seed,model,family,method,accuracy,score,intersection,"
    "union,status";

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error("unterminated quote in report line");
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error("report field " + what + " is not a number: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error("report field " + what + " is not an integer: '" + s + "'");
  }
  return v;
}

models::Family family_from_string(const std::string& s) {
  if (s == "feature_pool") return models::Family::feature_pool;
  if (s == "raw_signal") return models::Family::raw_signal;
  throw Error("unknown model family '" + s + "'");
}

std::string cell_prefix(const GridCell& c) {
  return std::to_string(c.sample_factor) + "," + format_double(c.sample_time_ms()) + "," +
         format_double(c.snr_db) + "," + std::to_string(c.seed);
}

}  // namespace

std::string report_csv(std::span<const CellReport> cells, const Provenance& provenance) {
  std::string out;
  for (const auto& [k, v] : provenance) out += "# " + one_line(k) + "=" + one_line(v) + "\n";
  out += kCsvHeader;
  out += "\n";
  for (const auto& c : cells) {
    const std::string prefix = cell_prefix(c.cell);
    if (!c.error.empty()) {
      out += prefix + ",,,,,,,," + csv_field("cell error: " + one_line(c.error)) + "\n";
      continue;
    }
    for (const auto& r : c.report.results) {
      out += prefix + "," + csv_field(r.name) + "," + models::to_string(r.family) + "," +
             soft::to_string(r.method) + "," + format_double(r.accuracy) + ",";
      if (r.scored) {
        out += format_double(r.score.value) + "," + std::to_string(r.score.numerator) + "," +
               std::to_string(r.score.denominator) + ",ok\n";
      } else {
        out += ",,," + csv_field(one_line(r.error.empty() ? "error" : r.error)) + "\n";
      }
    }
  }
  return out;
}

std::vector<CellReport> parse_report_csv(const std::string& text, Provenance* provenance) {
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::vector<CellReport> cells;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!header && line.starts_with("# ")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error("malformed provenance line " + std::to_string(line_no));
      if (provenance) (*provenance)[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header) {
      if (line != kCsvHeader) throw Error("report CSV header does not match");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw Error("report line " + std::to_string(line_no) + " has the wrong field count");
    GridCell cell{static_cast<std::size_t>(parse_u64(f[0], "sample_factor")),
                  parse_double(f[2], "snr_db"), parse_u64(f[3], "seed")};
    if (cells.empty() || !(cells.back().cell == cell) || !cells.back().error.empty()) {
      cells.push_back({cell, {}, {}});
    }
    auto& c = cells.back();
    if (f[4].empty() && f[5].empty()) {
      const std::string prefix = "cell error: ";
      c.error = f[11].starts_with(prefix) ? f[11].substr(prefix.size()) : f[11];
      continue;
    }
    soft::ModelResult r;
    r.name = f[4];
    r.family = family_from_string(f[5]);
    r.method = soft::method_from_string(f[6]);
    r.accuracy = parse_double(f[7], "accuracy");
    r.score.method = r.method;
    if (f[11] == "ok") {
      r.scored = true;
      r.score.value = parse_double(f[8], "score");
      r.score.numerator = static_cast<std::size_t>(parse_u64(f[9], "intersection"));
      r.score.denominator = static_cast<std::size_t>(parse_u64(f[10], "union"));
    } else {
      r.error = f[11];
    }
    c.report.results.push_back(std::move(r));
  }
  if (!header) throw Error("report CSV has no header");
  return cells;
}

TableSummary summarize(std::span<const CellReport> cells) {
  TableSummary t;
  struct Key {
    std::size_t factor;
    double snr;
    bool operator==(const Key&) const = default;
  };
  std::vector<Key> keys;
  for (const auto& c : cells) {
    const Key k{c.cell.sample_factor, c.cell.snr_db};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      keys.push_back(k);
      t.columns.push_back(format_double(c.cell.sample_time_ms()) + "ms/" + format_double(c.cell.snr_db) +
                          "dB");
    }
    for (const auto& r : c.report.results) {
      if (std::find(t.models.begin(), t.models.end(), r.name) == t.models.end()) {
        t.models.push_back(r.name);
      }
    }
  }
  const std::size_t m = t.models.size(), n = keys.size();
  std::vector<std::vector<double>> acc_sum(m, std::vector<double>(n, 0.0)), score_sum = acc_sum;
  std::vector<std::vector<std::size_t>> acc_n(m, std::vector<std::size_t>(n, 0)), score_n = acc_n;
  for (const auto& c : cells) {
    const auto col = static_cast<std::size_t>(
        std::find(keys.begin(), keys.end(), Key{c.cell.sample_factor, c.cell.snr_db}) - keys.begin());
    for (const auto& r : c.report.results) {
      const auto row = static_cast<std::size_t>(
          std::find(t.models.begin(), t.models.end(), r.name) - t.models.begin());
      acc_sum[row][col] += r.accuracy;
      acc_n[row][col]++;
      if (r.scored) {
        score_sum[row][col] += r.score.value;
        score_n[row][col]++;
      }
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto mean_row = [](const std::vector<double>& v) {
    double s = 0.0;
    std::size_t k = 0;
    for (double x : v) {
      if (!std::isnan(x)) {
        s += x;
        ++k;
      }
    }
    return k ? s / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN();
  };
  t.accuracy.assign(m, std::vector<double>(n, nan));
  t.score = t.accuracy;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (acc_n[i][j]) t.accuracy[i][j] = acc_sum[i][j] / static_cast<double>(acc_n[i][j]);
      if (score_n[i][j]) t.score[i][j] = score_sum[i][j] / static_cast<double>(score_n[i][j]);
    }
    t.average_accuracy.push_back(mean_row(t.accuracy[i]));
    t.average_score.push_back(mean_row(t.score[i]));
  }
  return t;
}

std::string report_text(std::span<const CellReport> cells, const Provenance& provenance) {
  const auto t = summarize(cells);
  std::size_t name_w = 5;
  for (const auto& m : t.models) name_w = std::max(name_w, m.size());
  std::size_t col_w = 7;
  for (const auto& c : t.columns) col_w = std::max(col_w, c.size() + 4);
  const auto cell = [](double v, bool percent) {
    if (std::isnan(v)) return std::string("n/a");
    return percent ? fmt::format("{:.2f}", 100.0 * v) : fmt::format("{:.3f}", v);
  };
  std::string out = fmt::format("{:<{}}", "Model", name_w);
  for (const auto& c : t.columns) out += fmt::format(" | {:>{}} {:>6}", "Acc " + c, col_w, "Score");
  out += fmt::format(" | {:>{}} {:>6}\n", "Acc Average", col_w, "Score");
  for (std::size_t i = 0; i < t.models.size(); ++i) {
    out += fmt::format("{:<{}}", t.models[i], name_w);
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      out += fmt::format(" | {:>{}} {:>6}", cell(t.accuracy[i][j], true), col_w,
                         cell(t.score[i][j], false));
    }
    out += fmt::format(" | {:>{}} {:>6}\n", cell(t.average_accuracy[i], true), col_w,
                       cell(t.average_score[i], false));
  }
  std::size_t failed = 0;
  for (const auto& c : cells) failed += c.error.empty() ? 0 : 1;
  out += "\n";
  for (const auto& [k, v] : provenance) out += "# " + k + "=" + one_line(v) + "\n";
  if (failed) out += "# failed_cells=" + std::to_string(failed) + "\n";
  return out;
}

std::string report_plotdata(std::span<const CellReport> cells) {
  std::string out = "series,sample_time_ms,snr_db,seed,model,index,label,value\n";
  for (const auto& c : cells) {
    const std::string prefix = format_double(c.cell.sample_time_ms()) + "," +
                               format_double(c.cell.snr_db) + "," + std::to_string(c.cell.seed);
    for (const auto& r : c.report.results) {
      const std::string who = prefix + "," + csv_field(r.name) + ",";
      for (std::size_t i = 0; i < r.mean_abs_phi.size(); ++i) {
        out += "phi," + who + std::to_string(i) + "," + r.feature_names[i] + "," +
               format_double(r.mean_abs_phi[i]) + "\n";
      }
      for (std::size_t n = 0; n < r.mean_res.size(); ++n) {
        const std::string label = n < r.regions.size() ? std::to_string(r.regions[n].begin) + "-" +
                                                             std::to_string(r.regions[n].end)
                                                       : "";
        const std::string tail = std::to_string(n) + "," + label + ",";
        out += "res," + who + tail + format_double(r.mean_res[n]) + "\n";
        out += "truth," + who + tail + (r.truth_regions[n] ? "1" : "0") + "\n";
        out += "marked," + who + tail + (r.marked_regions[n] ? "1" : "0") + "\n";
      }
    }
  }
  return out;
}

std::string emit_report(std::span<const CellReport> cells, const Provenance& provenance,
                        ReportFormat format) {
  if (cells.empty()) throw Error("no cell reports to emit");
  switch (format) {
    case ReportFormat::csv: return report_csv(cells, provenance);
    case ReportFormat::text: return report_text(cells, provenance);
    case ReportFormat::plotdata: return report_plotdata(cells);
  }
  return {};
}

std::string cell_to_json(const CellReport& c) {
  json results = json::array();
  for (const auto& r : c.report.results) {
    json regions = json::array();
    for (const auto& s : r.regions) regions.push_back({s.begin, s.end});
    results.push_back({{"name", r.name},
                       {"family", models::to_string(r.family)},
                       {"method", soft::to_string(r.method)},
                       {"accuracy", r.accuracy},
                       {"scored", r.scored},
                       {"score",
                        {{"value", r.score.value},
                         {"numerator", r.score.numerator},
                         {"denominator", r.score.denominator}}},
                       {"error", r.error},
                       {"feature_names", r.feature_names},
                       {"mean_abs_phi", r.mean_abs_phi},
                       {"top_features", r.top_features},
                       {"regions", regions},
                       {"mean_res", r.mean_res},
                       {"truth_regions", r.truth_regions},
                       {"marked_regions", r.marked_regions}});
  }
  json j = {{"cell",
             {{"sample_factor", c.cell.sample_factor},
              {"snr_db", c.cell.snr_db},
              {"seed", c.cell.seed}}},
            {"error", c.error},
            {"provenance", c.report.provenance},
            {"results", results}};
  return j.dump(2) + "\n";
}

CellReport cell_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    CellReport c;
    const auto& cell = j.at("cell");
    c.cell = {cell.at("sample_factor").get<std::size_t>(), cell.at("snr_db").get<double>(),
              cell.at("seed").get<std::uint64_t>()};
    c.error = j.at("error").get<std::string>();
    c.report.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    for (const auto& x : j.at("results")) {
      soft::ModelResult r;
      r.name = x.at("name").get<std::string>();
      r.family = family_from_string(x.at("family").get<std::string>());
      r.method = soft::method_from_string(x.at("method").get<std::string>());
      r.accuracy = x.at("accuracy").get<double>();
      r.scored = x.at("scored").get<bool>();
      r.score.value = x.at("score").at("value").get<double>();
      r.score.numerator = x.at("score").at("numerator").get<std::size_t>();
      r.score.denominator = x.at("score").at("denominator").get<std::size_t>();
      r.score.method = r.method;
      r.error = x.at("error").get<std::string>();
      r.feature_names = x.at("feature_names").get<std::vector<std::string>>();
      r.mean_abs_phi = x.at("mean_abs_phi").get<std::vector<double>>();
      r.top_features = x.at("top_features").get<std::vector<std::string>>();
      for (const auto& s : x.at("regions")) {
        r.regions.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
      }
      r.mean_res = x.at("mean_res").get<std::vector<double>>();
      r.truth_regions = x.at("truth_regions").get<std::vector<bool>>();
      r.marked_regions = x.at("marked_regions").get<std::vector<bool>>();
      c.report.results.push_back(std::move(r));
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed cell result: ") + e.what());
  }
}

}  // namespace xsei::harness
