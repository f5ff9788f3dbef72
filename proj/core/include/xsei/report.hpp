#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "xsei/config.hpp"
#include "xsei/soft.hpp"

namespace xsei::harness {

/// Outcome of one grid cell. A cell-level failure leaves `report` empty and
/// sets `error`.
struct CellReport {
  GridCell cell;
  soft::XseiReport report;
  std::string error;
};

using Provenance = std::map<std::string, std::string>;

enum class ReportFormat { csv, text, plotdata };

std::string to_string(ReportFormat f);
ReportFormat report_format_from_string(const std::string& s);

/// Long-format CSV: `# key=value` provenance lines, then one row per
/// (cell, model) plus one row per failed cell.
std::string report_csv(std::span<const CellReport> cells, const Provenance& provenance);
/// Inverse of report_csv for the fields it carries.
std::vector<CellReport> parse_report_csv(const std::string& text, Provenance* provenance = nullptr);

/// Aligned table: one row per model, an Acc/Score column pair per
/// (sample time, SNR) column averaged over seeds, and a trailing Average pair.
std::string report_text(std::span<const CellReport> cells, const Provenance& provenance);

/// CSV `series,sample_time_ms,snr_db,seed,model,index,label,value` with the
/// mean |phi| per feature (series phi) and mean Res, ground truth and marks
/// per region (series res, truth, marked).
std::string report_plotdata(std::span<const CellReport> cells);

std::string emit_report(std::span<const CellReport> cells, const Provenance& provenance,
                        ReportFormat format);

/// Lossless JSON of one cell, used for resumable grid persistence.
std::string cell_to_json(const CellReport& cell);
CellReport cell_from_json(const std::string& text);

/// Row/column summary used by the text table and by tests.
struct TableSummary {
  std::vector<std::string> models;
  std::vector<std::string> columns;
  /// [model][column]; NaN where the model has no value in that column.
  std::vector<std::vector<double>> accuracy;
  std::vector<std::vector<double>> score;
  std::vector<double> average_accuracy;
  std::vector<double> average_score;
};

TableSummary summarize(std::span<const CellReport> cells);

}  // namespace xsei::harness
