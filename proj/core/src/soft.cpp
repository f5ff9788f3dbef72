#include "xsei/soft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xsei/common.hpp"

namespace xsei::soft {

std::string to_string(RegionDerivation d) { return d == RegionDerivation::mask ? "mask" : "pairwise"; }

RegionDerivation region_derivation_from_string(const std::string& s) {
  if (s == "mask") return RegionDerivation::mask;
  if (s == "pairwise") return RegionDerivation::pairwise;
  throw Error("unknown region derivation '" + s + "' (expected mask or pairwise)");
}

std::string to_string(OcclusionTarget t) {
  return t == OcclusionTarget::label ? "label" : "predicted";
}

OcclusionTarget occlusion_target_from_string(const std::string& s) {
  if (s == "label") return OcclusionTarget::label;
  if (s == "predicted") return OcclusionTarget::predicted;
  throw Error("unknown occlusion target '" + s + "' (expected label or predicted)");
}

std::string to_string(Method m) { return m == Method::shap_top5 ? "shap_top5" : "occlusion"; }

Method method_from_string(const std::string& s) {
  if (s == "shap_top5") return Method::shap_top5;
  if (s == "occlusion") return Method::occlusion;
  throw Error("unknown scoring method '" + s + "'");
}

GroundTruthRegions ground_truth_regions(const signal::ArcMask& mask, std::size_t regions) {
  const auto grid = explain::region_grid(mask.size(), regions);
  GroundTruthRegions r{std::vector<bool>(regions, false), RegionDerivation::mask};
  for (std::size_t n = 0; n < regions; ++n) {
    for (std::size_t t = grid[n].begin; t < grid[n].end; ++t) {
      if (mask.flags[t]) {
        r.flags[n] = true;
        break;
      }
    }
  }
  return r;
}

GroundTruthRegions ground_truth_regions(std::span<const double> normal, std::span<const double> arc,
                                        std::size_t regions, double tolerance) {
  if (normal.size() != arc.size()) {
    throw Error("pairwise ground truth needs aligned windows of equal length (" +
                std::to_string(normal.size()) + " vs " + std::to_string(arc.size()) + ")");
  }
  if (!(tolerance >= 0.0)) throw Error("pairwise tolerance must be >= 0");
  const auto grid = explain::region_grid(normal.size(), regions);
  GroundTruthRegions r{std::vector<bool>(regions, false), RegionDerivation::pairwise};
  for (std::size_t n = 0; n < regions; ++n) {
    for (std::size_t t = grid[n].begin; t < grid[n].end; ++t) {
      if (std::abs(normal[t] - arc[t]) > tolerance) {
        r.flags[n] = true;
        break;
      }
    }
  }
  return r;
}

GroundTruthRegions ground_truth_regions(const signal::SignalWindow& normal,
                                        const signal::SignalWindow& arc, std::size_t regions,
                                        double tolerance) {
  if (normal.sample_period_ms != arc.sample_period_ms) {
    throw Error("pairwise ground truth needs windows with the same sample period");
  }
  return ground_truth_regions(std::span<const double>(normal.samples),
                              std::span<const double>(arc.samples), regions, tolerance);
}

std::vector<double> mean_abs_phi(std::span<const explain::ShapleyAttribution> attributions,
                                 std::size_t features) {
  if (attributions.empty()) throw Error("no attributions to rank");
  std::vector<double> mean(features, 0.0);
  for (const auto& a : attributions) {
    if (a.phi.size() != features) throw Error("attribution width does not match the feature list");
    for (std::size_t i = 0; i < features; ++i) mean[i] += std::abs(a.phi[i]);
  }
  for (double& m : mean) m /= static_cast<double>(attributions.size());
  return mean;
}

std::vector<std::string> top_k_features(std::span<const explain::ShapleyAttribution> attributions,
                                        const std::vector<std::string>& names, std::size_t k) {
  if (k == 0 || k > names.size()) throw Error("top-k needs 1 <= k <= feature count");
  const auto mean = mean_abs_phi(attributions, names.size());
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  std::vector<std::string> top;
  for (std::size_t i = 0; i < k; ++i) top.push_back(names[order[i]]);
  return top;
}

SoftScore score_feature_pool(const std::vector<std::string>& ground_truth,
                             const std::vector<std::string>& attributed) {
  const std::set<std::string> a(ground_truth.begin(), ground_truth.end());
  const std::set<std::string> b(attributed.begin(), attributed.end());
  if (a.empty() || b.empty()) throw Error("feature sets must be nonempty");
  std::size_t inter = 0;
  for (const auto& s : b) inter += a.contains(s) ? 1 : 0;
  const std::size_t uni = a.size() + b.size() - inter;
  return {static_cast<double>(inter) / static_cast<double>(uni), inter, uni, Method::shap_top5};
}

std::vector<bool> mark_regions(std::span<const double> responsibilities, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("region threshold must be in [0, 1]");
  std::vector<bool> marked(responsibilities.size());
  for (std::size_t n = 0; n < marked.size(); ++n) marked[n] = responsibilities[n] > threshold;
  return marked;
}

std::vector<bool> mark_regions(const explain::OcclusionMap& map, double threshold) {
  return mark_regions(map.responsibilities, threshold);
}

SoftScore score_regions(const std::vector<bool>& truth, const std::vector<bool>& marked) {
  if (truth.size() != marked.size()) throw Error("region vectors differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    inter += (truth[n] && marked[n]) ? 1 : 0;
    uni += (truth[n] || marked[n]) ? 1 : 0;
  }
  if (uni == 0) throw Error("degenerate region score: no region is flagged in either vector");
  return {static_cast<double>(inter) / static_cast<double>(uni), inter, uni, Method::occlusion};
}

namespace {

void evaluate_feature_model(const models::Model& model, const EvalData& data,
                            const EvalConfig& config, ModelResult& out) {
  const auto& test = data.feature_test;
  if (test.rows.empty()) throw Error("no feature test set for a feature-pool model");
  if (test.names != model.feature_names()) {
    throw Error("test features do not match the columns the model was trained on");
  }
  out.accuracy = models::accuracy(model, test);
  const std::size_t count = std::min(config.max_explain, test.rows.size());
  if (count == 0) throw Error("max_explain must be >= 1");
  std::vector<explain::ShapleyAttribution> attributions;
  attributions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int target = static_cast<int>(argmax(model.predict_row(test.rows[i])));
    attributions.push_back(explain::explain_sample(
        model, test.rows[i], target, config.removal, data.background,
        derive_seed(config.seed, "shapley", {static_cast<std::int64_t>(i)})));
  }
  out.feature_names = test.names;
  out.mean_abs_phi = mean_abs_phi(attributions, test.names.size());
  out.top_features = top_k_features(attributions, test.names, config.top_k);
  out.score = score_feature_pool(config.ground_truth, out.top_features);
  out.scored = true;
}

void evaluate_signal_model(const models::Model& model, const EvalData& data,
                           const EvalConfig& config, ModelResult& out) {
  if (data.signal_test.empty()) throw Error("no signal test set for a raw-signal model");
  out.accuracy = models::accuracy(model, data.signal_test);
  if (data.probes.empty()) throw Error("no probe windows for occlusion");
  if (config.derivation == RegionDerivation::pairwise && data.probe_twins.size() != data.probes.size()) {
    throw Error("pairwise ground truth needs one arc-free twin per probe");
  }
  const std::size_t length = data.probes[0].size();
  out.mean_res.assign(config.regions, 0.0);
  out.truth_regions.assign(config.regions, false);
  for (std::size_t j = 0; j < data.probes.size(); ++j) {
    const auto& probe = data.probes[j];
    if (probe.size() != length) throw Error("probe windows differ in length");
    const int target = config.occlusion_target == OcclusionTarget::label
                           ? probe.label
                           : static_cast<int>(argmax(model.predict_samples(probe.samples)));
    const auto map = explain::occlude(model, probe, target, config.regions, config.occlusion_baseline,
                                      derive_seed(config.seed, "occlusion", {static_cast<std::int64_t>(j)}));
    if (j == 0) out.regions = map.regions;
    for (std::size_t n = 0; n < config.regions; ++n) out.mean_res[n] += map.responsibilities[n];
    const auto truth = config.derivation == RegionDerivation::mask
                           ? ground_truth_regions(probe.mask, config.regions)
                           : ground_truth_regions(data.probe_twins[j], probe, config.regions,
                                                  config.pairwise_tolerance);
    for (std::size_t n = 0; n < config.regions; ++n) {
      if (truth.flags[n]) out.truth_regions[n] = true;
    }
  }
  for (double& r : out.mean_res) r /= static_cast<double>(data.probes.size());
  out.marked_regions = mark_regions(out.mean_res, config.threshold);
  out.score = score_regions(out.truth_regions, out.marked_regions);
  out.scored = true;
}

}  // namespace

ModelResult evaluate_model(const models::Model& model, const EvalData& data,
                           const EvalConfig& config) {
  ModelResult out;
  out.name = model.descriptor().name;
  out.family = model.family();
  out.method = model.family() == models::Family::feature_pool ? Method::shap_top5 : Method::occlusion;
  out.score.method = out.method;
  try {
    if (out.family == models::Family::feature_pool) {
      evaluate_feature_model(model, data, config, out);
    } else {
      evaluate_signal_model(model, data, config, out);
    }
  } catch (const Error& e) {
    out.scored = false;
    out.error = e.what();
  }
  return out;
}

std::map<std::string, std::string> provenance(const EvalConfig& config) {
  std::string gt;
  for (const auto& s : config.ground_truth) gt += (gt.empty() ? "" : ";") + s;
  return {{"ground_truth", gt},
          {"top_k", std::to_string(config.top_k)},
          {"removal", explain::to_string(config.removal)},
          {"max_explain", std::to_string(config.max_explain)},
          {"regions", std::to_string(config.regions)},
          {"threshold", format_double(config.threshold)},
          {"occlusion_baseline", explain::to_string(config.occlusion_baseline)},
          {"occlusion_target", to_string(config.occlusion_target)},
          {"region_derivation", to_string(config.derivation)},
          {"pairwise_tolerance", format_double(config.pairwise_tolerance)},
          {"explain_seed", std::to_string(config.seed)}};
}

XseiReport soft_evaluate(std::span<const models::TrainedModel> models, const EvalData& data,
                         const EvalConfig& config) {
  if (config.ground_truth.empty()) throw Error("ground-truth feature set is empty");
  XseiReport report;
  report.provenance = provenance(config);
  for (const auto& m : models) {
    if (!m) throw Error("null model in evaluation list");
    report.results.push_back(evaluate_model(*m, data, config));
  }
  return report;
}

}  // namespace xsei::soft
