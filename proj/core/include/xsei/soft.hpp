#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xsei/explain.hpp"
#include "xsei/features.hpp"
#include "xsei/models.hpp"
#include "xsei/signal.hpp"

namespace xsei::soft {

enum class RegionDerivation { mask, pairwise };
enum class Method { shap_top5, occlusion };
/// Class whose probability occlusion tracks: the probe's label or the model's prediction.
enum class OcclusionTarget { label, predicted };

std::string to_string(RegionDerivation d);
RegionDerivation region_derivation_from_string(const std::string& s);
std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(OcclusionTarget t);
OcclusionTarget occlusion_target_from_string(const std::string& s);

struct GroundTruthRegions {
  std::vector<bool> flags;
  RegionDerivation derivation = RegionDerivation::mask;
};

/// Region n is flagged iff at least one masked sample falls inside it.
GroundTruthRegions ground_truth_regions(const signal::ArcMask& mask, std::size_t regions);
/// Region n is flagged iff max |normal - arc| over the region exceeds `tolerance`.
GroundTruthRegions ground_truth_regions(std::span<const double> normal, std::span<const double> arc,
                                        std::size_t regions, double tolerance = 1e-6);
GroundTruthRegions ground_truth_regions(const signal::SignalWindow& normal,
                                        const signal::SignalWindow& arc, std::size_t regions,
                                        double tolerance = 1e-6);

struct SoftScore {
  double value = 0.0;
  std::size_t numerator = 0;    // |intersection|
  std::size_t denominator = 0;  // |union|
  Method method = Method::shap_top5;
};

/// Features ranked by mean |phi| over the attributions; ties keep pool order.
std::vector<std::string> top_k_features(std::span<const explain::ShapleyAttribution> attributions,
                                        const std::vector<std::string>& names, std::size_t k = 5);

/// Mean |phi| per feature over the attributions.
std::vector<double> mean_abs_phi(std::span<const explain::ShapleyAttribution> attributions,
                                 std::size_t features);

/// Jaccard index of the ground-truth set and the attributed set.
SoftScore score_feature_pool(const std::vector<std::string>& ground_truth,
                             const std::vector<std::string>& attributed);

/// Default responsibility above which a region counts as marked.
inline constexpr double kDefaultRegionThreshold = 0.1;

/// Region flagged iff Res > threshold.
std::vector<bool> mark_regions(std::span<const double> responsibilities,
                               double threshold = kDefaultRegionThreshold);
std::vector<bool> mark_regions(const explain::OcclusionMap& map,
                               double threshold = kDefaultRegionThreshold);

/// Jaccard index of two region vectors. Throws when both are all-false.
SoftScore score_regions(const std::vector<bool>& truth, const std::vector<bool>& marked);

struct EvalConfig {
  std::vector<std::string> ground_truth = features::ground_truth_names();
  std::size_t top_k = 5;
  explain::Removal removal = explain::Removal::baseline;
  std::size_t max_explain = 16;  // feature rows attributed per model
  std::size_t regions = 20;
  double threshold = kDefaultRegionThreshold;
  explain::OcclusionBaseline occlusion_baseline = explain::OcclusionBaseline::constant;
  OcclusionTarget occlusion_target = OcclusionTarget::label;
  RegionDerivation derivation = RegionDerivation::mask;
  double pairwise_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct EvalData {
  /// Feature-pool models: accuracy on `feature_test`, attributions on its
  /// first `max_explain` rows against `background`.
  models::FeatureData feature_test;
  std::vector<std::vector<double>> background;
  /// Raw-signal models: accuracy on `signal_test`, occlusion on `probes`.
  std::vector<signal::SignalWindow> signal_test;
  std::vector<signal::SignalWindow> probes;
  /// Arc-free twins of `probes`, needed for pairwise ground truth.
  std::vector<signal::SignalWindow> probe_twins;
};

struct ModelResult {
  std::string name;
  models::Family family = models::Family::feature_pool;
  Method method = Method::shap_top5;
  double accuracy = 0.0;
  bool scored = false;
  SoftScore score;
  std::string error;  // why the model has no score

  std::vector<std::string> feature_names;
  std::vector<double> mean_abs_phi;
  std::vector<std::string> top_features;

  std::vector<signal::Span> regions;  // grid of the first probe
  std::vector<double> mean_res;
  std::vector<bool> truth_regions;
  std::vector<bool> marked_regions;
};

struct XseiReport {
  std::vector<ModelResult> results;
  std::map<std::string, std::string> provenance;
};

/// Accuracy and soft score of every model. Feature-pool models are explained
/// with exact Shapley values of their predicted class, raw-signal models by
/// occlusion of the `occlusion_target` class averaged over the probe windows.
/// A failing model is reported with its error and the run continues.
XseiReport soft_evaluate(std::span<const models::TrainedModel> models, const EvalData& data,
                         const EvalConfig& config);

/// Evaluates one model as soft_evaluate does.
ModelResult evaluate_model(const models::Model& model, const EvalData& data,
                           const EvalConfig& config);

std::map<std::string, std::string> provenance(const EvalConfig& config);

}  // namespace xsei::soft
