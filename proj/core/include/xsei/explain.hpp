#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xsei/models.hpp"
#include "xsei/signal.hpp"

namespace xsei::explain {

/// Largest feature count accepted by exact enumeration.
inline constexpr std::size_t kMaxExactFeatures = 15;
/// Background rows averaged over by marginal removal.
inline constexpr std::size_t kMarginalRowCap = 128;

enum class Removal { baseline, random_sample, marginal };
enum class OcclusionBaseline { blur, constant, noise };

std::string to_string(Removal r);
Removal removal_from_string(const std::string& s);
std::string to_string(OcclusionBaseline b);
OcclusionBaseline occlusion_baseline_from_string(const std::string& s);

/// Coalitions are bit sets: bit i set means feature i is present.
using Coalition = std::uint64_t;

/// A cooperative game over `players` features. `value` must be deterministic.
class CoalitionGame {
 public:
  using ValueFn = std::function<double(Coalition)>;

  CoalitionGame(std::size_t players, ValueFn value, Removal removal = Removal::baseline);

  std::size_t players() const { return players_; }
  Removal removal() const { return removal_; }
  Coalition full() const;
  double operator()(Coalition s) const { return value_(s); }

 private:
  std::size_t players_;
  ValueFn value_;
  Removal removal_;
};

/// Value of every coalition, indexed by its bit set. Needs players <= 15.
std::vector<double> coalition_table(const CoalitionGame& game);

/// Exact Shapley value of player `i` by full enumeration.
double shapley_exact(const CoalitionGame& game, std::size_t i);
/// All exact Shapley values from one pass over the 2^d coalitions.
std::vector<double> shapley_exact_all(const CoalitionGame& game);
/// Same, from a precomputed coalition table.
std::vector<double> shapley_from_table(std::span<const double> table, std::size_t players);

struct SampledEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t permutations = 0;
  bool exhaustive = false;
};

/// Permutation-sampling estimate of player `i`. When `num_permutations`
/// reaches d! every ordering is enumerated once and the result is exact.
SampledEstimate shapley_sampled(const CoalitionGame& game, std::size_t i,
                                std::size_t num_permutations, std::uint64_t seed);

struct ShapleyAttribution {
  std::vector<double> phi;
  int target_class = 0;
  double base_value = 0.0;  // G(empty)
  double full_value = 0.0;  // G(all features)
};

/// G(s) = probability of `target_class` when features outside s are removed.
/// baseline: replaced by background column means (zeros if no background);
/// random_sample: replaced by one seeded background row;
/// marginal: predictions averaged over up to 128 seeded background rows.
CoalitionGame make_game(const models::Model& model, std::span<const double> sample,
                        int target_class, Removal removal,
                        const std::vector<std::vector<double>>& background, std::uint64_t seed);

/// Exact attribution of one sample.
ShapleyAttribution explain_sample(const models::Model& model, std::span<const double> sample,
                                  int target_class, Removal removal,
                                  const std::vector<std::vector<double>>& background,
                                  std::uint64_t seed);

struct OcclusionMap {
  std::vector<signal::Span> regions;
  std::vector<double> responsibilities;
  OcclusionBaseline baseline = OcclusionBaseline::constant;
  int target_class = 0;
  double original_probability = 0.0;
};

/// N contiguous spans partitioning [0, length): region n is
/// [floor(n * length / N), floor((n + 1) * length / N)).
std::vector<signal::Span> region_grid(std::size_t length, std::size_t regions);

/// Width of the moving average used by the blur baseline.
inline constexpr std::size_t kBlurWidth = 9;

/// Copy of `samples` with `region` replaced by the baseline.
std::vector<double> occlude_region(std::span<const double> samples, signal::Span region,
                                   OcclusionBaseline baseline, std::uint64_t seed);

/// Responsibility 1 - p(masked) / p(original) of each region for `target_class`.
OcclusionMap occlude(const models::Model& model, std::span<const double> samples, int target_class,
                     std::size_t regions, OcclusionBaseline baseline, std::uint64_t seed);
OcclusionMap occlude(const models::Model& model, const signal::SignalWindow& win, int target_class,
                     std::size_t regions, OcclusionBaseline baseline, std::uint64_t seed);

/// CSV `feature_name,phi`.
std::string attribution_csv(const std::vector<std::string>& names, const ShapleyAttribution& a);
/// CSV `region_start,region_end,res`.
std::string occlusion_csv(const OcclusionMap& map);

}  // namespace xsei::explain
