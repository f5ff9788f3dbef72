#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xsei/signal.hpp"

namespace xsei::features {

/// Every feature the extractor knows, in canonical order.
const std::vector<std::string>& known_features();

/// The five ground-truth arc indicators: variance, entropy, range, rms, integral.
const std::vector<std::string>& ground_truth_names();

/// Number of amplitude-histogram bins behind the entropy feature.
inline constexpr std::size_t kEntropyBins = 64;
/// |x| below this fraction of max|x| counts as zero current.
inline constexpr double kZeroCurrentThreshold = 0.05;

/// Ordered set of enabled features. Exact Shapley enumeration bounds it to 15.
class FeaturePool {
 public:
  explicit FeaturePool(std::vector<std::string> names);

  /// mean, variance, range, rms, integral, entropy, skewness, kurtosis, l1, l2,
  /// zero_current_period, max_slip.
  static FeaturePool default_pool();

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  /// Position of `name`; throws if the pool does not contain it.
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::vector<std::string> names_;
};

struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;
  bool degenerate = false;  // window had max == min

  double at(const std::string& name) const;
};

/// Computes the enabled features of one window. Never produces NaN: a
/// constant window yields entropy, skewness and kurtosis of 0 and is flagged.
FeatureVector extract(const signal::SignalWindow& win, const FeaturePool& pool);
FeatureVector extract(std::span<const double> samples, double sample_period_ms,
                      const FeaturePool& pool);

/// Feature rows for a window set, in window order.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::uint32_t> window_ids;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

FeatureTable extract_table(std::span<const signal::SignalWindow> windows, const FeaturePool& pool);

/// CSV: header `window_id,<pool names...>,label`, one row per window.
std::string to_csv(const FeatureTable& table);

}  // namespace xsei::features
