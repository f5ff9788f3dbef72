#include "xsei/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_set>

#include "xsei/common.hpp"

namespace xsei::features {

const std::vector<std::string>& known_features() {
  static const std::vector<std::string> names = {
      "mean", "variance", "range", "rms", "integral", "entropy", "skewness",
      "kurtosis", "l1", "l2", "zero_current_period", "max_slip"};
  return names;
}

const std::vector<std::string>& ground_truth_names() {
  static const std::vector<std::string> names = {"variance", "entropy", "range", "rms",
                                                 "integral"};
  return names;
}

FeaturePool::FeaturePool(std::vector<std::string> names) : names_(std::move(names)) {
  const auto& known = known_features();
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (std::find(known.begin(), known.end(), n) == known.end()) {
      throw Error("unknown feature '" + n + "'");
    }
    if (!seen.insert(n).second) throw Error("feature '" + n + "' listed twice");
  }
  for (const auto& gt : ground_truth_names()) {
    if (!seen.contains(gt)) throw Error("feature pool must contain ground-truth feature '" + gt + "'");
  }
  if (names_.size() < 5 || names_.size() > 15) {
    throw Error("feature pool size must be within [5, 15]");
  }
}

FeaturePool FeaturePool::default_pool() { return FeaturePool(known_features()); }

std::size_t FeaturePool::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error("feature '" + name + "' is not in the pool");
  return static_cast<std::size_t>(it - names_.begin());
}

bool FeaturePool::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

double FeatureVector::at(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error("feature '" + name + "' not present");
  return values[static_cast<std::size_t>(it - names.begin())];
}

namespace {

struct Moments {
  double min = 0, max = 0, mean = 0, m2 = 0, m3 = 0, m4 = 0;
  double sum_abs = 0, sum_sq = 0, max_abs = 0, max_step = 0;
};

Moments moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  m.min = m.max = x[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    m.min = std::min(m.min, v);
    m.max = std::max(m.max, v);
    sum += v;
    m.sum_abs += std::abs(v);
    m.sum_sq += v * v;
    m.max_abs = std::max(m.max_abs, std::abs(v));
    if (i > 0) m.max_step = std::max(m.max_step, std::abs(v - x[i - 1]));
  }
  m.mean = sum / n;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

double histogram_entropy(std::span<const double> x, double lo, double hi) {
  std::array<std::size_t, kEntropyBins> counts{};
  const double width = hi - lo;
  for (double v : x) {
    auto bin = static_cast<std::size_t>((v - lo) / width * static_cast<double>(kEntropyBins));
    counts[std::min(bin, kEntropyBins - 1)]++;
  }
  const double n = static_cast<double>(x.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

FeatureVector extract(std::span<const double> x, double sample_period_ms, const FeaturePool& pool) {
  if (x.size() < 2) throw Error("feature extraction needs at least two samples");
  const Moments m = moments(x);
  const bool degenerate = !(m.max > m.min);
  const double n = static_cast<double>(x.size());
  FeatureVector fv;
  fv.names = pool.names();
  fv.values.reserve(pool.size());
  fv.degenerate = degenerate;
  for (const auto& name : pool.names()) {
    double v = 0.0;
    if (name == "mean") {
      v = m.mean;
    } else if (name == "variance") {
      v = m.m2;
    } else if (name == "range") {
      v = m.max - m.min;
    } else if (name == "rms") {
      v = std::sqrt(m.sum_sq / n);
    } else if (name == "integral") {
      v = m.sum_abs * sample_period_ms;
    } else if (name == "entropy") {
      v = degenerate ? 0.0 : histogram_entropy(x, m.min, m.max);
    } else if (name == "skewness") {
      v = (degenerate || m.m2 <= 0.0) ? 0.0 : m.m3 / std::pow(m.m2, 1.5);
    } else if (name == "kurtosis") {
      v = (degenerate || m.m2 <= 0.0) ? 0.0 : m.m4 / (m.m2 * m.m2);
    } else if (name == "l1") {
      v = m.sum_abs;
    } else if (name == "l2") {
      v = std::sqrt(m.sum_sq);
    } else if (name == "zero_current_period") {
      const double threshold = kZeroCurrentThreshold * m.max_abs;
      std::size_t zero = 0;
      for (double s : x) zero += std::abs(s) < threshold ? 1 : 0;
      v = static_cast<double>(zero) / n;
    } else if (name == "max_slip") {
      v = m.max_step;
    }
    fv.values.push_back(std::isfinite(v) ? v : 0.0);
  }
  return fv;
}

FeatureVector extract(const signal::SignalWindow& win, const FeaturePool& pool) {
  return extract(win.samples, win.sample_period_ms, pool);
}

FeatureTable extract_table(std::span<const signal::SignalWindow> windows, const FeaturePool& pool) {
  FeatureTable t;
  t.names = pool.names();
  t.rows.reserve(windows.size());
  for (const auto& w : windows) {
    t.window_ids.push_back(w.id);
    t.rows.push_back(extract(w, pool).values);
    t.labels.push_back(w.label);
  }
  return t;
}

std::string to_csv(const FeatureTable& table) {
  std::string out = "window_id";
  for (const auto& n : table.names) out += "," + n;
  out += ",label\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out += std::to_string(table.window_ids[r]);
    for (double v : table.rows[r]) out += "," + format_double(v);
    out += "," + std::to_string(table.labels[r]) + "\n";
  }
  return out;
}

}  // namespace xsei::features
