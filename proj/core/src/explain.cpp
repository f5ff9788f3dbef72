#include "xsei/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "xsei/common.hpp"

namespace xsei::explain {

std::string to_string(Removal r) {
  switch (r) {
    case Removal::baseline: return "baseline";
    case Removal::random_sample: return "random";
    case Removal::marginal: return "marginal";
  }
  return "baseline";
}

Removal removal_from_string(const std::string& s) {
  if (s == "baseline") return Removal::baseline;
  if (s == "random" || s == "random_sample") return Removal::random_sample;
  if (s == "marginal") return Removal::marginal;
  throw Error("unknown removal strategy '" + s + "' (expected baseline, random or marginal)");
}

std::string to_string(OcclusionBaseline b) {
  switch (b) {
    case OcclusionBaseline::blur: return "blur";
    case OcclusionBaseline::constant: return "constant";
    case OcclusionBaseline::noise: return "noise";
  }
  return "constant";
}

OcclusionBaseline occlusion_baseline_from_string(const std::string& s) {
  if (s == "blur") return OcclusionBaseline::blur;
  if (s == "constant") return OcclusionBaseline::constant;
  if (s == "noise") return OcclusionBaseline::noise;
  throw Error("unknown occlusion baseline '" + s + "' (expected blur, constant or noise)");
}

CoalitionGame::CoalitionGame(std::size_t players, ValueFn value, Removal removal)
    : players_(players), value_(std::move(value)), removal_(removal) {
  if (players_ == 0) throw Error("a coalition game needs at least one player");
  if (players_ > 63) throw Error("coalition games support at most 63 players");
  if (!value_) throw Error("coalition game has no value function");
}

Coalition CoalitionGame::full() const { return (Coalition{1} << players_) - 1; }

std::vector<double> coalition_table(const CoalitionGame& game) {
  const std::size_t d = game.players();
  if (d > kMaxExactFeatures) {
    throw Error("exact Shapley enumeration supports at most 15 features (got " +
                std::to_string(d) + "); use shapley_sampled instead");
  }
  std::vector<double> table(std::size_t{1} << d);
  for (Coalition s = 0; s < table.size(); ++s) table[s] = game(s);
  return table;
}

std::vector<double> shapley_from_table(std::span<const double> table, std::size_t players) {
  const std::size_t d = players;
  if (table.size() != (std::size_t{1} << d)) throw Error("coalition table size does not match 2^d");
  // weight[s] = s! (d - s - 1)! / d! = 1 / (d * C(d - 1, s))
  std::vector<double> weight(d);
  double binom = 1.0;
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = 1.0 / (static_cast<double>(d) * binom);
    binom = binom * static_cast<double>(d - 1 - s) / static_cast<double>(s + 1);
  }
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const Coalition bit = Coalition{1} << i;
    double acc = 0.0;
    for (Coalition s = 0; s < table.size(); ++s) {
      if (s & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(s))] * (table[s | bit] - table[s]);
    }
    phi[i] = acc;
  }
  return phi;
}

std::vector<double> shapley_exact_all(const CoalitionGame& game) {
  return shapley_from_table(coalition_table(game), game.players());
}

double shapley_exact(const CoalitionGame& game, std::size_t i) {
  if (i >= game.players()) throw Error("feature index out of range");
  return shapley_exact_all(game)[i];
}

SampledEstimate shapley_sampled(const CoalitionGame& game, std::size_t i,
                                std::size_t num_permutations, std::uint64_t seed) {
  const std::size_t d = game.players();
  if (i >= d) throw Error("feature index out of range");
  if (num_permutations == 0) throw Error("num_permutations must be >= 1");
  const Coalition bit = Coalition{1} << i;

  double factorial = 1.0;
  for (std::size_t k = 2; k <= d; ++k) factorial *= static_cast<double>(k);
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);

  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  const auto contribution = [&] {
    Coalition before = 0;
    for (std::size_t p : perm) {
      if (p == i) break;
      before |= Coalition{1} << p;
    }
    const double x = game(before | bit) - game(before);
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  };

  SampledEstimate est;
  if (d <= 12 && static_cast<double>(num_permutations) >= factorial) {
    do {
      contribution();
    } while (std::next_permutation(perm.begin(), perm.end()));
    est.exhaustive = true;
  } else {
    std::mt19937_64 rng(derive_seed(seed, "shapley-permutations"));
    for (std::size_t k = 0; k < num_permutations; ++k) {
      std::shuffle(perm.begin(), perm.end(), rng);
      contribution();
    }
  }
  est.value = mean;
  est.permutations = n;
  est.std_error = (n > 1 && !est.exhaustive)
                      ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n))
                      : 0.0;
  return est;
}

CoalitionGame make_game(const models::Model& model, std::span<const double> sample,
                        int target_class, Removal removal,
                        const std::vector<std::vector<double>>& background, std::uint64_t seed) {
  if (model.family() != models::Family::feature_pool) {
    throw Error("Shapley games need a feature-pool model; '" + model.descriptor().name +
                "' takes raw signals");
  }
  const std::size_t d = model.feature_names().size();
  if (sample.size() != d) throw Error("explained sample has the wrong width");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= model.num_classes()) {
    throw Error("target class out of range");
  }
  for (const auto& row : background) {
    if (row.size() != d) throw Error("background row has the wrong width");
  }
  if (removal != Removal::baseline && background.empty()) {
    throw Error("removal strategy '" + to_string(removal) + "' needs a nonempty background");
  }
  const auto target = static_cast<std::size_t>(target_class);
  std::vector<double> x(sample.begin(), sample.end());

  std::vector<std::vector<double>> refs;
  if (removal == Removal::baseline) {
    std::vector<double> means(d, 0.0);
    for (const auto& row : background) {
      for (std::size_t j = 0; j < d; ++j) means[j] += row[j];
    }
    if (!background.empty()) {
      for (double& m : means) m /= static_cast<double>(background.size());
    }
    refs.push_back(std::move(means));
  } else if (removal == Removal::random_sample) {
    std::mt19937_64 rng(derive_seed(seed, "random-row"));
    std::uniform_int_distribution<std::size_t> pick(0, background.size() - 1);
    refs.push_back(background[pick(rng)]);
  } else {
    std::vector<std::size_t> idx(background.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > kMarginalRowCap) {
      std::mt19937_64 rng(derive_seed(seed, "marginal-rows"));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(kMarginalRowCap);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) refs.push_back(background[i]);
  }

  auto value = [&model, x = std::move(x), refs = std::move(refs), target, d](Coalition s) {
    std::vector<double> row(d);
    double total = 0.0;
    for (const auto& ref : refs) {
      for (std::size_t j = 0; j < d; ++j) row[j] = (s >> j) & 1U ? x[j] : ref[j];
      total += model.predict_row(row)[target];
    }
    return refs.size() == 1 ? total : total / static_cast<double>(refs.size());
  };
  return CoalitionGame(d, std::move(value), removal);
}

ShapleyAttribution explain_sample(const models::Model& model, std::span<const double> sample,
                                  int target_class, Removal removal,
                                  const std::vector<std::vector<double>>& background,
                                  std::uint64_t seed) {
  const auto game = make_game(model, sample, target_class, removal, background, seed);
  const auto table = coalition_table(game);
  ShapleyAttribution a;
  a.phi = shapley_from_table(table, game.players());
  a.target_class = target_class;
  a.base_value = table.front();
  a.full_value = table.back();
  return a;
}

std::vector<signal::Span> region_grid(std::size_t length, std::size_t regions) {
  if (regions == 0) throw Error("region count must be >= 1");
  if (regions > length) {
    throw Error("region count " + std::to_string(regions) + " exceeds window length " +
                std::to_string(length));
  }
  std::vector<signal::Span> grid(regions);
  for (std::size_t n = 0; n < regions; ++n) {
    grid[n] = {n * length / regions, (n + 1) * length / regions};
  }
  return grid;
}

std::vector<double> occlude_region(std::span<const double> samples, signal::Span region,
                                   OcclusionBaseline baseline, std::uint64_t seed) {
  if (region.end > samples.size() || region.begin > region.end) {
    throw Error("occluded region lies outside the window");
  }
  std::vector<double> out(samples.begin(), samples.end());
  switch (baseline) {
    case OcclusionBaseline::constant:
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(region.begin),
                out.begin() + static_cast<std::ptrdiff_t>(region.end), 0.0);
      break;
    case OcclusionBaseline::noise: {
      const double rms = std::sqrt(signal::mean_power(samples));
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> g(0.0, 1.0);
      for (std::size_t t = region.begin; t < region.end; ++t) out[t] = rms * g(rng);
      break;
    }
    case OcclusionBaseline::blur: {
      constexpr std::size_t half = kBlurWidth / 2;
      for (std::size_t t = region.begin; t < region.end; ++t) {
        const std::size_t lo = t >= half ? t - half : 0;
        const std::size_t hi = std::min(samples.size(), t + half + 1);
        double s = 0.0;
        for (std::size_t u = lo; u < hi; ++u) s += samples[u];
        out[t] = s / static_cast<double>(hi - lo);
      }
      break;
    }
  }
  return out;
}

OcclusionMap occlude(const models::Model& model, std::span<const double> samples, int target_class,
                     std::size_t regions, OcclusionBaseline baseline, std::uint64_t seed) {
  if (model.family() != models::Family::raw_signal) {
    throw Error("occlusion needs a raw-signal model; '" + model.descriptor().name +
                "' takes feature vectors");
  }
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= model.num_classes()) {
    throw Error("target class out of range");
  }
  OcclusionMap map;
  map.regions = region_grid(samples.size(), regions);
  map.baseline = baseline;
  map.target_class = target_class;
  const auto target = static_cast<std::size_t>(target_class);
  map.original_probability = model.predict_samples(samples)[target];
  if (!(map.original_probability > 0.0)) {
    throw Error("target-class probability of the unmasked window is 0; responsibility undefined");
  }
  std::vector<std::vector<double>> masked;
  masked.reserve(regions);
  for (std::size_t n = 0; n < regions; ++n) {
    masked.push_back(occlude_region(samples, map.regions[n], baseline,
                                    derive_seed(seed, "occlusion", {static_cast<std::int64_t>(n)})));
  }
  const auto probs = model.predict_samples_batch(masked);
  map.responsibilities.resize(regions);
  for (std::size_t n = 0; n < regions; ++n) {
    map.responsibilities[n] = 1.0 - probs[n][target] / map.original_probability;
  }
  return map;
}

OcclusionMap occlude(const models::Model& model, const signal::SignalWindow& win, int target_class,
                     std::size_t regions, OcclusionBaseline baseline, std::uint64_t seed) {
  return occlude(model, std::span<const double>(win.samples), target_class, regions, baseline, seed);
}

std::string attribution_csv(const std::vector<std::string>& names, const ShapleyAttribution& a) {
  if (names.size() != a.phi.size()) throw Error("attribution and name list differ in length");
  std::string out = "feature_name,phi\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += names[i] + "," + format_double(a.phi[i]) + "\n";
  }
  return out;
}

std::string occlusion_csv(const OcclusionMap& map) {
  std::string out = "region_start,region_end,res\n";
  for (std::size_t n = 0; n < map.regions.size(); ++n) {
    out += std::to_string(map.regions[n].begin) + "," + std::to_string(map.regions[n].end) + "," +
           format_double(map.responsibilities[n]) + "\n";
  }
  return out;
}

}  // namespace xsei::explain
