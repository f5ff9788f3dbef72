#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "xsei/nn.hpp"

namespace xsei::oracle {

/// Shapley values by averaging marginal contributions over all d! orderings.
inline std::vector<double> brute_force_shapley(std::size_t d,
                                               const std::function<double(std::uint64_t)>& value) {
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(d, 0.0);
  std::size_t count = 0;
  do {
    std::uint64_t s = 0;
    double prev = value(0);
    for (std::size_t p : order) {
      s |= std::uint64_t{1} << p;
      const double cur = value(s);
      phi[p] += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= static_cast<double>(count);
  return phi;
}

/// Random game as a lookup table over the 2^d coalitions.
inline std::vector<double> random_game_table(std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> t(std::size_t{1} << d);
  for (double& v : t) v = u(rng);
  return t;
}

/// Unnormalized forward DFT by direct summation.
inline std::vector<std::complex<double>> dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences of the batch loss against the analytic gradient.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck finite_difference_check(nn::Network& net, std::span<const nn::Tensor1D* const> xs,
                                         std::span<const int> labels, double h = 1e-5,
                                         double floor = 1e-6) {
  std::vector<double> grad(net.parameter_count());
  net.loss_and_gradient(xs, labels, grad);
  std::vector<double> scratch(net.parameter_count());
  GradCheck out;
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = net.loss_and_gradient(xs, labels, scratch);
    params[i] = orig - h;
    const double down = net.loss_and_gradient(xs, labels, scratch);
    params[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(grad[i] - numeric) / denom);
    ++out.checked;
  }
  return out;
}

/// Jaccard index of two index sets given as sorted vectors.
inline double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> i, u;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(i));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return static_cast<double>(i.size()) / static_cast<double>(u.size());
}

}  // namespace xsei::oracle
