#include "qf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qf::stats {

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

bool all_equal(std::span<const double> x) {
  return std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
}

double sum_sq_dev(std::span<const double> x) {
  if (all_equal(x)) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s;
}

double population_std(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::sqrt(sum_sq_dev(x) / static_cast<double>(x.size()));
}

std::optional<double> sample_std(std::span<const double> x) {
  if (x.size() < 2) return std::nullopt;
  return std::sqrt(sum_sq_dev(x) / static_cast<double>(x.size() - 1));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2 || all_equal(x.first(n)) || all_equal(y.first(n))) return std::nullopt;
  const double mx = mean(x.first(n));
  const double my = mean(y.first(n));
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = x[k] - mx, dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t j = k;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[k]]) ++j;
    const double r = 0.5 * static_cast<double>(k + j) + 1.0;
    for (std::size_t q = k; q <= j; ++q) ranks[order[q]] = r;
    k = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return pearson(rx, ry);
}

}  // namespace qf::stats
