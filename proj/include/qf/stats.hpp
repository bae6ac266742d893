#pragma once

#include <optional>
#include <span>
#include <vector>

namespace qf::stats {

double mean(std::span<const double> x);
/// Sum of squared deviations around the mean (two-pass).
double sum_sq_dev(std::span<const double> x);
/// Population std (divide by n). Exactly 0 when all values are equal.
double population_std(std::span<const double> x);
/// Sample std (divide by n - 1); nullopt when n < 2. Exactly 0 for constants.
std::optional<double> sample_std(std::span<const double> x);
bool all_equal(std::span<const double> x);

/// Pearson correlation; nullopt when n < 2 or either side is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);
/// Pearson correlation of average ranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace qf::stats
