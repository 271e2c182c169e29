#include "flowpersp/robust_stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowpersp/errors.hpp"

namespace flowpersp {

TrimSpec::TrimSpec(double trim) : trim_(trim) {
  if (!(trim >= 0.0 && trim < 0.5)) {
    throw ArgumentError("trim fraction must lie in [0, 0.5), got " +
                        std::to_string(trim));
  }
}

std::size_t TrimSpec::per_tail(std::size_t n) const noexcept {
  return static_cast<std::size_t>(std::floor(trim_ * static_cast<double>(n)));
}

double trimmed_mean(std::span<const double> values, TrimSpec spec) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t cut = spec.per_tail(sorted.size());
  if (sorted.size() <= 2 * cut) {
    throw InsufficientDataError(sorted.size(),
                                "no values left after trimming");
  }
  double sum = 0.0;
  for (std::size_t k = cut; k < sorted.size() - cut; ++k) sum += sorted[k];
  return sum / static_cast<double>(sorted.size() - 2 * cut);
}

double scalar_lsq(std::span<const LsqPair> pairs) {
  double ab = 0.0;
  double aa = 0.0;
  for (const auto& p : pairs) {
    ab += p.a * p.b;
    aa += p.a * p.a;
  }
  if (!(aa > 0.0)) {
    throw DegenerateSystemError("least-squares system has sum(a^2) = 0");
  }
  return ab / aa;
}

double lsq_objective(std::span<const LsqPair> pairs, double x) {
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double r = p.a * x - p.b;
    sum += r * r;
  }
  return sum;
}

std::vector<std::optional<double>> central_diff(
    std::span<const std::optional<double>> samples, double spacing) {
  if (!(spacing > 0.0)) throw ArgumentError("spacing must be positive");
  const std::size_t n = samples.size();
  std::vector<std::optional<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!samples[k]) continue;
    const bool prev = k > 0 && samples[k - 1].has_value();
    const bool next = k + 1 < n && samples[k + 1].has_value();
    if (prev && next) {
      out[k] = (*samples[k + 1] - *samples[k - 1]) / (2.0 * spacing);
    } else if (next) {
      out[k] = (*samples[k + 1] - *samples[k]) / spacing;
    } else if (prev) {
      out[k] = (*samples[k] - *samples[k - 1]) / spacing;
    }
  }
  return out;
}

}  // namespace flowpersp
