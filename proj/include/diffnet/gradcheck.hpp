#pragma once

#include <functional>
#include <string>
#include <vector>

#include "diffnet/params.hpp"
#include "diffnet/rng.hpp"

namespace diffnet {

struct AuditEntry {
  std::string array;
  std::size_t offset = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct AuditReport {
  double max_rel_error = 0.0;
  std::size_t samples = 0;
  AuditEntry worst;
  std::vector<std::pair<std::string, double>> per_array_max;  // declared order

  bool passes(double tol) const { return max_rel_error < tol; }
};

// Central finite differences against analytic gradients for randomly sampled
// scalar parameters. `loss` must be a deterministic function of the params;
// `analytic` is a full gradient bundle computed once at the base point.
inline AuditReport finite_difference_audit(
    const std::function<double(const ParameterSet&)>& loss, const ParameterSet& params,
    const GradientBundle& analytic, std::size_t sample_count, double eps = 1e-4,
    std::uint64_t seed = 0) {
  AuditReport report;
  const std::size_t total = params.scalar_count();
  if (total == 0) return report;

  std::vector<double> per_array(params.count(), 0.0);
  Rng rng(mix_seed(seed, 0xa0d17));
  ParameterSet work = params;  // mutated one scalar at a time, then restored

  for (std::size_t s = 0; s < sample_count; ++s) {
    std::size_t flat = rng.uniform(total);
    std::size_t array_idx = 0;
    while (flat >= work.tensor(array_idx).numel()) {
      flat -= work.tensor(array_idx).numel();
      ++array_idx;
    }
    Tensor& t = work.tensor(array_idx);
    const double original = t[flat];

    t[flat] = original + eps;
    const double up = loss(work);
    t[flat] = original - eps;
    const double down = loss(work);
    t[flat] = original;

    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.tensor(array_idx)[flat];
    const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-8);

    per_array[array_idx] = std::max(per_array[array_idx], rel);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {work.name(array_idx), flat, a, numeric, rel};
    }
    ++report.samples;
  }
  for (std::size_t i = 0; i < params.count(); ++i)
    report.per_array_max.emplace_back(params.name(i), per_array[i]);
  return report;
}

}  // namespace diffnet
