#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cadence/errors.hpp"
#include "cadence/params.hpp"
#include "cadence/tensor.hpp"

namespace cadence {

struct GradCheckEntry {
  std::string name;
  double max_rel_error{0.0};
  bool ok{true};
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool ok{true};
  double worst{0.0};

  const GradCheckEntry& worst_entry() const {
    std::size_t w = 0;
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].max_rel_error > entries[w].max_rel_error) w = i;
    }
    return entries[w];
  }
};

// Central finite differences against the tape gradients, double precision
// only. `forward` must rebuild its graph from the registry's current values
// and return a scalar loss; it is called twice up front and must reproduce
// the value bitwise, otherwise the comparison is meaningless and CheckInvalid
// is thrown.
//
// Relative error per entry: |analytic - numeric| / max(|analytic|, |numeric|, 1).
inline GradCheckReport grad_check(
    const std::function<Tensor<double>()>& forward,
    ParamRegistry<double>& params, double eps = 1e-5, double tol = 1e-4) {
  if (eps <= 0 || tol <= 0) throw ConfigError("grad_check: eps and tol must be positive");

  {
    NoGradGuard ng;
    const double f1 = forward().item();
    const double f2 = forward().item();
    if (!(f1 == f2)) {
      throw CheckInvalid("grad_check: forward pass is not deterministic");
    }
  }

  params.zero_grad();
  Tensor<double> loss = forward();
  backward(loss);

  GradCheckReport report;
  for (auto& p : params.all()) {
    GradCheckEntry entry;
    entry.name = p.name;
    auto& t = p.tensor;
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.data()[i];
      double fplus, fminus;
      {
        NoGradGuard ng;
        t.data()[i] = saved + eps;
        fplus = forward().item();
        t.data()[i] = saved - eps;
        fminus = forward().item();
      }
      t.data()[i] = saved;
      const double numeric = (fplus - fminus) / (2.0 * eps);
      const double analytic = t.grad()[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1.0});
      const double rel = std::abs(analytic - numeric) / denom;
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    entry.ok = entry.max_rel_error <= tol;
    report.ok = report.ok && entry.ok;
    report.worst = std::max(report.worst, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  params.zero_grad();
  return report;
}

}  // namespace cadence
