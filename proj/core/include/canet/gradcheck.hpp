#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "canet/tape.hpp"

namespace canet {

struct GradCheckOptions {
  /// Central-difference step is step * max(1, |w|).
  double step = 1e-5;
  /// Denominator floor of the relative error: gradients smaller than this
  /// are compared in absolute terms, below the resolution of the stencil.
  double floor = 1e-4;
  /// Number of (parameter, element) pairs to probe; 0 probes every element.
  std::size_t samples = 64;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;  ///< |a - n| / max(|a|, |n|, floor)
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  /// Probes discarded because some ReLU input changed sign within w +- h.
  std::size_t kink_straddles = 0;

  double max_rel_error() const;
  const GradCheckEntry* worst() const;
};

/// Builds a scalar loss on a fresh tape. It must read `params` through
/// Tape::param so their gradients are collected.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients of `build` against central finite
/// differences (f(w+h) - f(w-h)) / 2h. Sampling picks a parameter uniformly,
/// then an element.
GradCheckReport check_gradients(const LossBuilder& build,
                                const std::vector<Parameter*>& params,
                                const GradCheckOptions& opts = {});

}  // namespace canet
