#pragma once

#include <cmath>

#include "topogen/simp/types.hpp"

namespace topogen::simp {

namespace detail {

// Candidate update for a given Lagrange multiplier: damped OC step clamped
// to the move window intersected with [x_min, 1].
inline Grid oc_candidate(const DensityField& x, const Grid& sens, double lambda, double x_min,
                         double move) {
  Grid out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double be = -sens[i] / lambda;
    const double step = x[i] * std::sqrt(be);  // damping eta = 0.5
    const double lo = std::max(x_min, x[i] - move);
    const double hi = std::min(1.0, x[i] + move);
    out[i] = std::min(hi, std::max(lo, step));
  }
  return out;
}

}  // namespace detail

// Optimality-criteria density update. lambda is found by bisection so the
// mean of the update hits vol_frac within 1e-4; the bracket is additionally
// narrowed until (hi - lo) / (hi + lo) < 1e-3.
inline DensityField oc_update(const DensityField& density, const Grid& filtered_sens,
                              const SimpSettings& settings) {
  settings.validate();
  if (!filtered_sens.same_shape(density)) throw DataError("oc_update: shape mismatch");
  for (std::size_t i = 0; i < filtered_sens.size(); ++i) {
    if (!(filtered_sens[i] <= 0.0))
      throw DataError("oc_update: sensitivities must be non-positive");
  }

  constexpr double kMove = 0.2;
  constexpr double kVolTol = 1e-4;
  constexpr double kBracketTol = 1e-3;
  const double f = settings.vol_frac;

  // feasibility within the move window
  double lower_mean = 0.0, upper_mean = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    lower_mean += std::max(settings.x_min, density[i] - kMove);
    upper_mean += std::min(1.0, density[i] + kMove);
  }
  lower_mean /= static_cast<double>(density.size());
  upper_mean /= static_cast<double>(density.size());
  if (f < lower_mean - kVolTol || f > upper_mean + kVolTol)
    throw OptimizationError("oc_update: volume target unreachable within move limits");

  double lo = 0.0, hi = 1e5;
  // ensure the upper end truly drives the volume to or below target
  for (int grow = 0; grow < 100; ++grow) {
    Grid cand = detail::oc_candidate(density, filtered_sens, hi, settings.x_min, kMove);
    if (cand.mean() <= f + kVolTol) break;
    hi *= 10.0;
    if (grow == 99) throw OptimizationError("oc_update: cannot bracket volume constraint");
  }

  Grid best;
  for (int iter = 0; iter < 500; ++iter) {
    const double mid = 0.5 * (lo + hi);
    best = detail::oc_candidate(density, filtered_sens, mid, settings.x_min, kMove);
    const double mean = best.mean();
    const bool volume_ok = std::abs(mean - f) <= kVolTol;
    const bool bracket_ok = (hi - lo) / (hi + lo) < kBracketTol || (hi - lo) < 1e-12;
    if (volume_ok && bracket_ok) return best;
    if (mean > f) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw OptimizationError("oc_update: volume bisection did not converge");
}

}  // namespace topogen::simp
