#pragma once

#include <cmath>
#include <nlohmann/json.hpp>
#include <vector>

#include "topogen/core/error.hpp"

namespace topogen::data {

// The label triple of every sample and the output of the regressor.
struct DesignParams {
  double vol_frac = 0.5;
  double penal = 3.0;
  double r_min = 1.5;

  bool operator==(const DesignParams&) const = default;
};

// Sweep bounds; the defaults are the study's parameter box.
struct ParamBounds {
  double vol_frac_lo = 0.3, vol_frac_hi = 0.8;
  double penal_lo = 2.0, penal_hi = 4.0;
  double r_min_lo = 1.5, r_min_hi = 3.0;
  int vol_frac_count = 14;
  int penal_count = 12;
  int r_min_count = 18;  // 14 * 12 * 18 = 3024

  void validate() const {
    if (vol_frac_count < 2 || penal_count < 2 || r_min_count < 2)
      throw ParameterError("ParamBounds: counts must be >= 2 per axis");
    if (!(vol_frac_lo > 0.0 && vol_frac_hi <= 1.0 && vol_frac_lo < vol_frac_hi))
      throw ParameterError("ParamBounds: bad vol_frac range");
    if (!(penal_lo >= 1.0 && penal_lo < penal_hi))
      throw ParameterError("ParamBounds: bad penal range");
    if (!(r_min_lo > 0.0 && r_min_lo < r_min_hi))
      throw ParameterError("ParamBounds: bad r_min range");
  }

  int total() const { return vol_frac_count * penal_count * r_min_count; }

  DesignParams clamp(const DesignParams& p) const {
    return {std::min(vol_frac_hi, std::max(vol_frac_lo, p.vol_frac)),
            std::min(penal_hi, std::max(penal_lo, p.penal)),
            std::min(r_min_hi, std::max(r_min_lo, p.r_min))};
  }
};

namespace detail {

inline double linspace_at(double lo, double hi, int count, int i) {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

}  // namespace detail

// Cartesian product of linearly spaced values, endpoints included,
// lexicographic with vol_frac outermost.
inline std::vector<DesignParams> parameter_grid(const ParamBounds& bounds) {
  bounds.validate();
  std::vector<DesignParams> grid;
  grid.reserve(static_cast<std::size_t>(bounds.total()));
  for (int a = 0; a < bounds.vol_frac_count; ++a) {
    const double vf = detail::linspace_at(bounds.vol_frac_lo, bounds.vol_frac_hi,
                                          bounds.vol_frac_count, a);
    for (int b = 0; b < bounds.penal_count; ++b) {
      const double p = detail::linspace_at(bounds.penal_lo, bounds.penal_hi,
                                           bounds.penal_count, b);
      for (int c = 0; c < bounds.r_min_count; ++c) {
        grid.push_back({vf, p,
                        detail::linspace_at(bounds.r_min_lo, bounds.r_min_hi,
                                            bounds.r_min_count, c)});
      }
    }
  }
  return grid;
}

inline void to_json(nlohmann::json& j, const DesignParams& p) {
  j = {{"vol_frac", p.vol_frac}, {"penal", p.penal}, {"r_min", p.r_min}};
}

inline void from_json(const nlohmann::json& j, DesignParams& p) {
  j.at("vol_frac").get_to(p.vol_frac);
  j.at("penal").get_to(p.penal);
  j.at("r_min").get_to(p.r_min);
}

inline void to_json(nlohmann::json& j, const ParamBounds& b) {
  j = {{"vol_frac", {b.vol_frac_lo, b.vol_frac_hi}},
       {"penal", {b.penal_lo, b.penal_hi}},
       {"r_min", {b.r_min_lo, b.r_min_hi}},
       {"counts", {b.vol_frac_count, b.penal_count, b.r_min_count}}};
}

inline void from_json(const nlohmann::json& j, ParamBounds& b) {
  b.vol_frac_lo = j.at("vol_frac")[0];
  b.vol_frac_hi = j.at("vol_frac")[1];
  b.penal_lo = j.at("penal")[0];
  b.penal_hi = j.at("penal")[1];
  b.r_min_lo = j.at("r_min")[0];
  b.r_min_hi = j.at("r_min")[1];
  b.vol_frac_count = j.at("counts")[0];
  b.penal_count = j.at("counts")[1];
  b.r_min_count = j.at("counts")[2];
}

}  // namespace topogen::data
