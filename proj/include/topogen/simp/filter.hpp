#pragma once

#include <cmath>
#include <vector>

#include "topogen/simp/types.hpp"

namespace topogen::simp {

// Mesh-independency sensitivity filter:
//   filtered_e = sum_f H_ef x_f (dc/dx_f) / (x_e sum_f H_ef),
//   H_ef = max(0, r_min - dist(e, f)) over element-center distances.
// For r_min <= 1 only the self weight is nonzero and the filter is the
// identity; that case returns the input bit-exactly.
inline Grid filter_sensitivities(const Grid& sens, const DensityField& density, double r_min) {
  if (!(r_min > 0.0)) throw ParameterError("filter_sensitivities: r_min must be > 0");
  if (!sens.same_shape(density)) throw DataError("filter_sensitivities: shape mismatch");
  if (r_min <= 1.0) return sens;

  const int rows = sens.rows(), cols = sens.cols();
  const int reach = static_cast<int>(std::floor(r_min));
  struct Offset {
    int dr, dc;
    double w;
  };
  std::vector<Offset> offsets;
  for (int dr = -reach; dr <= reach; ++dr) {
    for (int dc = -reach; dc <= reach; ++dc) {
      const double w = r_min - std::sqrt(double(dr) * dr + double(dc) * dc);
      if (w > 0.0) offsets.push_back({dr, dc, w});
    }
  }

  Grid out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (const auto& o : offsets) {
        const int rr = r + o.dr, cc = c + o.dc;
        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
        acc += o.w * density.at(rr, cc) * sens.at(rr, cc);
        wsum += o.w;
      }
      out.at(r, c) = acc / (density.at(r, c) * wsum);
    }
  }
  return out;
}

}  // namespace topogen::simp
