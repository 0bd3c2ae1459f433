#pragma once

#include <algorithm>
#include <cmath>

#include "topogen/core/grid.hpp"

namespace topogen {

// Area-average (box) resampling with exact fractional coverage. The target
// cells tile the source domain, so the global mean is preserved up to
// rounding for any size ratio.
inline Grid resample_area(const Grid& in, int out_rows, int out_cols) {
  if (out_rows < 1 || out_cols < 1) throw ParameterError("resample_area: bad target size");
  if (in.rows() == out_rows && in.cols() == out_cols) return in;
  Grid out(out_rows, out_cols);
  const double sr = static_cast<double>(in.rows()) / out_rows;
  const double sc = static_cast<double>(in.cols()) / out_cols;
  for (int r = 0; r < out_rows; ++r) {
    const double r0 = r * sr, r1 = (r + 1) * sr;
    const int ir0 = static_cast<int>(std::floor(r0));
    const int ir1 = std::min(in.rows() - 1, static_cast<int>(std::ceil(r1)) - 1);
    for (int c = 0; c < out_cols; ++c) {
      const double c0 = c * sc, c1 = (c + 1) * sc;
      const int ic0 = static_cast<int>(std::floor(c0));
      const int ic1 = std::min(in.cols() - 1, static_cast<int>(std::ceil(c1)) - 1);
      double acc = 0.0;
      for (int ir = ir0; ir <= ir1; ++ir) {
        const double hr = std::min<double>(ir + 1, r1) - std::max<double>(ir, r0);
        for (int ic = ic0; ic <= ic1; ++ic) {
          const double wc = std::min<double>(ic + 1, c1) - std::max<double>(ic, c0);
          acc += hr * wc * in.at(ir, ic);
        }
      }
      out.at(r, c) = acc / (sr * sc);
    }
  }
  return out;
}

}  // namespace topogen
