#pragma once

#include <chrono>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "topogen/core/resample.hpp"
#include "topogen/data/params.hpp"
#include "topogen/models/regressor.hpp"
#include "topogen/post/postproc.hpp"
#include "topogen/simp/optimize.hpp"

namespace topogen::pipeline {

// Intersection-over-union of material pixels on two-valued images; two
// empty images count as fully matching.
inline double iou(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw DataError("iou: shape mismatch");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double va = a[i], vb = b[i];
    if ((va != 0.0 && va != 1.0) || (vb != 0.0 && vb != 1.0))
      throw DataError("iou: inputs must be two-valued");
    const bool ma = va == 1.0, mb = vb == 1.0;
    inter += (ma && mb) ? 1 : 0;
    uni += (ma || mb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct ValidationReport {
  models::RegressorPrediction predicted;  // raw regressor output
  data::DesignParams rerun_params;        // clamped into the training bounds
  bool simp_failed = false;
  double iou_value = 0.0;
  double pixel_mae = 0.0;
  double rerun_compliance = 0.0;
  int rerun_iterations = 0;
  bool rerun_converged = false;
  double seconds_predict = 0.0;
  double seconds_simp = 0.0;
  double seconds_compare = 0.0;

  // deterministic content (timings excluded), used for report hashing
  nlohmann::json to_json(bool include_timings = true) const {
    nlohmann::json j;
    j["predicted"] = {{"vol_frac", predicted.vol_frac},
                      {"penal", predicted.penal},
                      {"r_min", predicted.r_min}};
    j["rerun_params"] = rerun_params;
    j["simp_failed"] = simp_failed;
    if (!simp_failed) {
      j["iou"] = iou_value;
      j["pixel_mae"] = pixel_mae;
      j["rerun_compliance"] = rerun_compliance;
      j["rerun_iterations"] = rerun_iterations;
      j["rerun_converged"] = rerun_converged;
    }
    if (include_timings) {
      j["timings"] = {{"predict_s", seconds_predict},
                      {"simp_s", seconds_simp},
                      {"compare_s", seconds_compare}};
    }
    return j;
  }
};

struct ValidateOptions {
  simp::Mesh mesh{60, 60};
  data::ParamBounds bounds;          // clamping box for the rerun
  simp::SimpSettings base_settings;  // vol_frac/penal/r_min overridden per prediction
  double compare_threshold = 0.5;
};

// Closes the loop: predict parameters from the image, rerun the optimizer
// with them (clamped into the training bounds), and score the agreement of
// the two thresholded structures at the input image's resolution. The rerun
// density is exposed through `rerun_out` for report imagery.
inline ValidationReport validate_sample(const Grid& image, models::RegressorModel<float>& model,
                                        const ValidateOptions& opt = {},
                                        Grid* rerun_out = nullptr) {
  using clock = std::chrono::steady_clock;
  ValidationReport rep;

  const auto t0 = clock::now();
  const Grid model_input = resample_area(image, model.input_side, model.input_side);
  rep.predicted = model.predict(model_input);
  rep.rerun_params = opt.bounds.clamp(
      {rep.predicted.vol_frac, rep.predicted.penal, rep.predicted.r_min});
  const auto t1 = clock::now();
  rep.seconds_predict = std::chrono::duration<double>(t1 - t0).count();

  simp::SimpSettings settings = opt.base_settings;
  settings.vol_frac = rep.rerun_params.vol_frac;
  settings.penal = rep.rerun_params.penal;
  settings.r_min = rep.rerun_params.r_min;
  simp::OptimizationResult rerun;
  try {
    rerun = simp::optimize(settings, opt.mesh, simp::cantilever_mid_load(opt.mesh));
  } catch (const Error&) {
    rep.simp_failed = true;
    rep.seconds_simp = std::chrono::duration<double>(clock::now() - t1).count();
    return rep;
  }
  const auto t2 = clock::now();
  rep.seconds_simp = std::chrono::duration<double>(t2 - t1).count();

  const Grid rerun_at_input = resample_area(rerun.density, image.rows(), image.cols());
  rep.iou_value = iou(post::threshold(image, opt.compare_threshold),
                      post::threshold(rerun_at_input, opt.compare_threshold));
  rep.pixel_mae = mean_abs_diff(image, rerun_at_input);
  rep.rerun_compliance = rerun.compliance_history.back();
  rep.rerun_iterations = rerun.iterations;
  rep.rerun_converged = rerun.converged;
  rep.seconds_compare = std::chrono::duration<double>(clock::now() - t2).count();
  if (rerun_out) *rerun_out = std::move(rerun.density);
  return rep;
}

// ---- report imagery: [generated | predicted params | rerun] ----

namespace detail {

// 3x5 digit glyphs for the params panel of the triptych
inline const char* glyph(char c) {
  switch (c) {
    case '0': return "111101101101111";
    case '1': return "010110010010111";
    case '2': return "111001111100111";
    case '3': return "111001111001111";
    case '4': return "101101111001001";
    case '5': return "111100111001111";
    case '6': return "111100111101111";
    case '7': return "111001001001001";
    case '8': return "111101111101111";
    case '9': return "111101111001111";
    case '.': return "000000000000010";
    case '-': return "000000111000000";
    default: return "000000000000000";
  }
}

inline void stamp_text(Grid& panel, int row, int col, const std::string& text) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char* g = glyph(text[k]);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 3; ++c) {
        const int rr = row + r, cc = col + static_cast<int>(k) * 4 + c;
        if (rr >= 0 && rr < panel.rows() && cc >= 0 && cc < panel.cols() &&
            g[r * 3 + c] == '1')
          panel.at(rr, cc) = 1.0;  // renders dark in PGM previews
      }
    }
  }
}

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

// Side-by-side panel image: generated structure, the predicted triple
// rendered as digits, and the optimizer's rerun.
inline Grid triptych(const Grid& generated, const data::DesignParams& params, const Grid& rerun) {
  const int rows = std::max(generated.rows(), std::max(rerun.rows(), 24));
  const int text_cols = 4 * 5 + 8;  // five glyphs per value plus margins
  Grid left = resample_area(generated, rows, generated.cols() * rows / generated.rows());
  Grid right = resample_area(rerun, rows, rerun.cols() * rows / rerun.rows());

  Grid panel(rows, text_cols, 0.0);
  const int base = rows / 2 - 10;
  detail::stamp_text(panel, base, 4, detail::fixed3(params.vol_frac));
  detail::stamp_text(panel, base + 7, 4, detail::fixed3(params.penal));
  detail::stamp_text(panel, base + 14, 4, detail::fixed3(params.r_min));

  Grid out(rows, left.cols() + text_cols + right.cols() + 2, 0.5);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < left.cols(); ++c) out.at(r, c) = left.at(r, c);
    for (int c = 0; c < text_cols; ++c) out.at(r, left.cols() + 1 + c) = panel.at(r, c);
    for (int c = 0; c < right.cols(); ++c)
      out.at(r, left.cols() + text_cols + 2 + c) = right.at(r, c);
  }
  return out;
}

}  // namespace topogen::pipeline
