#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "texmap/atlas.hpp"
#include "texmap/camera.hpp"
#include "texmap/image.hpp"
#include "texmap/mesh.hpp"

namespace texmap {

struct Render {
  RgbImage image;  // background black
  Mask coverage;   // 1 where the model covers the pixel center
};

// Z-buffered render of the textured model, atlas sampled bilinearly.
Render render_virtual(const TexturedModel& model, const PinholeCamera& camera);

inline constexpr double kPsnrCap = 99.0;

// 10 log10(255^2 / MSE) over masked RGB values, capped. Throws InputError on
// an empty mask or mismatched sizes.
double psnr(const RgbImage& a, const RgbImage& b, const Mask& mask);

struct MsSsim {
  double value = 0.0;
  int scales = 0;  // fewer than 5 when the masked region is small
};

// Masked multi-scale SSIM on luma. Computed over the mask's bounding box with
// unmasked pixels zeroed in both inputs; statistics are averaged over window
// centers inside the mask. Throws InputError when no 11x11 window fits.
MsSsim ms_ssim(const RgbImage& a, const RgbImage& b, const Mask& mask);

struct ViewMetrics {
  int view_id = 0;
  bool evaluated = false;  // false when coverage is empty or too small
  std::size_t covered_pixels = 0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
  int ms_ssim_scales = 0;
  double psnr_unmasked = 0.0;
  double ms_ssim_unmasked = 0.0;
};

struct EvalReport {
  std::vector<ViewMetrics> views;  // input order
  std::size_t evaluated_views = 0;
  double mean_psnr = 0.0;
  double mean_ms_ssim = 0.0;
  double mean_psnr_unmasked = 0.0;
  double mean_ms_ssim_unmasked = 0.0;

  nlohmann::json to_json() const;
};

// Renders every view and scores it against its photo; means over evaluated
// views. Throws InputError when no view is evaluated.
EvalReport evaluate_dataset(const TexturedModel& model, std::span<const ViewImage> views,
                            int workers = 1);

// Mean absolute per-channel color step across shared edges: both faces' atlas
// lookups compared at 1/4, 1/2 and 3/4 along every adjacency edge.
double seam_score(const TexturedModel& model, const AdjacencyGraph& graph);

}  // namespace texmap
