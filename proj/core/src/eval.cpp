#include "texmap/eval.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"
#include "texmap/visibility.hpp"

namespace texmap {

Render render_virtual(const TexturedModel& model, const PinholeCamera& camera) {
  const Mesh& mesh = model.mesh;
  const int w = camera.width;
  const int h = camera.height;
  Render out{RgbImage(w, h, Rgb8{0, 0, 0}), Mask(w, h, 0)};
  const DepthBuffer depth = rasterize_depth(mesh, camera);
  const ProjectedVertices projected = project_vertices(mesh, camera);

  std::vector<std::optional<ScreenTriangle>> tris(mesh.face_count());
  std::vector<bool> built(mesh.face_count(), false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t f = depth.face_at(x, y);
      if (f == kNoFace) continue;
      const auto face = static_cast<FaceIndex>(f);
      if (!built[face]) {
        tris[face] = ScreenTriangle::make(mesh, face, projected, w, h);
        built[face] = true;
      }
      std::array<double, 3> weights{};
      if (!tris[face] || !tris[face]->covers(x, y, weights)) continue;
      out.image(x, y) = to_rgb8(sample_atlas(model.atlas, face, tris[face]->perspective_weights(weights)));
      out.coverage(x, y) = 1;
    }
  }
  return out;
}

double psnr(const RgbImage& a, const RgbImage& b, const Mask& mask) {
  if (a.width() != b.width() || a.height() != b.height() || a.width() != mask.width() ||
      a.height() != mask.height()) {
    throw InputError("psnr: image sizes differ");
  }
  double sum = 0.0;
  std::size_t n = 0;
  const auto pa = a.data();
  const auto pb = b.data();
  const auto pm = mask.data();
  for (std::size_t i = 0; i < pm.size(); ++i) {
    if (!pm[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = double(pa[i][c]) - double(pb[i][c]);
      sum += d * d;
    }
    ++n;
  }
  if (n == 0) throw InputError("psnr: empty mask");
  const double mse = sum / (3.0 * static_cast<double>(n));
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr std::array<double, 5> kScaleWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& x : k) x /= sum;
  return k;
}

// Separable valid convolution: output (w - 10) x (h - 10).
Plane filter_valid(const Plane& in) {
  static const auto k = gaussian_kernel();
  const int ow = in.w - kWindow + 1;
  const int oh = in.h - kWindow + 1;
  Plane tmp{ow, in.h, std::vector<double>(static_cast<std::size_t>(ow) * in.h)};
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * in.at(x + i, y);
      tmp.v[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  Plane out{ow, oh, std::vector<double>(static_cast<std::size_t>(ow) * oh)};
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * tmp.at(x, y + i);
      out.v[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p{a.w, a.h, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
  return p;
}

Plane downsample(const Plane& in) {
  Plane out{in.w / 2, in.h / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                  in.at(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

// A coarse pixel is valid only when all four children are.
Plane downsample_mask(const Plane& in) {
  Plane out{in.w / 2, in.h / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      const bool all = in.at(2 * x, 2 * y) > 0 && in.at(2 * x + 1, 2 * y) > 0 &&
                       in.at(2 * x, 2 * y + 1) > 0 && in.at(2 * x + 1, 2 * y + 1) > 0;
      out.v[static_cast<std::size_t>(y) * out.w + x] = all ? 1.0 : 0.0;
    }
  }
  return out;
}

struct ScaleStats {
  double ssim = 0.0;
  double cs = 0.0;
  bool valid = false;
};

ScaleStats scale_stats(const Plane& x, const Plane& y, const Plane& mask) {
  ScaleStats st;
  if (x.w < kWindow || x.h < kWindow) return st;
  const Plane mu1 = filter_valid(x);
  const Plane mu2 = filter_valid(y);
  const Plane xx = filter_valid(product(x, x));
  const Plane yy = filter_valid(product(y, y));
  const Plane xy = filter_valid(product(x, y));
  const int r = kWindow / 2;
  double sum_ssim = 0.0, sum_cs = 0.0;
  std::size_t n = 0;
  for (int j = 0; j < mu1.h; ++j) {
    for (int i = 0; i < mu1.w; ++i) {
      if (!(mask.at(i + r, j + r) > 0)) continue;
      const std::size_t k = static_cast<std::size_t>(j) * mu1.w + i;
      const double m1 = mu1.v[k], m2 = mu2.v[k];
      const double s1 = xx.v[k] - m1 * m1;
      const double s2 = yy.v[k] - m2 * m2;
      const double s12 = xy.v[k] - m1 * m2;
      const double l = (2.0 * (m1 * m2) + kC1) / (m1 * m1 + m2 * m2 + kC1);
      const double cs = (2.0 * s12 + kC2) / (s1 + s2 + kC2);
      sum_ssim += l * cs;
      sum_cs += cs;
      ++n;
    }
  }
  if (n == 0) return st;
  st.ssim = std::clamp(sum_ssim / static_cast<double>(n), 0.0, 1.0);
  st.cs = std::clamp(sum_cs / static_cast<double>(n), 0.0, 1.0);
  st.valid = true;
  return st;
}

}  // namespace

MsSsim ms_ssim(const RgbImage& a, const RgbImage& b, const Mask& mask) {
  if (a.width() != b.width() || a.height() != b.height() || a.width() != mask.width() ||
      a.height() != mask.height()) {
    throw InputError("ms_ssim: image sizes differ");
  }
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw InputError("ms_ssim: empty mask");
  const int w = x1 - x0 + 1;
  const int h = y1 - y0 + 1;
  const auto luma = [](const Rgb8& p) { return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]; };
  Plane pa{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
  Plane pb = pa;
  Plane pm = pa;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x0 + x, y0 + y)) continue;
      const std::size_t k = static_cast<std::size_t>(y) * w + x;
      pa.v[k] = luma(a(x0 + x, y0 + y));
      pb.v[k] = luma(b(x0 + x, y0 + y));
      pm.v[k] = 1.0;
    }
  }

  std::vector<ScaleStats> stats;
  for (std::size_t s = 0; s < kScaleWeights.size(); ++s) {
    if (s > 0) {
      pa = downsample(pa);
      pb = downsample(pb);
      pm = downsample_mask(pm);
    }
    const ScaleStats st = scale_stats(pa, pb, pm);
    if (!st.valid) break;
    stats.push_back(st);
  }
  if (stats.empty()) throw InputError("ms_ssim: masked region smaller than the 11x11 window");

  const std::size_t m = stats.size();
  double wsum = 0.0;
  for (std::size_t s = 0; s < m; ++s) wsum += kScaleWeights[s];
  double value = 1.0;
  for (std::size_t s = 0; s < m; ++s) {
    const double base = s + 1 == m ? stats[s].ssim : stats[s].cs;
    value *= std::pow(base, kScaleWeights[s] / wsum);
  }
  return {std::clamp(value, 0.0, 1.0), static_cast<int>(m)};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_view = nlohmann::json::array();
  for (const ViewMetrics& v : views) {
    nlohmann::json j{{"id", v.view_id},
                     {"evaluated", v.evaluated},
                     {"covered_pixels", v.covered_pixels}};
    if (v.evaluated) {
      j["psnr"] = v.psnr;
      j["ms_ssim"] = v.ms_ssim;
      j["ms_ssim_scales"] = v.ms_ssim_scales;
      j["psnr_unmasked"] = v.psnr_unmasked;
      j["ms_ssim_unmasked"] = v.ms_ssim_unmasked;
    }
    per_view.push_back(std::move(j));
  }
  return {{"views", per_view},
          {"evaluated_views", evaluated_views},
          {"mean_psnr", mean_psnr},
          {"mean_ms_ssim", mean_ms_ssim},
          {"mean_psnr_unmasked", mean_psnr_unmasked},
          {"mean_ms_ssim_unmasked", mean_ms_ssim_unmasked}};
}

EvalReport evaluate_dataset(const TexturedModel& model, std::span<const ViewImage> views,
                            int workers) {
  if (views.empty()) throw InputError("evaluation needs at least one view");
  EvalReport report;
  report.views.resize(views.size());
  parallel_for(views.size(), workers, [&](std::size_t i) {
    const ViewImage& view = views[i];
    ViewMetrics& m = report.views[i];
    m.view_id = view.id;
    const Render r = render_virtual(model, view.camera);
    const auto cov = r.coverage.data();
    m.covered_pixels = static_cast<std::size_t>(std::count(cov.begin(), cov.end(), 1));
    if (m.covered_pixels == 0) return;
    try {
      const MsSsim s = ms_ssim(r.image, view.pixels, r.coverage);
      m.ms_ssim = s.value;
      m.ms_ssim_scales = s.scales;
    } catch (const InputError&) {
      return;  // coverage too small for one window
    }
    m.psnr = psnr(r.image, view.pixels, r.coverage);
    const Mask full(view.pixels.width(), view.pixels.height(), 1);
    m.psnr_unmasked = psnr(r.image, view.pixels, full);
    m.ms_ssim_unmasked = ms_ssim(r.image, view.pixels, full).value;
    m.evaluated = true;
  });
  for (const ViewMetrics& m : report.views) {
    if (!m.evaluated) continue;
    ++report.evaluated_views;
    report.mean_psnr += m.psnr;
    report.mean_ms_ssim += m.ms_ssim;
    report.mean_psnr_unmasked += m.psnr_unmasked;
    report.mean_ms_ssim_unmasked += m.ms_ssim_unmasked;
  }
  if (report.evaluated_views == 0) throw InputError("no view covers the model");
  const double n = static_cast<double>(report.evaluated_views);
  report.mean_psnr /= n;
  report.mean_ms_ssim /= n;
  report.mean_psnr_unmasked /= n;
  report.mean_ms_ssim_unmasked /= n;
  return report;
}

double seam_score(const TexturedModel& model, const AdjacencyGraph& graph) {
  const Mesh& mesh = model.mesh;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [f, g] : graph.edges) {
    // Shared vertex pair as corner indices in each face.
    std::array<int, 2> cf{}, cg{};
    int found = 0;
    for (int i = 0; i < 3 && found < 2; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (mesh.faces[f][i] == mesh.faces[g][j]) {
          cf[found] = i;
          cg[found] = j;
          ++found;
          break;
        }
      }
    }
    if (found != 2) continue;
    for (const double t : {0.25, 0.5, 0.75}) {
      std::array<double, 3> wf{}, wg{};
      wf[cf[0]] = 1.0 - t;
      wf[cf[1]] = t;
      wg[cg[0]] = 1.0 - t;
      wg[cg[1]] = t;
      const Eigen::Vector3d d = sample_atlas(model.atlas, f, wf) - sample_atlas(model.atlas, g, wg);
      sum += d.cwiseAbs().sum() / 3.0;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace texmap
