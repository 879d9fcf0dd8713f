#include "texmap/blend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"

namespace texmap {

namespace {

std::size_t find_view(std::span<const ViewImage> views, int view_id) {
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].id == view_id) return i;
  }
  throw InvariantError("candidate references unknown view " + std::to_string(view_id));
}

constexpr double kFar = 1e20;

// Lower envelope of parabolas over f, written to d (both length n).
void distance_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  const auto intersect = [f](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<Mask> build_masks(const CandidateSet& candidates, std::span<const ViewImage> views,
                              std::span<const ViewVisibility> visibility) {
  std::vector<Mask> masks;
  masks.reserve(views.size());
  for (const ViewImage& v : views) masks.emplace_back(v.camera.width, v.camera.height, 0);
  for (std::size_t f = 0; f < candidates.faces.size(); ++f) {
    for (const Label& l : candidates.faces[f]) {
      const std::size_t vi = find_view(views, l.view_id);
      const FaceVisibility* vis = visibility[vi].find(static_cast<FaceIndex>(f));
      if (!vis) continue;
      for (const PixelCoord& p : vis->visible_pixels) masks[vi](p.x, p.y) = 1;
    }
  }
  return masks;
}

Raster<std::int64_t> squared_distance_transform(const Mask& mask) {
  const int w = mask.width() + 2;
  const int h = mask.height() + 2;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = kFar;
    }
  }
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(std::max(w, h));
  std::vector<double> d(std::max(w, h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    distance_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * w;
    std::copy(row, row + w, f.begin());
    distance_1d(f.data(), row, w, v, z);
  }
  Raster<std::int64_t> out(mask.width(), mask.height(), 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      out(x, y) = std::llround(grid[static_cast<std::size_t>(y + 1) * w + (x + 1)]);
    }
  }
  return out;
}

Raster<float> distance_transform(const Mask& mask) {
  const Raster<std::int64_t> sq = squared_distance_transform(mask);
  Raster<float> out(mask.width(), mask.height(), 0.0f);
  auto src = sq.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(std::sqrt(static_cast<double>(src[i])));
  }
  return out;
}

int texel_resolution(double best_area) {
  const double r = std::ceil(std::sqrt(2.0 * std::max(0.0, best_area)));
  return static_cast<int>(std::clamp(r, 4.0, 256.0));
}

std::array<double, 3> FacePatch::weights(int a, int b) const {
  const double step = 1.0 / (resolution - 1);
  std::array<double, 3> w{};
  w[static_cast<std::size_t>(origin)] = 1.0 - (a + b) * step;
  w[static_cast<std::size_t>((origin + 1) % 3)] = a * step;
  w[static_cast<std::size_t>((origin + 2) % 3)] = b * step;
  return w;
}

int patch_origin(const Mesh& mesh, FaceIndex face) {
  int best = 0;
  double best_cos = 2.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d e1 = mesh.corner(face, (k + 1) % 3) - mesh.corner(face, k);
    const Eigen::Vector3d e2 = mesh.corner(face, (k + 2) % 3) - mesh.corner(face, k);
    const double c = e1.dot(e2) / (e1.norm() * e2.norm());
    if (c < best_cos - 1e-12) {
      best_cos = c;
      best = k;
    }
  }
  return best;
}

FacePatch blend_face(const Mesh& mesh, FaceIndex face, std::span<const Label> candidates,
                     std::span<const ViewImage> views, std::span<const Raster<float>> dists,
                     int resolution) {
  if (candidates.empty()) throw InvariantError("blend_face needs at least one candidate");
  if (resolution < 2) throw InvariantError("blend_face needs resolution >= 2");
  const int R = resolution;
  FacePatch patch;
  patch.face = face;
  patch.resolution = R;
  patch.texels.assign(static_cast<std::size_t>(R) * R, Rgb8{0, 0, 0});
  patch.state.assign(patch.texels.size(), TexelState::kEmpty);

  std::vector<std::size_t> view_index;
  view_index.reserve(candidates.size());
  for (const Label& l : candidates) view_index.push_back(find_view(views, l.view_id));

  patch.origin = patch_origin(mesh, face);

  std::vector<double> weight(candidates.size());
  std::vector<Eigen::Vector3d> color(candidates.size());
  std::vector<bool> in_bounds(candidates.size());
  std::vector<std::size_t> missing;

  for (int b = 0; b < R; ++b) {
    for (int a = 0; a + b <= R && a < R; ++a) {
      const std::array<double, 3> w = patch.weights(a, b);
      const Eigen::Vector3d point =
          w[0] * mesh.corner(face, 0) + w[1] * mesh.corner(face, 1) + w[2] * mesh.corner(face, 2);
      double total = 0.0;
      std::size_t usable = 0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        const ViewImage& view = views[view_index[c]];
        const auto proj = view.camera.project(point);
        in_bounds[c] = proj && view.camera.in_image(proj->u, proj->v);
        weight[c] = 0.0;
        if (!in_bounds[c]) continue;
        ++usable;
        color[c] = sample_bilinear(view.pixels, proj->u, proj->v, dists[view_index[c]]);
        weight[c] = std::max(0.0, sample_bilinear(dists[view_index[c]], proj->u, proj->v));
        total += weight[c];
      }
      const std::size_t t = patch.index(a, b);
      if (usable == 0) {
        missing.push_back(t);
        continue;
      }
      if (!(total > 0.0)) {
        for (std::size_t c = 0; c < candidates.size(); ++c) weight[c] = in_bounds[c] ? 1.0 : 0.0;
        total = static_cast<double>(usable);
      }
      Eigen::Vector3d blended = Eigen::Vector3d::Zero();
      double norm_sum = 0.0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (weight[c] == 0.0) continue;
        const double wn = weight[c] / total;
        blended += wn * color[c];
        norm_sum += wn;
      }
      patch.texels[t] = to_rgb8(blended);
      const bool inside = a + b <= R - 1;
      patch.state[t] = inside ? TexelState::kBlended : TexelState::kExtrapolated;
      if (inside) patch.max_weight_error = std::max(patch.max_weight_error, std::abs(norm_sum - 1.0));
    }
  }

  if (!missing.empty()) {
    // Breadth-first fill from blended texels, 4-neighborhood, fixed visiting order.
    std::deque<std::size_t> queue;
    for (std::size_t t = 0; t < patch.state.size(); ++t) {
      if (patch.state[t] == TexelState::kBlended || patch.state[t] == TexelState::kExtrapolated) {
        queue.push_back(t);
      }
    }
    std::vector<bool> wanted(patch.state.size(), false);
    for (std::size_t t : missing) wanted[t] = true;
    while (!queue.empty()) {
      const std::size_t t = queue.front();
      queue.pop_front();
      const int a = static_cast<int>(t % R);
      const int b = static_cast<int>(t / R);
      const int na[4] = {a - 1, a + 1, a, a};
      const int nb[4] = {b, b, b - 1, b + 1};
      for (int k = 0; k < 4; ++k) {
        if (na[k] < 0 || nb[k] < 0 || na[k] >= R || nb[k] >= R) continue;
        const std::size_t u = patch.index(na[k], nb[k]);
        if (!wanted[u]) continue;
        wanted[u] = false;
        patch.texels[u] = patch.texels[t];
        patch.state[u] = TexelState::kFilled;
        queue.push_back(u);
      }
    }
    for (std::size_t t : missing) {
      if (wanted[t]) {
        patch.texels[t] = Rgb8{128, 128, 128};
        patch.state[t] = TexelState::kFilled;
      }
    }
    patch.filled_texels = missing.size();
  }
  return patch;
}

std::vector<FacePatch> blend_faces(const Mesh& mesh, const CandidateSet& candidates,
                                   const QualityTable& quality, std::span<const ViewImage> views,
                                   std::span<const Raster<float>> dists, int workers) {
  std::vector<FaceIndex> faces;
  for (std::size_t f = 0; f < candidates.faces.size(); ++f) {
    if (!candidates.faces[f].empty()) faces.push_back(static_cast<FaceIndex>(f));
  }
  std::vector<FacePatch> patches(faces.size());
  parallel_for(faces.size(), workers, [&](std::size_t i) {
    const FaceIndex f = faces[i];
    double best = 0.0;
    for (const QualityEntry& e : quality.faces[f]) best = std::max(best, e.area);
    patches[i] = blend_face(mesh, f, candidates.faces[f], views, dists, texel_resolution(best));
  });
  return patches;
}

void write_distance_png(const std::filesystem::path& path, const Raster<float>& dist) {
  std::vector<double> values(dist.data().begin(), dist.data().end());
  write_png16(path, normalize_to_u16(values, dist.width(), dist.height()));
}

}  // namespace texmap
