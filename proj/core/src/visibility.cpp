#include "texmap/visibility.hpp"

#include <algorithm>
#include <cmath>

#include "texmap/parallel.hpp"

namespace texmap {

ProjectedVertices project_vertices(const Mesh& mesh, const PinholeCamera& camera) {
  ProjectedVertices out(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) out[v] = camera.project(mesh.vertices[v]);
  return out;
}

bool is_front_facing(const Mesh& mesh, FaceIndex face, const PinholeCamera& camera) {
  return mesh.normals[face].dot(mesh.centroid(face) - camera.center()) < 0.0;
}

std::optional<ScreenTriangle> ScreenTriangle::make(const std::array<Projection, 3>& corners,
                                                   int width, int height) {
  ScreenTriangle tri;
  std::array<Eigen::Vector2d, 3> p;
  for (int k = 0; k < 3; ++k) {
    if (!(corners[k].depth > 0.0)) return std::nullopt;
    p[k] = Eigen::Vector2d(corners[k].u, corners[k].v);
    if (!p[k].allFinite()) return std::nullopt;
    tri.inv_depth_[k] = 1.0 / corners[k].depth;
  }
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector2d a = p[(k + 1) % 3];
    Eigen::Vector2d b = p[(k + 2) % 3];
    if (b.x() < a.x() || (b.x() == a.x() && b.y() < a.y())) std::swap(a, b);
    Edge& e = tri.edges_[k];
    e.origin = a;
    e.dir = b - a;
    e.sign = 1.0;
    const double at_vertex = e.eval(p[k].x(), p[k].y());
    if (at_vertex == 0.0 || !std::isfinite(at_vertex)) return std::nullopt;
    e.sign = at_vertex > 0.0 ? 1.0 : -1.0;
    // Interior-pointing gradient of the oriented edge function.
    const double gx = -e.sign * e.dir.y();
    const double gy = e.sign * e.dir.x();
    e.owns_ties = gx > 0.0 || (gx == 0.0 && gy > 0.0);
  }
  tri.area2_ = std::abs(tri.edges_[0].eval(p[0].x(), p[0].y()));

  const double min_x = std::min({p[0].x(), p[1].x(), p[2].x()});
  const double max_x = std::max({p[0].x(), p[1].x(), p[2].x()});
  const double min_y = std::min({p[0].y(), p[1].y(), p[2].y()});
  const double max_y = std::max({p[0].y(), p[1].y(), p[2].y()});
  const auto clamp_int = [](double v, int hi) {
    return static_cast<int>(std::clamp(v, -1.0, static_cast<double>(hi)));
  };
  tri.bounds_.x0 = std::max(0, clamp_int(std::ceil(min_x), width));
  tri.bounds_.x1 = std::min(width - 1, clamp_int(std::floor(max_x), width));
  tri.bounds_.y0 = std::max(0, clamp_int(std::ceil(min_y), height));
  tri.bounds_.y1 = std::min(height - 1, clamp_int(std::floor(max_y), height));
  return tri;
}

std::optional<ScreenTriangle> ScreenTriangle::make(const Mesh& mesh, FaceIndex face,
                                                   const ProjectedVertices& projected, int width,
                                                   int height) {
  std::array<Projection, 3> corners;
  for (int k = 0; k < 3; ++k) {
    const auto& pr = projected[mesh.faces[face][k]];
    if (!pr) return std::nullopt;
    corners[k] = *pr;
  }
  return make(corners, width, height);
}

bool ScreenTriangle::covers(int x, int y, std::array<double, 3>& weights) const {
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double e = edges_[k].eval(x, y);
    if (e < 0.0 || (e == 0.0 && !edges_[k].owns_ties)) return false;
    weights[k] = e;
    sum += e;
  }
  if (!(sum > 0.0)) return false;
  for (double& w : weights) w /= sum;
  return true;
}

double ScreenTriangle::depth(const std::array<double, 3>& w) const {
  return 1.0 / (w[0] * inv_depth_[0] + w[1] * inv_depth_[1] + w[2] * inv_depth_[2]);
}

std::array<double, 3> ScreenTriangle::perspective_weights(const std::array<double, 3>& w) const {
  std::array<double, 3> out;
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    out[k] = w[k] * inv_depth_[k];
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

DepthBuffer rasterize_depth(const Mesh& mesh, const PinholeCamera& camera) {
  DepthBuffer buffer(camera.width, camera.height);
  const ProjectedVertices projected = project_vertices(mesh, camera);
  std::array<double, 3> w;
  for (FaceIndex f = 0; f < mesh.face_count(); ++f) {
    if (!is_front_facing(mesh, f, camera)) continue;
    const auto tri = ScreenTriangle::make(mesh, f, projected, camera.width, camera.height);
    if (!tri) continue;
    const auto& b = tri->bounds();
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        if (!tri->covers(x, y, w)) continue;
        const double d = tri->depth(w);
        const std::size_t i = buffer.index(x, y);
        // Faces arrive in ascending id order, so strict < keeps the smaller id on ties.
        if (d < buffer.depth[i]) {
          buffer.depth[i] = d;
          buffer.face[i] = static_cast<std::int32_t>(f);
        }
      }
    }
  }
  return buffer;
}

namespace {

FaceVisibility face_visibility_impl(const Mesh& mesh, FaceIndex face, int view_id,
                                    const PinholeCamera& camera,
                                    const ProjectedVertices& projected, const DepthBuffer& depth,
                                    double bias) {
  FaceVisibility fv;
  fv.face = face;
  fv.view_id = view_id;
  const auto tri = ScreenTriangle::make(mesh, face, projected, camera.width, camera.height);
  if (!tri) return fv;
  fv.projected_area = tri->area();
  const bool front = is_front_facing(mesh, face, camera);
  const double scale = 1.0 + bias;
  std::array<double, 3> w;
  const auto& b = tri->bounds();
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      if (!tri->covers(x, y, w)) continue;
      ++fv.footprint_pixels;
      if (front && tri->depth(w) <= depth.depth_at(x, y) * scale) {
        fv.visible_pixels.push_back({x, y});
      }
    }
  }
  if (fv.footprint_pixels == 0 && front && fv.projected_area > 0.0) {
    const auto c = camera.project(mesh.centroid(face));
    if (c && camera.in_image(c->u, c->v)) {
      const int x = static_cast<int>(std::lround(c->u));
      const int y = static_cast<int>(std::lround(c->v));
      if (x >= 0 && y >= 0 && x < camera.width && y < camera.height) {
        fv.subpixel = true;
        fv.footprint_pixels = 1;
        if (c->depth <= depth.depth_at(x, y) * scale) fv.visible_pixels.push_back({x, y});
      }
    }
  }
  return fv;
}

}  // namespace

FaceVisibility face_visibility(const Mesh& mesh, FaceIndex face, int view_id,
                               const PinholeCamera& camera, const DepthBuffer& depth,
                               double bias) {
  ProjectedVertices projected(mesh.vertices.size());
  for (std::uint32_t v : mesh.faces[face]) projected[v] = camera.project(mesh.vertices[v]);
  return face_visibility_impl(mesh, face, view_id, camera, projected, depth, bias);
}

ViewVisibility view_visibility(const Mesh& mesh, int view_id, const PinholeCamera& camera,
                               const DepthBuffer& depth, double bias) {
  ViewVisibility vv;
  vv.view_id = view_id;
  vv.entry_of_face.assign(mesh.face_count(), -1);
  const ProjectedVertices projected = project_vertices(mesh, camera);
  for (FaceIndex f = 0; f < mesh.face_count(); ++f) {
    if (!is_front_facing(mesh, f, camera)) continue;
    FaceVisibility fv = face_visibility_impl(mesh, f, view_id, camera, projected, depth, bias);
    if (!fv.visible()) continue;
    vv.entry_of_face[f] = static_cast<std::int32_t>(vv.faces.size());
    vv.faces.push_back(std::move(fv));
  }
  return vv;
}

std::vector<ViewVisibility> compute_visibility(const Mesh& mesh,
                                               std::span<const ViewImage> views, double bias,
                                               int workers,
                                               std::vector<DepthBuffer>* depth_out) {
  std::vector<ViewVisibility> out(views.size());
  if (depth_out) depth_out->assign(views.size(), DepthBuffer{});
  parallel_for(views.size(), workers, [&](std::size_t i) {
    DepthBuffer depth = rasterize_depth(mesh, views[i].camera);
    out[i] = view_visibility(mesh, views[i].id, views[i].camera, depth, bias);
    if (depth_out) (*depth_out)[i] = std::move(depth);
  });
  return out;
}

void write_depth_png(const std::filesystem::path& path, const DepthBuffer& depth) {
  write_png16(path, normalize_to_u16(depth.depth, depth.width, depth.height));
}

}  // namespace texmap
