#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "texmap/camera.hpp"
#include "texmap/mesh.hpp"

namespace texmap {

// Per-vertex projections for one camera; nullopt for vertices at or behind
// the camera plane.
using ProjectedVertices = std::vector<std::optional<Projection>>;

ProjectedVertices project_vertices(const Mesh& mesh, const PinholeCamera& camera);

// normal . (centroid - camera center) < 0
bool is_front_facing(const Mesh& mesh, FaceIndex face, const PinholeCamera& camera);

// A projected triangle in pixel space. Coverage is tested at integer pixel
// centers; pixels exactly on an edge shared by two faces belong to exactly one
// of them. Depth is interpolated perspective-correctly (linear in 1/z).
class ScreenTriangle {
 public:
  struct Bounds {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive, clipped to the image
    bool empty() const { return x1 < x0 || y1 < y0; }
  };

  // nullopt when a vertex is behind the camera or the projection is degenerate.
  static std::optional<ScreenTriangle> make(const std::array<Projection, 3>& corners, int width,
                                            int height);
  static std::optional<ScreenTriangle> make(const Mesh& mesh, FaceIndex face,
                                            const ProjectedVertices& projected, int width,
                                            int height);

  const Bounds& bounds() const { return bounds_; }

  // Screen-space barycentrics of a covered pixel center.
  bool covers(int x, int y, std::array<double, 3>& weights) const;

  double depth(const std::array<double, 3>& weights) const;
  // Barycentrics in object space (perspective-corrected).
  std::array<double, 3> perspective_weights(const std::array<double, 3>& weights) const;

  // Area in pixels^2.
  double area() const { return 0.5 * area2_; }

 private:
  struct Edge {
    Eigen::Vector2d origin;  // canonical (lexicographically smaller) endpoint
    Eigen::Vector2d dir;     // canonical direction
    double sign = 1.0;       // orients the edge so the interior is positive
    bool owns_ties = false;
    double eval(double x, double y) const {
      return sign * (dir.x() * (y - origin.y()) - dir.y() * (x - origin.x()));
    }
  };

  std::array<Edge, 3> edges_{};  // edge k is opposite vertex k
  std::array<double, 3> inv_depth_{};
  double area2_ = 0.0;
  Bounds bounds_;
};

inline constexpr std::int32_t kNoFace = -1;

// Nearest depth per pixel (+inf when empty) and the face that produced it.
struct DepthBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::int32_t> face;

  DepthBuffer() = default;
  DepthBuffer(int w, int h)
      : width(w), height(h),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
        face(static_cast<std::size_t>(w) * h, kNoFace) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  double depth_at(int x, int y) const { return depth[index(x, y)]; }
  std::int32_t face_at(int x, int y) const { return face[index(x, y)]; }
};

// Z-buffer over front-facing faces. Equal depths keep the smaller face id.
DepthBuffer rasterize_depth(const Mesh& mesh, const PinholeCamera& camera);

struct PixelCoord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct FaceVisibility {
  FaceIndex face = 0;
  int view_id = 0;
  std::vector<PixelCoord> visible_pixels;  // row-major order
  std::size_t footprint_pixels = 0;
  bool subpixel = false;         // no pixel center covered; centroid test used
  double projected_area = 0.0;   // analytic, pixels^2

  bool visible() const { return !visible_pixels.empty(); }
};

// A footprint pixel p is visible iff depth_face(p) <= depth_buffer(p) * (1 + bias).
// Back-facing faces are never visible.
FaceVisibility face_visibility(const Mesh& mesh, FaceIndex face, int view_id,
                               const PinholeCamera& camera, const DepthBuffer& depth,
                               double bias);

// All visible faces of one view, ascending by face id.
struct ViewVisibility {
  int view_id = 0;
  std::vector<FaceVisibility> faces;
  std::vector<std::int32_t> entry_of_face;  // index into faces, -1 when not visible

  const FaceVisibility* find(FaceIndex f) const {
    const std::int32_t e = entry_of_face[f];
    return e < 0 ? nullptr : &faces[static_cast<std::size_t>(e)];
  }
};

ViewVisibility view_visibility(const Mesh& mesh, int view_id, const PinholeCamera& camera,
                               const DepthBuffer& depth, double bias);

// Rasterizes and evaluates visibility for every view, parallel over views.
std::vector<ViewVisibility> compute_visibility(const Mesh& mesh,
                                               std::span<const ViewImage> views, double bias,
                                               int workers,
                                               std::vector<DepthBuffer>* depth_out = nullptr);

void write_depth_png(const std::filesystem::path& path, const DepthBuffer& depth);

}  // namespace texmap
