#include <optional>

#include <Eigen/Geometry>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "texmap/synth.hpp"
#include "texmap/visibility.hpp"

namespace texmap {
namespace {

using testing::at_pixel;
using testing::axis_camera;

// Appends a triangle through the given pixel positions at depth z, wound to
// face the camera at the origin.
void add_facing(std::vector<Eigen::Vector3d>& v, std::vector<Triangle>& f, const PinholeCamera& cam,
                std::array<Eigen::Vector2d, 3> px, double z) {
  const auto base = static_cast<std::uint32_t>(v.size());
  for (const auto& p : px) v.push_back(at_pixel(cam, p.x(), p.y(), z));
  const Eigen::Vector3d n = (v[base + 1] - v[base]).cross(v[base + 2] - v[base]);
  if (n.z() < 0) {
    f.push_back({base, base + 1, base + 2});
  } else {
    f.push_back({base, base + 2, base + 1});
  }
}

// Moller-Trumbore ray/triangle hit distance along a ray from the origin.
std::optional<double> ray_hit(const Eigen::Vector3d& dir, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a, e2 = c - a;
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-15) return std::nullopt;
  const Eigen::Vector3d s = -a;
  const double u = s.dot(p) / det;
  const Eigen::Vector3d q = s.cross(e1);
  const double v = dir.dot(q) / det;
  if (u < 0 || v < 0 || u + v > 1) return std::nullopt;
  return e2.dot(q) / det;
}

TEST(Rasterize, SingleFrontoTriangle) {
  const PinholeCamera cam = axis_camera(100, 101, 101);
  std::vector<Eigen::Vector3d> v;
  std::vector<Triangle> f;
  add_facing(v, f, cam, {{{30, 30}, {80, 35}, {35, 80}}}, 2.0);
  const DepthBuffer d = rasterize_depth(make_mesh(v, f), cam);
  EXPECT_NEAR(d.depth_at(50, 50), 2.0, 1e-12);
  EXPECT_EQ(d.face_at(50, 50), 0);
  EXPECT_TRUE(std::isinf(d.depth_at(0, 0)));
  EXPECT_EQ(d.face_at(0, 0), kNoFace);
}

TEST(Rasterize, NearerTriangleWins) {
  const PinholeCamera cam = axis_camera(100, 101, 101);
  std::vector<Eigen::Vector3d> v;
  std::vector<Triangle> f;
  add_facing(v, f, cam, {{{10, 10}, {90, 10}, {10, 90}}}, 2.0);
  add_facing(v, f, cam, {{{20, 20}, {70, 20}, {20, 70}}}, 1.0);
  const DepthBuffer d = rasterize_depth(make_mesh(v, f), cam);
  EXPECT_NEAR(d.depth_at(30, 30), 1.0, 1e-12);
  EXPECT_EQ(d.face_at(30, 30), 1);
  EXPECT_NEAR(d.depth_at(80, 12), 2.0, 1e-12);
}

TEST(Rasterize, EmptyMeshIsAllInfinite) {
  const DepthBuffer d = rasterize_depth(Mesh{}, axis_camera(50, 16, 12));
  for (double z : d.depth) EXPECT_TRUE(std::isinf(z));
}

TEST(Rasterize, SharedEdgePixelsBelongToExactlyOneFace) {
  // Square split along its diagonal, with vertices on pixel centers so that
  // many pixel centers lie exactly on the shared edge.
  const PinholeCamera cam = axis_camera(100, 41, 41);
  const std::vector<Eigen::Vector3d> v = {at_pixel(cam, 5, 5, 1), at_pixel(cam, 35, 5, 1),
                                          at_pixel(cam, 35, 35, 1), at_pixel(cam, 5, 35, 1)};
  const Mesh m = make_mesh(v, {{0, 2, 1}, {0, 3, 2}});
  const ProjectedVertices pv = project_vertices(m, cam);
  const auto t0 = ScreenTriangle::make(m, 0, pv, 41, 41);
  const auto t1 = ScreenTriangle::make(m, 1, pv, 41, 41);
  ASSERT_TRUE(t0 && t1);
  std::array<double, 3> w{};
  for (int y = 0; y < 41; ++y) {
    for (int x = 0; x < 41; ++x) {
      const int n = t0->covers(x, y, w) + t1->covers(x, y, w);
      const bool inside_square = x >= 5 && x <= 35 && y >= 5 && y <= 35;
      if (x > 5 && x < 35 && y > 5 && y < 35) {
        EXPECT_EQ(n, 1) << x << "," << y;
      }
      if (!inside_square) {
        EXPECT_EQ(n, 0);
      }
      EXPECT_LE(n, 1);
    }
  }
}

TEST(Rasterize, PerspectiveCorrectDepth) {
  // Inclined triangle: interpolated depth equals the exact ray/plane distance.
  const PinholeCamera cam = axis_camera(80, 81, 81);
  const std::vector<Eigen::Vector3d> v = {{-1, -1, 2}, {1, -1, 4}, {-1, 1, 2}};
  const Mesh m = make_mesh(v, {{0, 2, 1}});
  ASSERT_TRUE(is_front_facing(m, 0, cam));
  const DepthBuffer d = rasterize_depth(m, cam);
  int checked = 0;
  for (int y = 0; y < 81; ++y) {
    for (int x = 0; x < 81; ++x) {
      if (d.face_at(x, y) != 0) continue;
      const Eigen::Vector3d dir((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const auto t = ray_hit(dir, v[0], v[2], v[1]);
      ASSERT_TRUE(t);
      EXPECT_NEAR(d.depth_at(x, y), *t, 1e-9);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Visibility, UnoccludedFaceSeesWholeFootprint) {
  const PinholeCamera cam = axis_camera(100, 101, 101);
  std::vector<Eigen::Vector3d> v;
  std::vector<Triangle> f;
  add_facing(v, f, cam, {{{30, 30}, {80, 35}, {35, 80}}}, 2.0);
  const Mesh m = make_mesh(v, f);
  const FaceVisibility vis = face_visibility(m, 0, 0, cam, rasterize_depth(m, cam), 1e-3);
  EXPECT_GT(vis.footprint_pixels, 500u);
  EXPECT_EQ(vis.visible_pixels.size(), vis.footprint_pixels);
  EXPECT_FALSE(vis.subpixel);
}

TEST(Visibility, FaceBehindAnotherIsHidden) {
  const PinholeCamera cam = axis_camera(100, 101, 101);
  std::vector<Eigen::Vector3d> v;
  std::vector<Triangle> f;
  add_facing(v, f, cam, {{{30, 30}, {80, 35}, {35, 80}}}, 1.0);
  add_facing(v, f, cam, {{{30, 30}, {80, 35}, {35, 80}}}, 2.0);
  const Mesh m = make_mesh(v, f);
  const DepthBuffer d = rasterize_depth(m, cam);
  EXPECT_FALSE(face_visibility(m, 1, 0, cam, d, 1e-3).visible());
  EXPECT_TRUE(face_visibility(m, 0, 0, cam, d, 1e-3).visible());
}

TEST(Visibility, BackFacingIsNeverVisible) {
  const PinholeCamera cam = axis_camera(100, 101, 101);
  const std::vector<Eigen::Vector3d> v = {at_pixel(cam, 30, 30, 2), at_pixel(cam, 80, 35, 2),
                                          at_pixel(cam, 35, 80, 2)};
  const Mesh m = make_mesh(v, {{0, 1, 2}});
  ASSERT_FALSE(is_front_facing(m, 0, cam));
  EXPECT_FALSE(face_visibility(m, 0, 0, cam, rasterize_depth(m, cam), 1.0).visible());
}

TEST(Visibility, PartialOcclusionMatchesRayOracle) {
  // Large back triangle; a nearer quad covers the left part of its footprint.
  const PinholeCamera cam = axis_camera(120, 161, 161);
  std::vector<Eigen::Vector3d> v;
  std::vector<Triangle> f;
  add_facing(v, f, cam, {{{20.3, 20.6}, {140.2, 20.6}, {20.3, 139.9}}}, 3.0);
  const double cut = 47.3;  // about 40% of the triangle area lies left of it
  add_facing(v, f, cam, {{{0, 0}, {cut, 0}, {cut, 160}}}, 1.5);
  add_facing(v, f, cam, {{{0, 0}, {cut, 160}, {0, 160}}}, 1.5);
  const Mesh m = make_mesh(v, f);
  const FaceVisibility vis = face_visibility(m, 0, 0, cam, rasterize_depth(m, cam), 1e-3);

  std::size_t foot = 0, visible = 0;
  for (int y = 0; y < 161; ++y) {
    for (int x = 0; x < 161; ++x) {
      const Eigen::Vector3d dir((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const auto back = ray_hit(dir, v[0], v[1], v[2]);
      if (!back) continue;
      ++foot;
      bool blocked = false;
      for (int k : {1, 2}) {
        const auto& t = m.faces[k];
        const auto hit = ray_hit(dir, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        if (hit && *hit < *back) blocked = true;
      }
      visible += !blocked;
    }
  }
  const double frac = double(visible) / double(foot);
  EXPECT_NEAR(frac, 0.6, 0.03);
  // No vertex or edge passes through a pixel center, so counts agree up to
  // floating-point ties.
  EXPECT_NEAR(double(vis.footprint_pixels), double(foot), 2.0);
  EXPECT_NEAR(double(vis.visible_pixels.size()), double(visible), 2.0);
  EXPECT_NEAR(double(vis.visible_pixels.size()) / vis.footprint_pixels, frac, 0.01);
}

TEST(Visibility, VisiblePixelsAreSelfConsistent) {
  const Mesh m = make_icosphere(2);
  const PinholeCamera cam = look_at({0, 0, 3}, {0, 0, 0}, {0, 1, 0}, 150, 128, 128);
  const DepthBuffer d = rasterize_depth(m, cam);
  const ViewVisibility vv = view_visibility(m, 0, cam, d, 1e-3);
  for (const FaceVisibility& fv : vv.faces) {
    EXPECT_TRUE(is_front_facing(m, fv.face, cam));
    if (fv.subpixel) continue;
    EXPECT_LE(fv.visible_pixels.size(), fv.footprint_pixels);
    for (const PixelCoord& p : fv.visible_pixels) {
      EXPECT_EQ(d.face_at(p.x, p.y), static_cast<std::int32_t>(fv.face));
    }
  }
  // Every covered pixel is attributed to the face that won it.
  std::size_t covered = 0, attributed = 0;
  for (auto id : d.face) covered += id != kNoFace;
  for (const FaceVisibility& fv : vv.faces) attributed += fv.subpixel ? 0 : fv.visible_pixels.size();
  EXPECT_EQ(attributed, covered);
}

TEST(Visibility, LargerBiasNeverHidesMore) {
  const Mesh m = make_icosphere(3);
  const PinholeCamera cam = look_at({0.3, 0.2, 2.5}, {0, 0, 0}, {0, 1, 0}, 200, 160, 120);
  const DepthBuffer d = rasterize_depth(m, cam);
  std::size_t prev = 0;
  for (double bias : {0.0, 1e-4, 1e-3, 1e-2, 0.5}) {
    std::size_t n = 0;
    for (const FaceVisibility& fv : view_visibility(m, 0, cam, d, bias).faces) {
      n += fv.visible_pixels.size();
    }
    EXPECT_GE(n, prev) << bias;
    prev = n;
  }
}

TEST(Visibility, IndependentOfWorkerCount) {
  SceneSpec spec;
  spec.shape = Shape::kIcosphere;
  spec.width = spec.height = 96;
  const Scene scene = build_scene(spec);
  std::vector<DepthBuffer> d1, d4;
  const auto a = compute_visibility(scene.mesh, scene.views, 1e-3, 1, &d1);
  const auto b = compute_visibility(scene.mesh, scene.views, 1e-3, 4, &d4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(d1[i].depth, d4[i].depth);
    EXPECT_EQ(d1[i].face, d4[i].face);
    ASSERT_EQ(a[i].faces.size(), b[i].faces.size());
    for (std::size_t k = 0; k < a[i].faces.size(); ++k) {
      EXPECT_EQ(a[i].faces[k].visible_pixels, b[i].faces[k].visible_pixels);
    }
  }
}

}  // namespace
}  // namespace texmap
