#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "texmap/camera.hpp"
#include "texmap/image.hpp"
#include "texmap/mesh.hpp"

namespace texmap {

enum class Shape { kCube, kIcosphere, kPlaneGrid };
enum class Pattern { kCheckerboard, kGradient, kUvDebug, kSolid };
enum class CameraLayout { kRing, kSphere, kAxis, kExplicit };

struct SceneSpec {
  Shape shape = Shape::kCube;
  int subdivisions = 2;  // icosphere: 20 * 4^s faces
  int grid = 8;          // plane-grid: grid x grid quads over [-1, 1]^2

  Pattern pattern = Pattern::kCheckerboard;
  int cells = 8;  // checker cells across [-1, 1]
  Eigen::Vector3d solid_color{180.0, 120.0, 60.0};

  CameraLayout layout = CameraLayout::kSphere;
  int cameras = 6;
  double radius = 4.0;
  double elevation_deg = 30.0;         // ring only
  std::vector<Eigen::Vector3d> eyes;   // explicit only
  int width = 256;
  int height = 256;
  double fov_deg = 50.0;
  int supersample = 4;  // k x k rays per covered pixel

  // Per view, in camera order; empty means 1 and 0.
  std::vector<double> gains;
  std::vector<double> biases;

  // Perturbs the written poses only; images keep the true poses.
  double jitter_rotation_deg = 0.0;
  double jitter_translation = 0.0;  // fraction of the camera radius
  std::uint64_t seed = 1;

  // Throws InputError.
  void validate() const;
};

Mesh make_cube();
Mesh make_icosphere(int subdivisions);
Mesh make_plane_grid(int n);
Mesh make_shape(const SceneSpec& spec);

std::vector<PinholeCamera> make_cameras(const SceneSpec& spec);

// Unperturbed procedural color at a surface point with outward normal n.
Eigen::Vector3d pattern_color(const SceneSpec& spec, const Eigen::Vector3d& p,
                              const Eigen::Vector3d& n);

// Unperturbed render: coverage from the shared rasterizer, color averaged over
// k x k rays hitting the covering face's plane. Background black.
std::vector<Eigen::Vector3d> render_ground_truth(const Mesh& mesh, const SceneSpec& spec,
                                                 const PinholeCamera& camera);

struct Scene {
  Mesh mesh;
  std::vector<ViewImage> views;         // true poses, perturbed photometry
  std::vector<PinholeCamera> manifest;  // poses as written (jittered)
};

Scene build_scene(const SceneSpec& spec, int workers = 1);

struct SceneFiles {
  std::filesystem::path mesh;
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> images;
};

// out_dir/mesh.obj, out_dir/views.json, out_dir/view_####.png
SceneFiles write_scene(const Scene& scene, const std::filesystem::path& out_dir);

}  // namespace texmap
