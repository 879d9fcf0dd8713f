#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "texmap/image.hpp"

namespace texmap {

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// World-to-camera pinhole: x_cam = R * X + t. No lens distortion.
struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int width = 1;
  int height = 1;

  // Throws InputError when intrinsics or rotation are invalid.
  void validate() const;

  Eigen::Vector3d center() const { return -R.transpose() * t; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return R * world + t; }

  // nullopt when the point is at or behind the camera plane.
  std::optional<Projection> project(const Eigen::Vector3d& world) const;
  Eigen::Vector3d unproject(double u, double v, double depth) const;

  // Pixel centers are integers; [-0.5, width-0.5) x [-0.5, height-0.5) is inside.
  bool in_image(double u, double v) const {
    return u >= -0.5 && v >= -0.5 && u < width - 0.5 && v < height - 0.5;
  }
};

// Camera at `eye` looking at `target`; image y grows along -up.
PinholeCamera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                      const Eigen::Vector3d& up, double focal, int width, int height);

struct ViewImage {
  int id = 0;
  PinholeCamera camera;
  RgbImage pixels;
};

struct ManifestEntry {
  int id = 0;
  std::string image;  // relative to the image root
  PinholeCamera camera;
};

// Parses and validates the JSON view manifest (no image decoding).
std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path,
                    const std::vector<ManifestEntry>& entries);

// Loads every manifest entry in order, decoding images with up to `workers`
// threads. Throws InputError on missing files, malformed JSON, duplicate ids,
// an empty manifest, or raster/camera dimension mismatch.
std::vector<ViewImage> load_views(const std::filesystem::path& manifest_path,
                                  const std::filesystem::path& image_root, int workers = 1);

}  // namespace texmap
