#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "texmap/camera.hpp"
#include "texmap/visibility.hpp"

namespace texmap {

struct QualityEntry {
  int view_id = 0;
  std::size_t view_index = 0;  // position in the view list
  double area = 0.0;           // S
  double omega = 0.0;          // color-consistency weight
  double quality = 0.0;        // Q = omega * S
  Eigen::Vector3d mean_color = Eigen::Vector3d::Zero();
};

// Per face, one entry per visible view in view-list order.
struct QualityTable {
  std::vector<std::vector<QualityEntry>> faces;
};

struct ColorStats {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // unregularized
  std::vector<bool> inliers;
  int iterations = 0;
};

struct ConsistencyParams {
  double threshold = 0.006;
  int max_iterations = 10;
  double regularization = 1e-4;
  double stability = 1e-5;
  std::size_t min_inliers = 4;
};

struct ConsistencyResult {
  std::vector<double> weights;
  ColorStats stats;
};

// S: visible pixel count, or the analytic projected area for sub-pixel faces.
double projected_area(const FaceVisibility& vis);

// Mean RGB over visible pixels; nullopt when none are visible.
std::optional<Eigen::Vector3d> mean_face_color(const FaceVisibility& vis, const RgbImage& image);

// Iterative outlier rejection on per-view mean colors:
//   1. mean and covariance over the current inliers (population normalization)
//   2. Sigma' = Sigma + delta * I
//   3. g_i = exp(-(c_i - mu)^T Sigma'^-1 (c_i - mu) / 2) for every view
//   4. inliers = { i : g_i >= threshold } (never empty)
//   5. repeat while iterations < max, inliers >= min_inliers, and Sigma still
//      moves by >= stability in some entry
//   6. weights = g_i under the terminal (mu, Sigma') for all views
// A single color gets weight 1.
ConsistencyResult color_consistency(std::span<const Eigen::Vector3d> colors,
                                    const ConsistencyParams& params = {});

inline double view_quality(double area, double omega) { return omega * area; }

// Builds the quality table from per-view visibility. Entries with S = 0 are
// omitted. Parallel over faces.
QualityTable compute_quality(std::size_t face_count, std::span<const ViewImage> views,
                             std::span<const ViewVisibility> visibility,
                             const ConsistencyParams& params, int workers);

// face,view,S,omega,Q rows.
void write_quality_csv(const std::filesystem::path& path, const QualityTable& table);

}  // namespace texmap
