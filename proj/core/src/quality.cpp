#include "texmap/quality.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Cholesky>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"

namespace texmap {

double projected_area(const FaceVisibility& vis) {
  if (vis.subpixel) return vis.visible() ? vis.projected_area : 0.0;
  return static_cast<double>(vis.visible_pixels.size());
}

std::optional<Eigen::Vector3d> mean_face_color(const FaceVisibility& vis, const RgbImage& image) {
  if (vis.visible_pixels.empty()) return std::nullopt;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const PixelCoord& p : vis.visible_pixels) {
    const Rgb8& c = image(p.x, p.y);
    sum += Eigen::Vector3d(c[0], c[1], c[2]);
  }
  return sum / static_cast<double>(vis.visible_pixels.size());
}

namespace {

void estimate(std::span<const Eigen::Vector3d> colors, const std::vector<bool>& inliers,
              Eigen::Vector3d& mean, Eigen::Matrix3d& cov) {
  mean.setZero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    if (!inliers[i]) continue;
    mean += colors[i];
    ++n;
  }
  mean /= static_cast<double>(n);
  cov.setZero();
  for (std::size_t i = 0; i < colors.size(); ++i) {
    if (!inliers[i]) continue;
    const Eigen::Vector3d d = colors[i] - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);
}

std::vector<double> gaussians(std::span<const Eigen::Vector3d> colors, const Eigen::Vector3d& mean,
                              const Eigen::Matrix3d& cov, double delta) {
  const Eigen::Matrix3d reg = cov + delta * Eigen::Matrix3d::Identity();
  const Eigen::LDLT<Eigen::Matrix3d> solver(reg);
  std::vector<double> g(colors.size());
  for (std::size_t i = 0; i < colors.size(); ++i) {
    const Eigen::Vector3d d = colors[i] - mean;
    const double m2 = d.dot(solver.solve(d));
    g[i] = std::exp(-0.5 * std::max(0.0, m2));
  }
  return g;
}

}  // namespace

ConsistencyResult color_consistency(std::span<const Eigen::Vector3d> colors,
                                    const ConsistencyParams& params) {
  if (colors.empty()) throw InvariantError("color_consistency needs at least one color");
  ConsistencyResult result;
  ColorStats& stats = result.stats;
  stats.inliers.assign(colors.size(), true);
  if (colors.size() == 1) {
    stats.mean = colors[0];
    result.weights = {1.0};
    return result;
  }

  estimate(colors, stats.inliers, stats.mean, stats.covariance);
  auto inlier_count = [&] {
    std::size_t n = 0;
    for (bool b : stats.inliers) n += b;
    return n;
  };
  while (stats.iterations < params.max_iterations && inlier_count() >= params.min_inliers) {
    const std::vector<double> g =
        gaussians(colors, stats.mean, stats.covariance, params.regularization);
    std::vector<bool> next(colors.size());
    bool any = false;
    for (std::size_t i = 0; i < colors.size(); ++i) {
      next[i] = g[i] >= params.threshold;
      any = any || next[i];
    }
    if (!any) {
      // Keep the best-supported view; smallest index on ties.
      std::size_t best = 0;
      for (std::size_t i = 1; i < g.size(); ++i) {
        if (g[i] > g[best]) best = i;
      }
      next[best] = true;
    }
    stats.inliers = std::move(next);
    Eigen::Vector3d mean;
    Eigen::Matrix3d cov;
    estimate(colors, stats.inliers, mean, cov);
    const double change = (cov - stats.covariance).cwiseAbs().maxCoeff();
    stats.mean = mean;
    stats.covariance = cov;
    ++stats.iterations;
    if (change < params.stability) break;
  }
  result.weights = gaussians(colors, stats.mean, stats.covariance, params.regularization);
  return result;
}

QualityTable compute_quality(std::size_t face_count, std::span<const ViewImage> views,
                             std::span<const ViewVisibility> visibility,
                             const ConsistencyParams& params, int workers) {
  if (views.size() != visibility.size()) {
    throw InvariantError("visibility list does not match the view list");
  }
  QualityTable table;
  table.faces.resize(face_count);
  parallel_for(face_count, workers, [&](std::size_t f) {
    std::vector<QualityEntry>& entries = table.faces[f];
    for (std::size_t v = 0; v < views.size(); ++v) {
      const FaceVisibility* vis = visibility[v].find(static_cast<FaceIndex>(f));
      if (!vis) continue;
      const double area = projected_area(*vis);
      if (!(area > 0.0)) continue;
      QualityEntry e;
      e.view_id = views[v].id;
      e.view_index = v;
      e.area = area;
      e.mean_color = *mean_face_color(*vis, views[v].pixels);
      entries.push_back(e);
    }
    if (entries.empty()) return;
    std::vector<Eigen::Vector3d> colors;
    colors.reserve(entries.size());
    for (const QualityEntry& e : entries) colors.push_back(e.mean_color);
    const ConsistencyResult cr = color_consistency(colors, params);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      entries[i].omega = cr.weights[i];
      entries[i].quality = view_quality(entries[i].area, entries[i].omega);
    }
  });
  return table;
}

void write_quality_csv(const std::filesystem::path& path, const QualityTable& table) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write quality dump: " + path.string());
  out.precision(17);
  out << "face,view,S,omega,Q\n";
  for (std::size_t f = 0; f < table.faces.size(); ++f) {
    for (const QualityEntry& e : table.faces[f]) {
      out << f << ',' << e.view_id << ',' << e.area << ',' << e.omega << ',' << e.quality << '\n';
    }
  }
}

}  // namespace texmap
