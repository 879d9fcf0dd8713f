#include "texmap/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"

namespace texmap {

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("camera dimensions must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InputError("camera principal point outside the image");
  }
  const Eigen::Matrix3d gram = R.transpose() * R;
  if (!((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6) ||
      !R.allFinite() || !t.allFinite()) {
    throw InputError("camera rotation is not orthonormal");
  }
}

std::optional<Projection> PinholeCamera::project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d p = to_camera(world);
  if (p.z() <= 0.0) return std::nullopt;
  return Projection{fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy, p.z()};
}

Eigen::Vector3d PinholeCamera::unproject(double u, double v, double depth) const {
  const Eigen::Vector3d p((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
  return R.transpose() * (p - t);
}

PinholeCamera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                      const Eigen::Vector3d& up, double focal, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Eigen::Vector3d::UnitX());
  if (x.norm() < 1e-9) x = z.cross(Eigen::Vector3d::UnitY());
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  PinholeCamera cam;
  cam.R.row(0) = x;
  cam.R.row(1) = y;
  cam.R.row(2) = z;
  cam.t = -cam.R * eye;
  cam.fx = cam.fy = focal;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

namespace {

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::size_t index) {
  if (!obj.contains(key)) {
    throw InputError("manifest entry " + std::to_string(index) + " lacks '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("manifest entry " + std::to_string(index) + " has malformed '" + key + "'");
  }
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw InputError("cannot open view manifest: " + manifest_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed view manifest: " + std::string(e.what()));
  }
  if (!doc.is_array()) throw InputError("malformed view manifest: top level must be a list");
  if (doc.empty()) throw InputError("at least one view required");

  std::vector<ManifestEntry> entries;
  std::set<int> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const nlohmann::json& obj = doc[i];
    if (!obj.is_object()) throw InputError("manifest entry " + std::to_string(i) + " is not an object");
    ManifestEntry e;
    e.id = required<int>(obj, "id", i);
    e.image = required<std::string>(obj, "image", i);
    PinholeCamera& c = e.camera;
    c.width = required<int>(obj, "width", i);
    c.height = required<int>(obj, "height", i);
    c.fx = required<double>(obj, "fx", i);
    c.fy = required<double>(obj, "fy", i);
    c.cx = required<double>(obj, "cx", i);
    c.cy = required<double>(obj, "cy", i);
    const auto r = required<std::vector<double>>(obj, "R", i);
    const auto t = required<std::vector<double>>(obj, "t", i);
    if (r.size() != 9) throw InputError("manifest entry " + std::to_string(i) + ": R needs 9 values");
    if (t.size() != 3) throw InputError("manifest entry " + std::to_string(i) + ": t needs 3 values");
    for (int k = 0; k < 9; ++k) c.R(k / 3, k % 3) = r[k];
    c.t = Eigen::Vector3d(t[0], t[1], t[2]);
    try {
      c.validate();
    } catch (const InputError& err) {
      throw InputError("manifest entry " + std::to_string(i) + ": " + err.what());
    }
    if (!ids.insert(e.id).second) throw InputError("duplicate view id " + std::to_string(e.id));
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& manifest_path,
                    const std::vector<ManifestEntry>& entries) {
  nlohmann::json doc = nlohmann::json::array();
  for (const ManifestEntry& e : entries) {
    const PinholeCamera& c = e.camera;
    std::vector<double> r(9);
    for (int k = 0; k < 9; ++k) r[k] = c.R(k / 3, k % 3);
    doc.push_back({{"id", e.id},
                   {"image", e.image},
                   {"width", c.width},
                   {"height", c.height},
                   {"fx", c.fx},
                   {"fy", c.fy},
                   {"cx", c.cx},
                   {"cy", c.cy},
                   {"R", r},
                   {"t", {c.t.x(), c.t.y(), c.t.z()}}});
  }
  std::ofstream out(manifest_path);
  if (!out) throw InputError("cannot write manifest: " + manifest_path.string());
  out << doc.dump(2) << '\n';
}

std::vector<ViewImage> load_views(const std::filesystem::path& manifest_path,
                                  const std::filesystem::path& image_root, int workers) {
  const std::vector<ManifestEntry> entries = parse_manifest(manifest_path);
  std::vector<ViewImage> views(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    ViewImage& view = views[i];
    view.id = e.id;
    view.camera = e.camera;
    view.pixels = read_rgb(image_root / e.image);
    if (view.pixels.width() != e.camera.width || view.pixels.height() != e.camera.height) {
      throw InputError("image " + e.image + " is " + std::to_string(view.pixels.width()) + "x" +
                       std::to_string(view.pixels.height()) + " but manifest declares " +
                       std::to_string(e.camera.width) + "x" + std::to_string(e.camera.height));
    }
  });
  return views;
}

}  // namespace texmap
