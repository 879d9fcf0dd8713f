#include "texmap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"
#include "texmap/visibility.hpp"

namespace texmap {

void SceneSpec::validate() const {
  if (cameras < 1) throw InputError("scene needs at least one camera");
  if (layout == CameraLayout::kExplicit && eyes.size() != static_cast<std::size_t>(cameras)) {
    throw InputError("explicit layout needs one eye per camera");
  }
  if (width < 1 || height < 1) throw InputError("image size must be positive");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw InputError("field of view must be in (0, 180)");
  if (!(radius > 0.0)) throw InputError("camera radius must be positive");
  if (supersample < 1) throw InputError("supersampling must be at least 1");
  if (cells < 1) throw InputError("checker cells must be at least 1");
  if (subdivisions < 0 || subdivisions > 8) throw InputError("icosphere subdivisions must be in [0, 8]");
  if (grid < 1) throw InputError("plane grid must have at least one cell");
  if (!gains.empty() && gains.size() != static_cast<std::size_t>(cameras)) {
    throw InputError("need one gain per camera");
  }
  if (!biases.empty() && biases.size() != static_cast<std::size_t>(cameras)) {
    throw InputError("need one bias per camera");
  }
  for (double g : gains) {
    if (!(g > 0.0)) throw InputError("gains must be positive");
  }
  if (!(jitter_rotation_deg >= 0.0) || !(jitter_translation >= 0.0)) {
    throw InputError("jitter must be non-negative");
  }
}

Mesh make_cube() {
  std::vector<Eigen::Vector3d> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back(i & 1 ? 1.0 : -1.0, i & 2 ? 1.0 : -1.0, i & 4 ? 1.0 : -1.0);
  }
  // Two triangles per side, wound outward.
  const std::vector<Triangle> f = {
      {0, 2, 3}, {0, 3, 1},  // z = -1
      {4, 5, 7}, {4, 7, 6},  // z = +1
      {0, 1, 5}, {0, 5, 4},  // y = -1
      {2, 6, 7}, {2, 7, 3},  // y = +1
      {0, 4, 6}, {0, 6, 2},  // x = -1
      {1, 3, 7}, {1, 7, 5},  // x = +1
  };
  return make_mesh(std::move(v), f);
}

Mesh make_icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    const auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = mid.emplace(key, static_cast<std::uint32_t>(v.size()));
      if (inserted) v.push_back((v[a] + v[b]).normalized());
      return it->second;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const Triangle& tri : f) {
      const std::uint32_t a = midpoint(tri[0], tri[1]);
      const std::uint32_t b = midpoint(tri[1], tri[2]);
      const std::uint32_t c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  return make_mesh(std::move(v), std::move(f));
}

Mesh make_plane_grid(int n) {
  std::vector<Eigen::Vector3d> v;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      v.emplace_back(-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n, 0.0);
    }
  }
  std::vector<Triangle> f;
  const auto id = [n](int i, int j) { return static_cast<std::uint32_t>(j * (n + 1) + i); };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return make_mesh(std::move(v), std::move(f));
}

Mesh make_shape(const SceneSpec& spec) {
  switch (spec.shape) {
    case Shape::kCube: return make_cube();
    case Shape::kIcosphere: return make_icosphere(spec.subdivisions);
    case Shape::kPlaneGrid: return make_plane_grid(spec.grid);
  }
  throw InvariantError("unknown shape");
}

namespace {

Eigen::Vector3d up_for(const Eigen::Vector3d& eye) {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  return std::abs(eye.normalized().dot(z)) > 0.99 ? Eigen::Vector3d::UnitY() : z;
}

}  // namespace

std::vector<PinholeCamera> make_cameras(const SceneSpec& spec) {
  std::vector<Eigen::Vector3d> eyes;
  const int n = spec.cameras;
  switch (spec.layout) {
    case CameraLayout::kRing: {
      const double el = spec.elevation_deg * std::numbers::pi / 180.0;
      for (int i = 0; i < n; ++i) {
        const double az = 2.0 * std::numbers::pi * i / n;
        eyes.emplace_back(spec.radius * std::cos(el) * std::cos(az),
                          spec.radius * std::cos(el) * std::sin(az), spec.radius * std::sin(el));
      }
      break;
    }
    case CameraLayout::kSphere: {
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        eyes.emplace_back(spec.radius * r * std::cos(phi), spec.radius * r * std::sin(phi),
                          spec.radius * z);
      }
      break;
    }
    case CameraLayout::kAxis: {
      const std::array<Eigen::Vector3d, 6> axes = {
          Eigen::Vector3d::UnitX(),  -Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
          -Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ(),  -Eigen::Vector3d::UnitZ()};
      for (int i = 0; i < n; ++i) eyes.push_back(spec.radius * axes[static_cast<std::size_t>(i % 6)]);
      break;
    }
    case CameraLayout::kExplicit:
      eyes = spec.eyes;
      break;
  }
  const double focal = 0.5 * spec.width / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
  std::vector<PinholeCamera> cams;
  for (const Eigen::Vector3d& eye : eyes) {
    cams.push_back(look_at(eye, Eigen::Vector3d::Zero(), up_for(eye), focal, spec.width, spec.height));
  }
  return cams;
}

Eigen::Vector3d pattern_color(const SceneSpec& spec, const Eigen::Vector3d& p,
                              const Eigen::Vector3d& n) {
  const double cell = 2.0 / spec.cells;
  // Half a cell inward keeps the lookup off the surface plane, where the
  // checker boundary of axis-aligned faces would sit.
  const Eigen::Vector3d q = p - 0.5 * cell * n;
  const auto parity = [&](const Eigen::Vector3d& x) {
    const long long s = static_cast<long long>(std::floor((x.x() + 1.0) / cell)) +
                        static_cast<long long>(std::floor((x.y() + 1.0) / cell)) +
                        static_cast<long long>(std::floor((x.z() + 1.0) / cell));
    return (s & 1LL) != 0;
  };
  const auto ramp = [](double x) { return std::clamp(127.5 * (x + 1.0), 0.0, 255.0); };
  switch (spec.pattern) {
    case Pattern::kCheckerboard:
      return parity(q) ? Eigen::Vector3d(224, 224, 224) : Eigen::Vector3d(32, 32, 32);
    case Pattern::kGradient:
      return {ramp(p.x()), ramp(p.y()), ramp(p.z())};
    case Pattern::kUvDebug:
      return {ramp(p.x()), ramp(p.y()), parity(q) ? 255.0 : 0.0};
    case Pattern::kSolid:
      return spec.solid_color;
  }
  return Eigen::Vector3d::Zero();
}

std::vector<Eigen::Vector3d> render_ground_truth(const Mesh& mesh, const SceneSpec& spec,
                                                 const PinholeCamera& camera) {
  const int w = camera.width;
  const int h = camera.height;
  std::vector<Eigen::Vector3d> out(static_cast<std::size_t>(w) * h, Eigen::Vector3d::Zero());
  const DepthBuffer depth = rasterize_depth(mesh, camera);
  const Eigen::Vector3d center = camera.center();
  const int k = spec.supersample;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t f = depth.face_at(x, y);
      if (f == kNoFace) continue;
      const auto face = static_cast<FaceIndex>(f);
      const Eigen::Vector3d& n = mesh.normals[face];
      const Eigen::Vector3d& a = mesh.corner(face, 0);
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) {
          const double u = x - 0.5 + (i + 0.5) / k;
          const double v = y - 0.5 + (j + 0.5) / k;
          const Eigen::Vector3d dir = camera.unproject(u, v, 1.0) - center;
          const double denom = n.dot(dir);
          const double s = denom != 0.0 ? n.dot(a - center) / denom : 0.0;
          sum += pattern_color(spec, center + s * dir, n);
        }
      }
      out[depth.index(x, y)] = sum / double(k * k);
    }
  }
  return out;
}

Scene build_scene(const SceneSpec& spec, int workers) {
  spec.validate();
  Scene scene;
  scene.mesh = make_shape(spec);
  const std::vector<PinholeCamera> cams = make_cameras(spec);
  scene.views.resize(cams.size());
  parallel_for(cams.size(), workers, [&](std::size_t i) {
    const double gain = spec.gains.empty() ? 1.0 : spec.gains[i];
    const double bias = spec.biases.empty() ? 0.0 : spec.biases[i];
    const std::vector<Eigen::Vector3d> gt = render_ground_truth(scene.mesh, spec, cams[i]);
    ViewImage& view = scene.views[i];
    view.id = static_cast<int>(i);
    view.camera = cams[i];
    view.pixels = RgbImage(cams[i].width, cams[i].height);
    auto px = view.pixels.data();
    for (std::size_t p = 0; p < gt.size(); ++p) {
      const bool background = gt[p].isZero();
      px[p] = background ? Rgb8{0, 0, 0} : to_rgb8(gain * gt[p] + Eigen::Vector3d::Constant(bias));
    }
  });

  scene.manifest = cams;
  if (spec.jitter_rotation_deg > 0.0 || spec.jitter_translation > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto random_dir = [&] {
      Eigen::Vector3d d;
      do d = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
      while (d.norm() < 1e-9);
      return d.normalized();
    };
    for (PinholeCamera& cam : scene.manifest) {
      const Eigen::Vector3d c = cam.center();
      const double angle = spec.jitter_rotation_deg * std::numbers::pi / 180.0;
      const Eigen::Matrix3d dR = Eigen::AngleAxisd(angle, random_dir()).toRotationMatrix();
      const Eigen::Vector3d c2 = c + spec.jitter_translation * spec.radius * random_dir();
      cam.R = dR * cam.R;
      cam.t = -cam.R * c2;
    }
  }
  return scene;
}

SceneFiles write_scene(const Scene& scene, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("cannot create output directory " + out_dir.string());
  SceneFiles files;
  files.mesh = out_dir / "mesh.obj";
  files.manifest = out_dir / "views.json";
  write_obj(files.mesh, scene.mesh);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%04zu.png", i);
    files.images.push_back(out_dir / name);
    write_png(files.images.back(), scene.views[i].pixels);
    entries.push_back({scene.views[i].id, name, scene.manifest[i]});
  }
  write_manifest(files.manifest, entries);
  return files;
}

}  // namespace texmap
