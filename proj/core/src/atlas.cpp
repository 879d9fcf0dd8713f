#include "texmap/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"

namespace texmap {

std::size_t TextureAtlas::textured_count() const {
  return static_cast<std::size_t>(std::count(textured.begin(), textured.end(), true));
}

namespace {

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

struct Block {
  std::size_t patch = 0;  // index into patches, or npos for the gray block
  FaceIndex face = 0;
  int side = 0;
};

constexpr std::size_t kGray = static_cast<std::size_t>(-1);

// Places blocks on shelves; returns placements per block, page per block.
struct ShelfResult {
  std::vector<Placement> placed;
  int pages = 0;
  bool fits_one = true;
};

ShelfResult shelf_pack(const std::vector<Block>& blocks, int side, bool allow_pages) {
  ShelfResult r;
  r.pages = 1;
  int x = 0, y = 0, shelf = 0, page = 0;
  for (const Block& b : blocks) {
    if (x + b.side > side) {
      y += shelf;
      x = 0;
      shelf = 0;
    }
    if (y + b.side > side) {
      if (!allow_pages) {
        r.fits_one = false;
        return r;
      }
      ++page;
      x = y = shelf = 0;
    }
    r.placed.push_back({b.face, page, x, y, b.side});
    x += b.side;
    shelf = std::max(shelf, b.side);
  }
  r.pages = page + 1;
  r.fits_one = page == 0;
  return r;
}

// Nearest computed texel for (a, b) in [-g, R - 1 + g]^2.
std::size_t source_texel(const FacePatch& patch, int a, int b) {
  const int R = patch.resolution;
  if (a >= 0 && b >= 0 && a < R && b < R) {
    const std::size_t t = patch.index(a, b);
    if (patch.state[t] != TexelState::kEmpty) return t;
  }
  a = std::clamp(a, 0, R - 1);
  b = std::clamp(b, 0, R - 1);
  if (a + b > R) {
    const int excess = a + b - R;
    a -= (excess + 1) / 2;
    b -= excess / 2;
  }
  return patch.index(a, b);
}

}  // namespace

TextureAtlas pack(std::span<const FacePatch> patches, std::size_t face_count, int max_side,
                  int workers) {
  TextureAtlas atlas;
  atlas.uvs.assign(face_count, FaceUv{});
  atlas.textured.assign(face_count, false);

  std::vector<Block> blocks;
  blocks.reserve(patches.size() + 1);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const FacePatch& p = patches[i];
    if (p.face >= face_count) throw InvariantError("patch for face outside the mesh");
    if (atlas.textured[p.face]) {
      throw InvariantError("two patches for face " + std::to_string(p.face));
    }
    atlas.textured[p.face] = true;
    const int side = p.resolution + 2 * kGutter;
    if (side > max_side) {
      throw InvariantError("patch of face " + std::to_string(p.face) + " (" +
                           std::to_string(side) + " texels) exceeds the maximum atlas side " +
                           std::to_string(max_side));
    }
    blocks.push_back({i, p.face, side});
  }
  const bool any_untextured = atlas.textured_count() < face_count;

  if (patches.empty()) {
    atlas.pages.emplace_back(kGrayBlockSide, kGrayBlockSide,
                             Rgb8{kUntexturedGray, kUntexturedGray, kUntexturedGray});
    atlas.gray_block = Placement{0, 0, 0, 0, kGrayBlockSide};
  } else {
    if (any_untextured) {
      blocks.push_back({kGray, static_cast<FaceIndex>(face_count), kGrayBlockSide + 2 * kGutter});
    }
    std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
      return a.side != b.side ? a.side > b.side : a.face < b.face;
    });
    long long area = 0;
    int largest = 0;
    for (const Block& b : blocks) {
      area += static_cast<long long>(b.side) * b.side;
      largest = std::max(largest, b.side);
    }
    int side = next_pow2(std::max(largest, static_cast<int>(std::ceil(std::sqrt(double(area))))));
    ShelfResult layout;
    while (true) {
      if (side >= max_side) {
        side = max_side;
        layout = shelf_pack(blocks, side, true);
        break;
      }
      layout = shelf_pack(blocks, side, false);
      if (layout.fits_one) break;
      side *= 2;
    }
    for (int p = 0; p < layout.pages; ++p) atlas.pages.emplace_back(side, side, Rgb8{0, 0, 0});

    std::vector<std::size_t> block_of_patch(patches.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const Placement& pl = layout.placed[k];
      if (blocks[k].patch == kGray) {
        atlas.gray_block = Placement{0, pl.page, pl.x + kGutter, pl.y + kGutter, kGrayBlockSide};
        RgbImage& page = atlas.pages[pl.page];
        for (int y = pl.y; y < pl.y + pl.side; ++y) {
          for (int x = pl.x; x < pl.x + pl.side; ++x) {
            page(x, y) = Rgb8{kUntexturedGray, kUntexturedGray, kUntexturedGray};
          }
        }
      } else {
        block_of_patch[blocks[k].patch] = k;
        atlas.placements.push_back(pl);
      }
    }
    std::sort(atlas.placements.begin(), atlas.placements.end(),
              [](const Placement& a, const Placement& b) { return a.face < b.face; });

    parallel_for(patches.size(), workers, [&](std::size_t i) {
      const FacePatch& patch = patches[i];
      const Placement& pl = layout.placed[block_of_patch[i]];
      RgbImage& page = atlas.pages[pl.page];
      const int R = patch.resolution;
      for (int b = -kGutter; b < R + kGutter; ++b) {
        for (int a = -kGutter; a < R + kGutter; ++a) {
          page(pl.x + kGutter + a, pl.y + kGutter + b) = patch.texels[source_texel(patch, a, b)];
        }
      }
      const double W = page.width();
      const double H = page.height();
      const auto uv_of = [&](int a, int b) {
        const double px = pl.x + kGutter + a + 0.5;
        const double py = pl.y + kGutter + b + 0.5;
        return Eigen::Vector2d(px / W, 1.0 - py / H);
      };
      FaceUv& fu = atlas.uvs[patch.face];
      fu.page = pl.page;
      const auto o = static_cast<std::size_t>(patch.origin);
      fu.uv[o] = uv_of(0, 0);
      fu.uv[(o + 1) % 3] = uv_of(R - 1, 0);
      fu.uv[(o + 2) % 3] = uv_of(0, R - 1);
    });
  }

  if (any_untextured) {
    const Placement& g = *atlas.gray_block;
    const RgbImage& page = atlas.pages[g.page];
    const double W = page.width();
    const double H = page.height();
    const auto uv_of = [&](double px, double py) {
      return Eigen::Vector2d((g.x + px) / W, 1.0 - (g.y + py) / H);
    };
    const FaceUv gray{g.page, {uv_of(1.0, 1.0), uv_of(3.0, 1.0), uv_of(1.0, 3.0)}};
    for (std::size_t f = 0; f < face_count; ++f) {
      if (!atlas.textured[f]) atlas.uvs[f] = gray;
    }
  }
  return atlas;
}

Eigen::Vector3d sample_atlas(const TextureAtlas& atlas, FaceIndex face,
                             const std::array<double, 3>& w) {
  const FaceUv& fu = atlas.uvs[face];
  const RgbImage& page = atlas.pages[static_cast<std::size_t>(fu.page)];
  const Eigen::Vector2d uv = w[0] * fu.uv[0] + w[1] * fu.uv[1] + w[2] * fu.uv[2];
  return sample_bilinear(page, uv.x() * page.width() - 0.5, (1.0 - uv.y()) * page.height() - 0.5);
}

ExportedFiles export_model(const Mesh& mesh, const TextureAtlas& atlas,
                           const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("cannot create output directory " + out_dir.string());
  if (atlas.uvs.size() != mesh.face_count()) {
    throw InvariantError("atlas and mesh disagree on face count");
  }

  ExportedFiles files;
  files.obj = out_dir / "model.obj";
  files.mtl = out_dir / "model.mtl";
  std::vector<std::string> names;
  for (std::size_t p = 0; p < atlas.pages.size(); ++p) {
    char name[32];
    std::snprintf(name, sizeof(name), "atlas_%04zu", p);
    names.emplace_back(name);
    files.pages.push_back(out_dir / (names.back() + ".png"));
    write_png(files.pages.back(), atlas.pages[p]);
  }

  {
    std::ofstream mtl(files.mtl);
    if (!mtl) throw InputError("cannot write " + files.mtl.string());
    for (const std::string& n : names) {
      mtl << "newmtl " << n << "\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nillum 1\nmap_Kd " << n
          << ".png\n\n";
    }
  }

  std::ofstream obj(files.obj);
  if (!obj) throw InputError("cannot write " + files.obj.string());
  obj << "# texmap textured model\nmtllib model.mtl\n";
  for (const Eigen::Vector3d& v : mesh.vertices) {
    obj << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  }
  std::vector<std::size_t> first_vt(mesh.face_count(), 0);
  std::size_t vt = 0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    if (!atlas.textured[f]) continue;
    first_vt[f] = vt;
    for (const Eigen::Vector2d& uv : atlas.uvs[f].uv) {
      obj << "vt " << format_double(uv.x()) << ' ' << format_double(uv.y()) << '\n';
    }
    vt += 3;
  }
  const std::size_t gray_vt = vt;
  if (atlas.textured_count() < mesh.face_count()) {
    const FaceUv& g = *std::find_if(atlas.uvs.begin(), atlas.uvs.end(), [&](const FaceUv& u) {
      return !atlas.textured[static_cast<std::size_t>(&u - atlas.uvs.data())];
    });
    for (const Eigen::Vector2d& uv : g.uv) {
      obj << "vt " << format_double(uv.x()) << ' ' << format_double(uv.y()) << '\n';
    }
  }
  int current = -1;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const int page = atlas.uvs[f].page;
    if (page != current) {
      obj << "usemtl " << names[static_cast<std::size_t>(page)] << '\n';
      current = page;
    }
    const std::size_t base = atlas.textured[f] ? first_vt[f] : gray_vt;
    obj << 'f';
    for (int k = 0; k < 3; ++k) obj << ' ' << mesh.faces[f][k] + 1 << '/' << base + k + 1;
    obj << '\n';
  }
  if (!obj) throw InputError("failed writing " + files.obj.string());
  return files;
}

TexturedModel load_textured_model(const std::filesystem::path& obj_path) {
  if (!std::filesystem::exists(obj_path)) {
    throw InputError("model file not found: " + obj_path.string());
  }
  ObjDocument doc = parse_obj(obj_path);
  const std::filesystem::path dir = obj_path.parent_path();

  std::map<std::string, std::string> texture_of;
  for (const std::string& lib : doc.mtllibs) {
    std::ifstream in(dir / lib);
    if (!in) throw InputError("cannot open material library " + (dir / lib).string());
    std::string line, current;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key == "newmtl") {
        ls >> current;
      } else if (key == "map_Kd") {
        std::string file;
        ls >> file;
        texture_of[current] = file;
      }
    }
  }

  TexturedModel model;
  std::map<std::string, int> page_of_file;
  std::vector<int> page_of_material(doc.materials.size(), -1);
  for (std::size_t m = 0; m < doc.materials.size(); ++m) {
    auto it = texture_of.find(doc.materials[m]);
    if (it == texture_of.end()) continue;
    auto [pit, inserted] = page_of_file.emplace(it->second, static_cast<int>(model.atlas.pages.size()));
    if (inserted) model.atlas.pages.push_back(read_rgb(dir / it->second));
    page_of_material[m] = pit->second;
  }

  const std::size_t n = doc.faces.size();
  model.atlas.uvs.assign(n, FaceUv{});
  model.atlas.textured.assign(n, false);
  bool need_gray = false;
  for (std::size_t f = 0; f < n; ++f) {
    const int m = doc.face_material[f];
    const int page = m >= 0 ? page_of_material[static_cast<std::size_t>(m)] : -1;
    const auto& ti = doc.face_texcoords[f];
    if (page < 0 || ti[0] < 0 || ti[1] < 0 || ti[2] < 0) {
      need_gray = true;
      continue;
    }
    FaceUv& fu = model.atlas.uvs[f];
    fu.page = page;
    for (int k = 0; k < 3; ++k) fu.uv[k] = doc.texcoords[static_cast<std::size_t>(ti[k])];
    model.atlas.textured[f] = true;
  }
  if (need_gray) {
    const int page = static_cast<int>(model.atlas.pages.size());
    model.atlas.pages.emplace_back(kGrayBlockSide, kGrayBlockSide,
                                   Rgb8{kUntexturedGray, kUntexturedGray, kUntexturedGray});
    for (std::size_t f = 0; f < n; ++f) {
      if (!model.atlas.textured[f]) {
        model.atlas.uvs[f] = FaceUv{page, {Eigen::Vector2d(0.25, 0.75), Eigen::Vector2d(0.75, 0.75),
                                           Eigen::Vector2d(0.25, 0.25)}};
      }
    }
  }
  model.mesh = make_mesh(std::move(doc.positions), std::move(doc.faces));
  return model;
}

std::size_t uv_overlap_count(const TextureAtlas& atlas) {
  std::vector<Raster<std::uint8_t>> hits;
  for (const RgbImage& p : atlas.pages) hits.emplace_back(p.width(), p.height(), 0);
  std::size_t overlaps = 0;
  for (std::size_t f = 0; f < atlas.uvs.size(); ++f) {
    if (!atlas.textured[f]) continue;
    const FaceUv& fu = atlas.uvs[f];
    auto& map = hits[static_cast<std::size_t>(fu.page)];
    const double W = map.width(), H = map.height();
    std::array<Eigen::Vector2d, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = Eigen::Vector2d(fu.uv[k].x() * W, (1.0 - fu.uv[k].y()) * H);
    const auto edge = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, double x, double y) {
      return (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
    };
    const double area = edge(p[0], p[1], p[2].x(), p[2].y());
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].x(), p[1].x(), p[2].x()}))));
    const int x1 = std::min(map.width() - 1, static_cast<int>(std::ceil(std::max({p[0].x(), p[1].x(), p[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p[0].y(), p[1].y(), p[2].y()}))));
    const int y1 = std::min(map.height() - 1, static_cast<int>(std::ceil(std::max({p[0].y(), p[1].y(), p[2].y()}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double cx = x + 0.5, cy = y + 0.5;
        const double e0 = edge(p[1], p[2], cx, cy) * area;
        const double e1 = edge(p[2], p[0], cx, cy) * area;
        const double e2 = edge(p[0], p[1], cx, cy) * area;
        if (e0 < 0 || e1 < 0 || e2 < 0) continue;
        if (map(x, y)++ > 0) ++overlaps;
      }
    }
  }
  return overlaps;
}

}  // namespace texmap
