#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "texmap/blend.hpp"
#include "texmap/image.hpp"
#include "texmap/mesh.hpp"

namespace texmap {

inline constexpr int kGutter = 2;
inline constexpr int kMaxAtlasSide = 8192;
inline constexpr int kGrayBlockSide = 4;
inline constexpr std::uint8_t kUntexturedGray = 128;

// Texture coordinates of one face, OBJ convention: u right, v up, in [0, 1].
struct FaceUv {
  int page = 0;
  std::array<Eigen::Vector2d, 3> uv{};
};

// Top-left corner of a placed block (patch plus gutters) in page pixels.
struct Placement {
  FaceIndex face = 0;
  int page = 0;
  int x = 0;
  int y = 0;
  int side = 0;
};

struct TextureAtlas {
  std::vector<RgbImage> pages;     // square, power-of-two sides
  std::vector<FaceUv> uvs;         // one per mesh face
  std::vector<bool> textured;      // false: face maps into the gray block
  std::vector<Placement> placements;
  std::optional<Placement> gray_block;  // the 4x4 gray region, page 0

  std::size_t textured_count() const;
};

// Shelf-packs patches (largest first, face id tie-break) with 2-texel gutters
// into as few power-of-two pages as fit within max_side. Empty texels and
// gutters are dilated from the nearest computed texel. Throws InvariantError
// naming the face when a patch cannot fit a page.
TextureAtlas pack(std::span<const FacePatch> patches, std::size_t face_count,
                  int max_side = kMaxAtlasSide, int workers = 1);

// Bilinear atlas lookup at object-space barycentrics of a face.
Eigen::Vector3d sample_atlas(const TextureAtlas& atlas, FaceIndex face,
                             const std::array<double, 3>& weights);

struct TexturedModel {
  Mesh mesh;
  TextureAtlas atlas;
};

struct ExportedFiles {
  std::filesystem::path obj;
  std::filesystem::path mtl;
  std::vector<std::filesystem::path> pages;
};

// Writes out_dir/model.obj, model.mtl and atlas_####.png.
ExportedFiles export_model(const Mesh& mesh, const TextureAtlas& atlas,
                           const std::filesystem::path& out_dir);

// Reads an exported OBJ with its MTL and atlas pages.
TexturedModel load_textured_model(const std::filesystem::path& obj_path);

// Counts, per page, how many UV triangles of textured faces cover each texel
// center; returns the number of texels covered more than once.
std::size_t uv_overlap_count(const TextureAtlas& atlas);

}  // namespace texmap
