#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "texmap/camera.hpp"
#include "texmap/image.hpp"
#include "texmap/mesh.hpp"
#include "texmap/mrf.hpp"
#include "texmap/quality.hpp"
#include "texmap/visibility.hpp"

namespace texmap {

// One mask per view (view-list order): union of the visible pixels of every
// face that kept that view among its candidates.
std::vector<Mask> build_masks(const CandidateSet& candidates, std::span<const ViewImage> views,
                              std::span<const ViewVisibility> visibility);

// Exact squared Euclidean distance from each pixel to the nearest zero pixel,
// with everything outside the raster counting as zero. Zero pixels map to 0.
Raster<std::int64_t> squared_distance_transform(const Mask& mask);
Raster<float> distance_transform(const Mask& mask);

// R = ceil(sqrt(2 * best_area)), clamped to [4, 256].
int texel_resolution(double best_area);

enum class TexelState : std::uint8_t {
  kEmpty = 0,    // outside the blended region; filled at packing time
  kBlended,      // inside the triangle, blended from candidates
  kExtrapolated, // one texel beyond the hypotenuse, blended from candidates
  kFilled,       // no candidate projected in bounds; copied from a neighbor
};

// Texels of an R x R grid anchored at corner o = origin: texel (a, b) gives
// corner o weight 1 - (a + b) / (R - 1), corner o+1 weight a / (R - 1) and
// corner o+2 weight b / (R - 1) (indices mod 3). Texels with a + b <= R - 1
// cover the triangle.
struct FacePatch {
  FaceIndex face = 0;
  int resolution = 0;
  int origin = 0;  // corner with the largest interior angle
  std::vector<Rgb8> texels;      // row b, column a at b * R + a
  std::vector<TexelState> state;
  double max_weight_error = 0.0; // max |sum of normalized weights - 1| over covered texels
  std::size_t filled_texels = 0;

  std::size_t index(int a, int b) const { return static_cast<std::size_t>(b) * resolution + a; }
  std::array<double, 3> weights(int a, int b) const;
};

// Corner with the largest interior angle, smallest index on ties.
int patch_origin(const Mesh& mesh, FaceIndex face);

// Blends the candidate views of one face with distance-map weights.
// `dists` is indexed like `views`.
FacePatch blend_face(const Mesh& mesh, FaceIndex face, std::span<const Label> candidates,
                     std::span<const ViewImage> views, std::span<const Raster<float>> dists,
                     int resolution);

// Patches for every face with at least one candidate, ascending face id.
std::vector<FacePatch> blend_faces(const Mesh& mesh, const CandidateSet& candidates,
                                   const QualityTable& quality, std::span<const ViewImage> views,
                                   std::span<const Raster<float>> dists, int workers);

void write_distance_png(const std::filesystem::path& path, const Raster<float>& dist);

}  // namespace texmap
