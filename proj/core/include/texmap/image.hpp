#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace texmap {

// Dense row-major single-plane raster. Integer coordinates address pixel
// centers.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Rgb8 = std::array<std::uint8_t, 3>;
using RgbImage = Raster<Rgb8>;
using Mask = Raster<std::uint8_t>;

// Bilinear sample at continuous pixel-center coordinates, clamping to the
// border.
Eigen::Vector3d sample_bilinear(const RgbImage& image, double x, double y);
double sample_bilinear(const Raster<float>& image, double x, double y);
// Bilinear over the taps where support > 0, renormalized; plain bilinear when
// no tap is supported.
Eigen::Vector3d sample_bilinear(const RgbImage& image, double x, double y,
                                const Raster<float>& support);

std::uint8_t to_u8(double value);
Rgb8 to_rgb8(const Eigen::Vector3d& color);

// Decodes PNG or JPEG into 8-bit RGB. Throws InputError.
RgbImage read_rgb(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png16(const std::filesystem::path& path, const Raster<std::uint16_t>& image);

// Maps finite values linearly onto [0, 65535] over their finite range; non-finite
// entries become 0.
Raster<std::uint16_t> normalize_to_u16(std::span<const double> values, int width, int height);

}  // namespace texmap
