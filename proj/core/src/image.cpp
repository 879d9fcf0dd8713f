#include "texmap/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "texmap/error.hpp"

namespace texmap {

namespace {

struct BilinearTaps {
  int x0, x1, y0, y1;
  double fx, fy;
};

BilinearTaps taps(int width, int height, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  BilinearTaps t{};
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  t.x1 = std::min(t.x0 + 1, width - 1);
  t.y1 = std::min(t.y0 + 1, height - 1);
  t.fx = x - t.x0;
  t.fy = y - t.y0;
  return t;
}

}  // namespace

Eigen::Vector3d sample_bilinear(const RgbImage& image, double x, double y) {
  if (image.empty()) return Eigen::Vector3d::Zero();
  const BilinearTaps t = taps(image.width(), image.height(), x, y);
  const auto px = [&](int xx, int yy) {
    const Rgb8& c = image(xx, yy);
    return Eigen::Vector3d(c[0], c[1], c[2]);
  };
  const Eigen::Vector3d top = px(t.x0, t.y0) * (1.0 - t.fx) + px(t.x1, t.y0) * t.fx;
  const Eigen::Vector3d bottom = px(t.x0, t.y1) * (1.0 - t.fx) + px(t.x1, t.y1) * t.fx;
  return top * (1.0 - t.fy) + bottom * t.fy;
}

double sample_bilinear(const Raster<float>& image, double x, double y) {
  if (image.empty()) return 0.0;
  const BilinearTaps t = taps(image.width(), image.height(), x, y);
  const double top = image(t.x0, t.y0) * (1.0 - t.fx) + image(t.x1, t.y0) * t.fx;
  const double bottom = image(t.x0, t.y1) * (1.0 - t.fx) + image(t.x1, t.y1) * t.fx;
  return top * (1.0 - t.fy) + bottom * t.fy;
}

Eigen::Vector3d sample_bilinear(const RgbImage& image, double x, double y,
                                const Raster<float>& support) {
  if (image.empty()) return Eigen::Vector3d::Zero();
  const BilinearTaps t = taps(image.width(), image.height(), x, y);
  const int xs[4] = {t.x0, t.x1, t.x0, t.x1};
  const int ys[4] = {t.y0, t.y0, t.y1, t.y1};
  const double ws[4] = {(1.0 - t.fx) * (1.0 - t.fy), t.fx * (1.0 - t.fy), (1.0 - t.fx) * t.fy,
                        t.fx * t.fy};
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (ws[k] == 0.0 || !(support(xs[k], ys[k]) > 0.0f)) continue;
    const Rgb8& c = image(xs[k], ys[k]);
    sum += ws[k] * Eigen::Vector3d(c[0], c[1], c[2]);
    total += ws[k];
  }
  return total > 0.0 ? Eigen::Vector3d(sum / total) : sample_bilinear(image, x, y);
}

std::uint8_t to_u8(double value) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
}

Rgb8 to_rgb8(const Eigen::Vector3d& color) {
  return {to_u8(color[0]), to_u8(color[1]), to_u8(color[2])};
}

RgbImage read_rgb(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw InputError("missing image file: " + path.string());
  }
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot decode image: " + path.string());
  RgbImage image(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      image(x, y) = {row[x][2], row[x][1], row[x][0]};
    }
  }
  return image;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      const Rgb8& c = image(x, y);
      row[x] = cv::Vec3b(c[2], c[1], c[0]);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw InputError("cannot write image: " + path.string());
  }
}

void write_png16(const std::filesystem::path& path, const Raster<std::uint16_t>& image) {
  cv::Mat gray(image.height(), image.width(), CV_16UC1);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = gray.ptr<std::uint16_t>(y);
    for (int x = 0; x < image.width(); ++x) row[x] = image(x, y);
  }
  if (!cv::imwrite(path.string(), gray)) {
    throw InputError("cannot write image: " + path.string());
  }
}

Raster<std::uint16_t> normalize_to_u16(std::span<const double> values, int width, int height) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Raster<std::uint16_t> out(width, height, 0);
  if (!(lo <= hi)) return out;
  const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size() && i < dst.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    dst[i] = static_cast<std::uint16_t>(std::lround((values[i] - lo) * scale));
  }
  return out;
}

}  // namespace texmap
