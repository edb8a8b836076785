#pragma once

// In-memory RGB images (double, [0,1], row-major) plus file formats:
// 8-bit PNG (RGB / grayscale, zlib-backed, deterministic bytes), binary PPM,
// and the float32 depth-map container:
//   magic "DPTH" | width u32 | height u32 | sentinel f32 | h*w f32, row-major,
// all little-endian. The sentinel marks pixels without a surface.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "morphnerf/errors.hpp"

namespace mnrf {

struct Image {
  int width = 0, height = 0;
  std::vector<double> data;  // (y * width + x) * 3 + channel

  Image() = default;
  Image(int width_in, int height_in, double fill = 0.0)
      : width(width_in), height(height_in),
        data(static_cast<std::size_t>(width_in) * height_in * 3, fill) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Bilinear lookup at a continuous position; pixel centers sit at (i + 0.5).
/// Coordinates are clamped to the image border.
Eigen::Vector3d sample_bilinear(const Image& image, double x, double y);

void save_png(const std::string& path, const Image& image);
/// values: h x w in [0,1], written as 8-bit grayscale.
void save_png_gray(const std::string& path, const Eigen::MatrixXd& values);
Image load_png(const std::string& path);

void save_ppm(const std::string& path, const Image& image);
Image load_ppm(const std::string& path);

struct DepthMap {
  int width = 0, height = 0;
  float sentinel = -1.0f;
  Eigen::MatrixXd values;  // height x width; sentinel where no surface

  bool has_surface(int x, int y) const {
    return values(y, x) != static_cast<double>(sentinel);
  }
};

void save_depth(const std::string& path, const DepthMap& depth);
DepthMap load_depth(const std::string& path);

/// PSNR of a against b over the full image, range 1.0, capped at 99 dB.
double psnr(const Image& a, const Image& b);

}  // namespace mnrf
