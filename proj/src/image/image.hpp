#pragma once

#include <string>
#include <vector>

#include "tensor/tensor.hpp"

namespace sf {

/// H x W single-channel float map (transmission, depth, dark channel).
struct FloatMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatMap() = default;
  FloatMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const FloatMap&) const = default;
};

/// H x W x 3 float image, row-major, interleaved RGB, values in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool operator==(const ImageBuffer&) const = default;

  /// [3,H,W] planar tensor.
  Tensor<float> to_tensor() const;
  static ImageBuffer from_tensor(const Tensor<float>& t);

  ImageBuffer crop(int y0, int x0, int h, int w) const;
  ImageBuffer flipped_horizontal() const;
  ImageBuffer flipped_vertical() const;
  void clamp01();

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Loads 8-bit PNG (any color type, converted to RGB) or binary PPM (P6).
/// 8-bit samples are divided by 255 exactly.
ImageBuffer load_image(const std::string& path);
/// Writes 8-bit RGB PNG; values are clamped and rounded to nearest.
void save_png(const ImageBuffer& image, const std::string& path);
void save_ppm(const ImageBuffer& image, const std::string& path);

/// Grayscale map from PGM (P5, 8 or 16 bit) or PNG (luma), scaled to [0, 1].
FloatMap load_gray(const std::string& path);
/// 16-bit binary PGM, big-endian samples, value = round(clamp(v,0,1) * 65535).
void save_pgm16(const FloatMap& map, const std::string& path);

std::uint8_t quantize8(float v);

}  // namespace sf
