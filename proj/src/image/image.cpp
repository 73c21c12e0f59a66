#include "image/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace sf {

ImageBuffer::ImageBuffer(int width, int height, float fill)
    : width_(width), height_(height) {
  require(width > 0 && height > 0, ErrorCode::kInvalidArgument, "image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height * 3, fill);
}

Tensor<float> ImageBuffer::to_tensor() const {
  Tensor<float> t(Shape{3, height_, width_});
  const std::size_t P = pixel_count();
  for (std::size_t p = 0; p < P; ++p)
    for (int c = 0; c < 3; ++c) t[c * P + p] = data_[p * 3 + c];
  return t;
}

ImageBuffer ImageBuffer::from_tensor(const Tensor<float>& t) {
  require(t.rank() == 3 && t.dim(0) == 3, ErrorCode::kInvalidArgument,
          "expected a [3,H,W] tensor, got " + shape_str(t.shape()));
  ImageBuffer img(t.dim(2), t.dim(1));
  const std::size_t P = img.pixel_count();
  for (std::size_t p = 0; p < P; ++p)
    for (int c = 0; c < 3; ++c) img.data_[p * 3 + c] = t[c * P + p];
  return img;
}

ImageBuffer ImageBuffer::crop(int y0, int x0, int h, int w) const {
  require(y0 >= 0 && x0 >= 0 && h > 0 && w > 0 && y0 + h <= height_ && x0 + w <= width_,
          ErrorCode::kInvalidArgument, "crop window outside image");
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(&data_[(static_cast<std::size_t>(y0 + y) * width_ + x0) * 3], w * 3,
                &out.data_[static_cast<std::size_t>(y) * w * 3]);
  return out;
}

ImageBuffer ImageBuffer::flipped_horizontal() const {
  ImageBuffer out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, width_ - 1 - x, c) = at(y, x, c);
  return out;
}

ImageBuffer ImageBuffer::flipped_vertical() const {
  ImageBuffer out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < 3; ++c) out.at(height_ - 1 - y, x, c) = at(y, x, c);
  return out;
}

void ImageBuffer::clamp01() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

std::uint8_t quantize8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  require(f != nullptr, ErrorCode::kIo, "cannot open " + path);
  return f;
}

std::vector<std::uint8_t> read_png_rgb8(const std::string& path, int& w, int& h, bool gray) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::kIo, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kFormat, "corrupt PNG: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if ((color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (gray) {
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  } else if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * h);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

bool has_png_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// Reads a netpbm header: magic, width, height, maxval, then one whitespace byte.
void read_pnm_header(std::istream& in, const std::string& path, std::string& magic, int& w,
                     int& h, int& maxval) {
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  magic = next_token();
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    fail(ErrorCode::kFormat, "malformed netpbm header: " + path);
  }
  require(w > 0 && h > 0 && maxval > 0 && maxval < 65536, ErrorCode::kFormat,
          "invalid netpbm header: " + path);
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
  if (has_png_magic(path)) {
    int w = 0, h = 0;
    auto px = read_png_rgb8(path, w, h, false);
    ImageBuffer img(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) img.data()[i] = static_cast<float>(px[i]) / 255.0f;
    return img;
  }
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxval;
  read_pnm_header(in, path, magic, w, h, maxval);
  require(magic == "P6", ErrorCode::kFormat, "unsupported image format (need PNG or P6 PPM): " + path);
  ImageBuffer img(w, h);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(img.pixel_count() * 3 * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorCode::kFormat,
          "truncated PPM: " + path);
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    const unsigned v = bytes == 2 ? (raw[2 * i] << 8 | raw[2 * i + 1]) : raw[i];
    img.data()[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return img;
}

void save_png(const ImageBuffer& image, const std::string& path) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::kIo, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> px(image.data().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize8(image.data()[i]);
  std::vector<png_bytep> rows(image.height());
  for (int y = 0; y < image.height(); ++y) rows[y] = px.data() + static_cast<std::size_t>(y) * image.width() * 3;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "failed writing PNG: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_ppm(const ImageBuffer& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<char> px(image.data().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<char>(quantize8(image.data()[i]));
  out.write(px.data(), static_cast<std::streamsize>(px.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing " + path);
}

FloatMap load_gray(const std::string& path) {
  if (has_png_magic(path)) {
    int w = 0, h = 0;
    auto px = read_png_rgb8(path, w, h, true);
    FloatMap m(w, h);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<float>(px[i]) / 255.0f;
    return m;
  }
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxval;
  read_pnm_header(in, path, magic, w, h, maxval);
  require(magic == "P5", ErrorCode::kFormat, "expected P5 PGM or PNG: " + path);
  FloatMap m(w, h);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(m.data.size() * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorCode::kFormat,
          "truncated PGM: " + path);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const unsigned v = bytes == 2 ? (raw[2 * i] << 8 | raw[2 * i + 1]) : raw[i];
    m.data[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return m;
}

void save_pgm16(const FloatMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  out << "P5\n" << map.width << " " << map.height << "\n65535\n";
  std::vector<char> raw(map.data.size() * 2);
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(
        std::lround(static_cast<double>(std::clamp(map.data[i], 0.0f, 1.0f)) * 65535.0));
    raw[2 * i] = static_cast<char>(v >> 8);
    raw[2 * i + 1] = static_cast<char>(v & 0xff);
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing " + path);
}

}  // namespace sf
