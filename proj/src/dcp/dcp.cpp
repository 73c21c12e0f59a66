#include "dcp/dcp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace sf {

void DcpConfig::validate() const {
  require(patch >= 1 && patch % 2 == 1, ErrorCode::kInvalidArgument,
          "dcp patch must be odd and >= 1, got " + std::to_string(patch));
  require(omega > 0.0 && omega <= 1.0, ErrorCode::kInvalidArgument, "dcp omega must be in (0,1]");
  require(t0 > 0.0 && t0 < 1.0, ErrorCode::kInvalidArgument, "dcp t0 must be in (0,1)");
  require(airlight_percent > 0.0 && airlight_percent <= 1.0, ErrorCode::kInvalidArgument,
          "dcp airlight_percent must be in (0,1]");
}

static FloatMap min_filter(const FloatMap& in, int patch) {
  const int r = patch / 2, w = in.width, h = in.height;
  FloatMap tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float m = in.at(y, x);
      for (int u = std::max(0, x - r); u <= std::min(w - 1, x + r); ++u) m = std::min(m, in.at(y, u));
      tmp.at(y, x) = m;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float m = tmp.at(y, x);
      for (int v = std::max(0, y - r); v <= std::min(h - 1, y + r); ++v) m = std::min(m, tmp.at(v, x));
      out.at(y, x) = m;
    }
  return out;
}

FloatMap dark_channel(const ImageBuffer& image, int patch) {
  require(patch >= 1 && patch % 2 == 1, ErrorCode::kInvalidArgument,
          "dark channel patch must be odd and >= 1, got " + std::to_string(patch));
  FloatMap m(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      m.at(y, x) = std::min({image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)});
  return min_filter(m, patch);
}

std::array<float, 3> estimate_airlight(const ImageBuffer& image, const FloatMap& dark,
                                       double percent) {
  require(percent > 0.0 && percent <= 1.0, ErrorCode::kInvalidArgument,
          "airlight percent must be in (0,1]");
  require(dark.width == image.width() && dark.height == image.height(),
          ErrorCode::kInvalidArgument, "dark channel and image sizes differ");
  const std::size_t n = image.pixel_count();
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(percent * static_cast<double>(n) - 1e-9)), 1, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + count, idx.end(), [&](std::size_t a, std::size_t b) {
    if (dark.data[a] != dark.data[b]) return dark.data[a] > dark.data[b];
    return a < b;
  });
  const auto& d = image.data();
  std::size_t best = idx[0];
  double best_sum = -1.0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t p = idx[k];
    const double s = static_cast<double>(d[p * 3]) + d[p * 3 + 1] + d[p * 3 + 2];
    if (s > best_sum || (s == best_sum && p < best)) {
      best_sum = s;
      best = p;
    }
  }
  return {d[best * 3], d[best * 3 + 1], d[best * 3 + 2]};
}

DcpResult dehaze_dcp_detailed(const ImageBuffer& image, const DcpConfig& cfg) {
  cfg.validate();
  DcpResult r;
  r.airlight = estimate_airlight(image, dark_channel(image, cfg.patch), cfg.airlight_percent);
  ImageBuffer norm(image.width(), image.height());
  for (std::size_t i = 0; i < norm.data().size(); ++i)
    norm.data()[i] = image.data()[i] / std::max(r.airlight[i % 3], 1e-6f);
  const FloatMap dn = dark_channel(norm, cfg.patch);
  r.transmission = FloatMap(image.width(), image.height());
  r.restored = ImageBuffer(image.width(), image.height());
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const double t = std::max(1.0 - cfg.omega * dn.data[p], cfg.t0);
    r.transmission.data[p] = static_cast<float>(t);
    for (int c = 0; c < 3; ++c) {
      const double a = r.airlight[c];
      const double j = (image.data()[p * 3 + c] - a) / t + a;
      r.restored.data()[p * 3 + c] = static_cast<float>(std::clamp(j, 0.0, 1.0));
    }
  }
  return r;
}

ImageBuffer dehaze_dcp(const ImageBuffer& image, const DcpConfig& cfg) {
  return dehaze_dcp_detailed(image, cfg).restored;
}

}  // namespace sf
