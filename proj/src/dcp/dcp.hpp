#pragma once

#include <array>

#include "image/image.hpp"

namespace sf {

struct DcpConfig {
  int patch = 15;
  double omega = 0.95;
  double t0 = 0.1;
  double airlight_percent = 0.001;

  void validate() const;
};

/// Min over RGB, then min over a patch x patch window clamped to the image.
FloatMap dark_channel(const ImageBuffer& image, int patch);

/// Among the ceil(percent*H*W) brightest dark-channel pixels, the pixel with the
/// largest R+G+B; ties go to the lowest row-major index.
std::array<float, 3> estimate_airlight(const ImageBuffer& image, const FloatMap& dark,
                                       double percent);

struct DcpResult {
  ImageBuffer restored;
  FloatMap transmission;
  std::array<float, 3> airlight{};
};

DcpResult dehaze_dcp_detailed(const ImageBuffer& image, const DcpConfig& cfg);
ImageBuffer dehaze_dcp(const ImageBuffer& image, const DcpConfig& cfg);

}  // namespace sf
