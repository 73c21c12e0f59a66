#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "image/image.hpp"

namespace sf {

/// 10 log10(peak^2 / MSE) over all pixels and channels. Returns +inf when MSE is 0.
double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

/// Single-scale SSIM on Rec.601 luma, 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, peak 1, averaged over fully interior windows.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

inline constexpr int kSsimWindow = 11;
inline constexpr const char* kSsimConvention = "luma-rec601 gauss11 sigma=1.5 K1=0.01 K2=0.03 valid";

struct MetricRow {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  void add(std::string id, const ImageBuffer& restored, const ImageBuffer& reference);
  double mean_psnr() const;
  double mean_ssim() const;
  /// "# ssim=..." metadata line, header, one row per image, then a "mean" row.
  void write_tsv(std::ostream& out) const;
  void save(const std::string& path) const;
};

}  // namespace sf
