#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pvio/geometry.hpp"

namespace pvio {

/// Row-major grayscale image with intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  static GrayImage Constant(int width, int height, double value);

  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return data.size(); }
};

/// Per-pixel weight map. Binary for validity masks, positive reals for
/// Laplacian scale maps, [0,1] for explainability maps.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  static PixelMask Constant(int width, int height, double value);

  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

/// Warp src by h: output pixel x samples src at transfer_point(h, x) with
/// bilinear interpolation. The mask is 1 where all four sample neighbors lie
/// inside src.
std::pair<GrayImage, PixelMask> warp_image(const GrayImage& src, const Homography& h);

/// Local SSIM with a 3x3 box filter, C1 = 0.01^2, C2 = 0.03^2, clamped to
/// [-1, 1].
std::vector<double> ssim_map(const GrayImage& a, const GrayImage& b);

struct PhotometricLoss {
  double mean = 0.0;
  std::vector<double> map;
};

/// Per-pixel alpha/2 (1 - SSIM) + (1 - alpha) |a - b|, averaged over the
/// valid mask.
PhotometricLoss photometric_loss(const GrayImage& ip, const GrayImage& ic_warped,
                                 const PixelMask& valid, double alpha);

/// Mean over V of E_k-weighted loss plus lambda_reg times the mean
/// target-1 binary cross-entropy of E_k.
double explainability_loss(const std::vector<double>& loss_map, const PixelMask& e,
                           const PixelMask& valid, double lambda_reg);

/// Mean over V of L_k / b_k + log b_k.
double laplacian_nll_loss(const std::vector<double>& loss_map, const PixelMask& b,
                          const PixelMask& valid);

/// Laplacian scale to variance: sigma^2 = 2 b^2.
inline double laplacian_variance(double b) { return 2.0 * b * b; }

// PGM (P5, 8-bit) interchange for test images.
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

/// Loss/weight grid as CSV rows (one row per image row).
void write_csv_grid(const std::vector<double>& map, int width, int height,
                    const std::string& path);

}  // namespace pvio
