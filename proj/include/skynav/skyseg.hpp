#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

#include "skynav/error.hpp"

namespace skynav {

/// Row-major 8-bit raster: rows = height, cols = width; I(i, j) = img(i, j).
using GrayImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskRaster = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RgbImage {
  GrayImage r, g, b;
};

/// Binary sky/non-sky raster (true = sky, written as 255) with the threshold
/// that produced it.
struct SkyMask {
  MaskRaster bits;
  int threshold{0};
  bool degenerate{false};

  int width() const { return static_cast<int>(bits.cols()); }
  int height() const { return static_cast<int>(bits.rows()); }
};

inline constexpr int kIntensityLevels = 256;

struct Histogram {
  std::array<std::uint64_t, kIntensityLevels> counts{};
  std::uint64_t total{0};

  double probability(int level) const { return static_cast<double>(counts[level]) / static_cast<double>(total); }
};

/// Class statistics for a single split at t: C0 = {i < t}, C1 = {i >= t}.
struct OtsuClassStats {
  double omega0{0}, omega1{0};
  double mu0{0}, mu1{0}, mu_total{0};
  double var0{0}, var1{0};
  double within_class_variance{0};
  double between_class_variance{0};
  double total_variance{0};
};

struct OtsuResult {
  int threshold{0};
  double between_class_variance{0};
  bool degenerate{false};
};

GrayImage to_grayscale(const RgbImage& rgb);

/// Box filter with border replication. `kernel` must be odd.
GrayImage mean_blur(const GrayImage& img, int kernel);

Histogram histogram(const GrayImage& img);

/// Full statistics of the split at `t` in [1, 255]. Means and variances of an
/// empty class are reported as 0.
OtsuClassStats otsu_class_stats(const Histogram& h, int t);

/// Global threshold maximizing the between-class variance; ties go to the
/// smallest t. Splits leaving a class empty are skipped, and a histogram where
/// every split is skipped comes back degenerate with threshold 0.
OtsuResult otsu(const Histogram& h);

/// Sky iff I(i, j) >= t. Otsu's split puts level t in the upper class, so the
/// mask uses the same convention.
SkyMask apply_threshold(const GrayImage& img, int t);

/// Sky iff pixel >= (border-replicated window mean) - offset.
SkyMask local_threshold(const GrayImage& img, int window, int offset);

/// |a & b| / |a | b| over sky bits; 1 when both are empty.
double iou(const SkyMask& a, const SkyMask& b);

/// Pixels with a 4-neighbor of the opposite class.
MaskRaster mask_boundary(const SkyMask& mask);

struct SegmentationConfig {
  int blur_kernel{5};
  enum class Method { Otsu, Local } method{Method::Otsu};
  int local_window{31};
  int local_offset{5};
};

/// grayscale -> mean blur -> threshold (Otsu or local).
SkyMask segment_sky(const GrayImage& img, const SegmentationConfig& config, OtsuResult* otsu_out = nullptr);

}  // namespace skynav
