#include "skynav/skyseg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace skynav {
namespace {

using SumRaster = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_odd(int kernel, int minimum) {
  if (kernel < minimum || kernel % 2 == 0) {
    throw Error(ErrorCode::EvenKernel, "kernel size " + std::to_string(kernel) + " must be odd and >= " +
                                           std::to_string(minimum));
  }
}

// Sum over a kernel x kernel window centered on each pixel, edges replicated.
SumRaster box_sum(const GrayImage& img, int kernel) {
  const Eigen::Index rows = img.rows(), cols = img.cols();
  const int half = kernel / 2;
  auto clamp_index = [](Eigen::Index i, Eigen::Index n) { return std::clamp<Eigen::Index>(i, 0, n - 1); };

  SumRaster horizontal(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    std::int64_t acc = 0;
    for (Eigen::Index d = -half; d <= half; ++d) acc += img(i, clamp_index(d, cols));
    horizontal(i, 0) = acc;
    for (Eigen::Index j = 1; j < cols; ++j) {
      acc += img(i, clamp_index(j + half, cols));
      acc -= img(i, clamp_index(j - half - 1, cols));
      horizontal(i, j) = acc;
    }
  }

  // Vertical pass as whole-row updates so memory is walked in order.
  SumRaster out(rows, cols);
  Eigen::Matrix<std::int64_t, 1, Eigen::Dynamic> acc = Eigen::Matrix<std::int64_t, 1, Eigen::Dynamic>::Zero(cols);
  for (Eigen::Index d = -half; d <= half; ++d) acc += horizontal.row(clamp_index(d, rows));
  out.row(0) = acc;
  for (Eigen::Index i = 1; i < rows; ++i) {
    acc += horizontal.row(clamp_index(i + half, rows));
    acc -= horizontal.row(clamp_index(i - half - 1, rows));
    out.row(i) = acc;
  }
  return out;
}

}  // namespace

GrayImage to_grayscale(const RgbImage& rgb) {
  if (rgb.r.rows() != rgb.g.rows() || rgb.r.rows() != rgb.b.rows() || rgb.r.cols() != rgb.g.cols() ||
      rgb.r.cols() != rgb.b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "color planes differ in size");
  }
  GrayImage out(rgb.r.rows(), rgb.r.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double y = 0.299 * rgb.r.data()[i] + 0.587 * rgb.g.data()[i] + 0.114 * rgb.b.data()[i];
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return out;
}

GrayImage mean_blur(const GrayImage& img, int kernel) {
  require_odd(kernel, 1);
  if (kernel == 1 || img.size() == 0) return img;
  const SumRaster sums = box_sum(img, kernel);
  const std::int64_t area = static_cast<std::int64_t>(kernel) * kernel;
  GrayImage out(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] = static_cast<std::uint8_t>((sums.data()[i] + area / 2) / area);
  }
  return out;
}

Histogram histogram(const GrayImage& img) {
  Histogram h;
  for (Eigen::Index i = 0; i < img.size(); ++i) ++h.counts[img.data()[i]];
  h.total = static_cast<std::uint64_t>(img.size());
  return h;
}

OtsuClassStats otsu_class_stats(const Histogram& h, int t) {
  if (h.total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no pixels");
  if (t < 1 || t > kIntensityLevels - 1) throw Error(ErrorCode::InvalidArgument, "threshold outside [1, 255]");
  OtsuClassStats s;
  for (int i = 0; i < kIntensityLevels; ++i) {
    const double p = h.probability(i);
    s.mu_total += i * p;
    if (i < t) {
      s.omega0 += p;
      s.mu0 += i * p;
    } else {
      s.omega1 += p;
      s.mu1 += i * p;
    }
  }
  if (s.omega0 > 0) s.mu0 /= s.omega0;
  if (s.omega1 > 0) s.mu1 /= s.omega1;
  for (int i = 0; i < kIntensityLevels; ++i) {
    const double p = h.probability(i);
    s.total_variance += (i - s.mu_total) * (i - s.mu_total) * p;
    if (i < t) {
      s.var0 += (i - s.mu0) * (i - s.mu0) * p;
    } else {
      s.var1 += (i - s.mu1) * (i - s.mu1) * p;
    }
  }
  if (s.omega0 > 0) s.var0 /= s.omega0;
  if (s.omega1 > 0) s.var1 /= s.omega1;
  s.within_class_variance = s.omega0 * s.var0 + s.omega1 * s.var1;
  s.between_class_variance = s.omega0 * s.omega1 * (s.mu0 - s.mu1) * (s.mu0 - s.mu1);
  return s;
}

namespace {

// a * b as a 192-bit value split into (high 128 bits, low 64 bits).
std::pair<unsigned __int128, std::uint64_t> widening_mul(unsigned __int128 a, std::uint64_t b) {
  const unsigned __int128 low = static_cast<unsigned __int128>(static_cast<std::uint64_t>(a)) * b;
  const unsigned __int128 high = static_cast<unsigned __int128>(static_cast<std::uint64_t>(a >> 64)) * b;
  return {high + (low >> 64), static_cast<std::uint64_t>(low)};
}

}  // namespace

OtsuResult otsu(const Histogram& h) {
  if (h.total == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no pixels");
  // With N pixels, S the total first moment and (w0, s0) the count and
  // moment below t, N^3 sigma_b^2 = (N s0 - S w0)^2 / (w0 w1). Candidates
  // are compared on that integer ratio, so ties are exact.
  std::uint64_t moment_total = 0;
  for (int i = 0; i < kIntensityLevels; ++i) moment_total += static_cast<std::uint64_t>(i) * h.counts[i];
  const auto n = static_cast<__int128>(h.total);
  const auto s = static_cast<__int128>(moment_total);

  OtsuResult best{0, 0.0, true};
  unsigned __int128 best_num = 0;
  std::uint64_t best_den = 1;
  std::uint64_t count0 = 0, moment0 = 0;
  for (int t = 1; t < kIntensityLevels; ++t) {
    count0 += h.counts[t - 1];
    moment0 += static_cast<std::uint64_t>(t - 1) * h.counts[t - 1];
    const std::uint64_t count1 = h.total - count0;
    if (count0 == 0 || count1 == 0) continue;
    const __int128 d = n * static_cast<__int128>(moment0) - s * static_cast<__int128>(count0);
    const auto magnitude = static_cast<unsigned __int128>(d < 0 ? -d : d);
    const unsigned __int128 num = magnitude * magnitude;
    const std::uint64_t den = count0 * count1;
    if (!best.degenerate && widening_mul(num, best_den) <= widening_mul(best_num, den)) continue;
    best_num = num;
    best_den = den;
    const double omega0 = static_cast<double>(count0) / static_cast<double>(h.total);
    const double omega1 = static_cast<double>(count1) / static_cast<double>(h.total);
    const double mu0 = static_cast<double>(moment0) / static_cast<double>(count0);
    const double mu1 = static_cast<double>(moment_total - moment0) / static_cast<double>(count1);
    best = OtsuResult{t, omega0 * omega1 * (mu0 - mu1) * (mu0 - mu1), false};
  }
  return best;
}

SkyMask apply_threshold(const GrayImage& img, int t) {
  if (t < 0 || t > 255) throw Error(ErrorCode::InvalidArgument, "threshold outside [0, 255]");
  SkyMask mask;
  mask.bits = (img.array().cast<int>() >= t).matrix();
  mask.threshold = t;
  return mask;
}

SkyMask local_threshold(const GrayImage& img, int window, int offset) {
  require_odd(window, 3);
  SkyMask mask;
  mask.bits.resize(img.rows(), img.cols());
  if (img.size() == 0) return mask;
  const SumRaster sums = box_sum(img, window);
  const std::int64_t area = static_cast<std::int64_t>(window) * window;
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    mask.bits.data()[i] = static_cast<std::int64_t>(img.data()[i]) * area >= sums.data()[i] - offset * area;
  }
  return mask;
}

double iou(const SkyMask& a, const SkyMask& b) {
  if (a.bits.rows() != b.bits.rows() || a.bits.cols() != b.bits.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mask sizes differ");
  }
  const auto intersection = (a.bits.array() && b.bits.array()).count();
  const auto uni = (a.bits.array() || b.bits.array()).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(uni);
}

MaskRaster mask_boundary(const SkyMask& mask) {
  const Eigen::Index rows = mask.bits.rows(), cols = mask.bits.cols();
  MaskRaster edge = MaskRaster::Constant(rows, cols, false);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const bool v = mask.bits(i, j);
      edge(i, j) = (i > 0 && mask.bits(i - 1, j) != v) || (i + 1 < rows && mask.bits(i + 1, j) != v) ||
                   (j > 0 && mask.bits(i, j - 1) != v) || (j + 1 < cols && mask.bits(i, j + 1) != v);
    }
  }
  return edge;
}

SkyMask segment_sky(const GrayImage& img, const SegmentationConfig& config, OtsuResult* otsu_out) {
  const GrayImage blurred = mean_blur(img, config.blur_kernel);
  if (config.method == SegmentationConfig::Method::Local) {
    return local_threshold(blurred, config.local_window, config.local_offset);
  }
  const OtsuResult result = otsu(histogram(blurred));
  if (otsu_out != nullptr) *otsu_out = result;
  SkyMask mask = apply_threshold(blurred, result.threshold);
  mask.degenerate = result.degenerate;
  return mask;
}

}  // namespace skynav
