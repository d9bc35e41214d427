#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "skynav/skyseg.hpp"

using namespace skynav;

namespace {

Histogram make_histogram(const std::array<std::uint64_t, 256>& counts) {
  Histogram h;
  h.counts = counts;
  for (auto c : counts) h.total += c;
  return h;
}

GrayImage random_image(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_int_distribution<int> v(0, 255);
  GrayImage img(rows, cols);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(v(rng));
  return img;
}

SkyMask mask_of(const MaskRaster& bits) {
  SkyMask m;
  m.bits = bits;
  return m;
}

}  // namespace

TEST_CASE("grayscale conversion") {
  RgbImage rgb{GrayImage::Constant(1, 3, 255), GrayImage::Constant(1, 3, 255), GrayImage::Constant(1, 3, 255)};
  rgb.r(0, 1) = rgb.g(0, 1) = rgb.b(0, 1) = 0;
  rgb.r(0, 2) = 100;
  rgb.g(0, 2) = 150;
  rgb.b(0, 2) = 200;
  const GrayImage g = to_grayscale(rgb);
  CHECK(g(0, 0) == 255);
  CHECK(g(0, 1) == 0);
  CHECK(g(0, 2) == 141);

  rgb.b = GrayImage::Zero(2, 3);
  CHECK_THROWS_AS(to_grayscale(rgb), Error);
}

TEST_CASE("mean blur examples") {
  const GrayImage flat = GrayImage::Constant(7, 9, 77);
  CHECK(mean_blur(flat, 5) == flat);

  GrayImage impulse = GrayImage::Zero(7, 7);
  impulse(3, 3) = 255;
  const GrayImage blurred = mean_blur(impulse, 3);
  int nonzero = 0;
  for (Eigen::Index i = 0; i < blurred.size(); ++i) {
    if (blurred.data()[i] != 0) {
      ++nonzero;
      CHECK(blurred.data()[i] == 28);
    }
  }
  CHECK(nonzero == 9);

  std::mt19937_64 rng(1);
  const GrayImage img = random_image(rng, 13, 17);
  CHECK(mean_blur(img, 1) == img);
}

TEST_CASE("mean blur rejects even kernels") {
  try {
    mean_blur(GrayImage::Zero(4, 4), 4);
    FAIL("expected EvenKernel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EvenKernel);
  }
}

TEST_CASE("mean blur matches direct summation") {
  std::mt19937_64 rng(2);
  for (int kernel : {3, 5, 7, 31}) {
    const GrayImage img = random_image(rng, 23, 41);
    CHECK(mean_blur(img, kernel) == oracle::mean_blur(img, kernel));
  }
}

TEST_CASE("Otsu on a half black, half white image ties everywhere") {
  GrayImage img = GrayImage::Zero(10, 10);
  img.rightCols(5).setConstant(255);
  const OtsuResult r = otsu(histogram(img));
  CHECK(r.threshold == 1);
  CHECK_FALSE(r.degenerate);
  CHECK(oracle::otsu_threshold(histogram(img).counts) == 1);
}

TEST_CASE("Otsu on a constant image is degenerate") {
  const OtsuResult r = otsu(histogram(GrayImage::Constant(8, 8, 120)));
  CHECK(r.degenerate);
  CHECK(r.threshold == 0);
  CHECK_THROWS_AS(otsu(Histogram{}), Error);
}

TEST_CASE("Otsu equals the exact brute-force sweep on random histograms") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto counts = oracle::random_histogram(rng);
    CHECK(otsu(make_histogram(counts)).threshold == oracle::otsu_threshold(counts));
  }
}

TEST_CASE("Otsu class identities hold for every split") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    const Histogram h = make_histogram(oracle::random_histogram(rng));
    for (int t = 1; t < 256; ++t) {
      const OtsuClassStats s = otsu_class_stats(h, t);
      CHECK(std::abs(s.omega0 + s.omega1 - 1.0) < 1e-12);
      if (s.omega0 == 0 || s.omega1 == 0) continue;
      CHECK(std::abs(s.omega0 * s.mu0 + s.omega1 * s.mu1 - s.mu_total) < 1e-9);
      CHECK(std::abs(s.within_class_variance + s.between_class_variance - s.total_variance) < 1e-6);
    }
  }
  CHECK_THROWS_AS(otsu_class_stats(make_histogram(oracle::random_histogram(rng)), 0), Error);
}

TEST_CASE("Otsu is invariant to scaling the histogram") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    auto counts = oracle::random_histogram(rng);
    const int t = otsu(make_histogram(counts)).threshold;
    for (auto& c : counts) c *= 7;
    CHECK(otsu(make_histogram(counts)).threshold == t);
  }
}

TEST_CASE("apply_threshold examples") {
  std::mt19937_64 rng(6);
  const GrayImage img = random_image(rng, 10, 10);
  CHECK(apply_threshold(img, 0).bits.all());
  GrayImage capped = img.cwiseMin(std::uint8_t{254});
  CHECK_FALSE(apply_threshold(capped, 255).bits.any());

  GrayImage board(8, 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) board(r, c) = ((r + c) % 2) ? 255 : 0;
  }
  const SkyMask m = apply_threshold(board, 1);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) CHECK(m.bits(r, c) == (board(r, c) == 255));
  }
  CHECK_THROWS_AS(apply_threshold(img, 256), Error);
  CHECK_THROWS_AS(apply_threshold(img, -1), Error);
}

TEST_CASE("Otsu mask separates intensities at the threshold") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const GrayImage img = random_image(rng, 40, 40);
    const int t = otsu(histogram(img)).threshold;
    const SkyMask m = apply_threshold(img, t);
    int min_sky = 256, max_ground = -1;
    for (Eigen::Index k = 0; k < img.size(); ++k) {
      if (m.bits.data()[k]) min_sky = std::min<int>(min_sky, img.data()[k]);
      else max_ground = std::max<int>(max_ground, img.data()[k]);
    }
    CHECK(min_sky > max_ground);
    CHECK(min_sky >= t);
  }
}

TEST_CASE("local threshold examples") {
  const GrayImage flat = GrayImage::Constant(9, 9, 100);
  CHECK(local_threshold(flat, 3, 1).bits.all());
  CHECK_FALSE(local_threshold(flat, 3, -1).bits.any());

  GrayImage gradient(12, 15);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 15; ++c) gradient(r, c) = static_cast<std::uint8_t>(10 * c + 3 * r);
  }
  CHECK(local_threshold(gradient, 3, 0).bits == oracle::local_threshold(gradient, 3, 0));
  std::mt19937_64 rng(8);
  const GrayImage img = random_image(rng, 30, 30);
  CHECK(local_threshold(img, 7, 4).bits == oracle::local_threshold(img, 7, 4));
  CHECK_THROWS_AS(local_threshold(img, 4, 0), Error);
  CHECK_THROWS_AS(local_threshold(img, 1, 0), Error);
}

TEST_CASE("IoU examples") {
  MaskRaster a = MaskRaster::Constant(10, 10, false);
  a.leftCols(5).setConstant(true);
  CHECK(iou(mask_of(a), mask_of(a)) == 1.0);
  CHECK(iou(mask_of(a), mask_of(a.unaryExpr([](bool b) { return !b; }))) == 0.0);

  // Left ten columns against columns 5-14: 50 shared cells, 150 in the union.
  MaskRaster left = MaskRaster::Constant(10, 20, false);
  left.leftCols(10).setConstant(true);
  MaskRaster shifted = MaskRaster::Constant(10, 20, false);
  shifted.middleCols(5, 10).setConstant(true);
  CHECK(iou(mask_of(left), mask_of(shifted)) == doctest::Approx(1.0 / 3.0));

  CHECK(iou(mask_of(MaskRaster::Constant(3, 3, false)), mask_of(MaskRaster::Constant(3, 3, false))) == 1.0);
  CHECK_THROWS_AS(iou(mask_of(MaskRaster::Constant(3, 3, false)), mask_of(MaskRaster::Constant(3, 4, false))), Error);
}

TEST_CASE("mask boundary marks both sides of an edge") {
  MaskRaster a = MaskRaster::Constant(4, 6, false);
  a.rightCols(3).setConstant(true);
  const MaskRaster edge = mask_boundary(mask_of(a));
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 6; ++c) CHECK(edge(r, c) == (c == 2 || c == 3));
  }
}

TEST_CASE("segment_sky on a bimodal image") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0, 10);
  GrayImage img(64, 64);
  MaskRaster truth(64, 64);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      truth(r, c) = r < 40;
      img(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround((truth(r, c) ? 200 : 60) + noise(rng)), 0L, 255L));
    }
  }
  OtsuResult result;
  const SkyMask mask = segment_sky(img, SegmentationConfig{}, &result);
  CHECK(mask.threshold > 60);
  CHECK(mask.threshold < 200);
  CHECK_FALSE(mask.degenerate);
  CHECK(iou(mask, mask_of(truth)) >= 0.99);

  SegmentationConfig local;
  local.method = SegmentationConfig::Method::Local;
  CHECK(segment_sky(img, local).bits.rows() == 64);
  CHECK(segment_sky(GrayImage::Constant(16, 16, 90), SegmentationConfig{}).degenerate);
}
