#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "skynav/frames.hpp"

using namespace skynav;

namespace {

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

FrameChaind random_chain(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-100, 100), yaw(-oracle::kPi, oracle::kPi);
  FrameChaind c;
  c.yaw_offset = yaw(rng);
  c.anchor_world = Eigen::Vector3d(u(rng), u(rng), u(rng));
  c.r_sky_to_body = random_rotation(rng);
  c.body_pose.r_body_to_world = random_rotation(rng);
  c.body_pose.t_body_in_world = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return c;
}

}  // namespace

TEST_CASE("zero yaw and zero anchor give the identity map") {
  const FrameChaind chain;
  const Eigen::Vector3d p(3, -4, 5);
  CHECK((enu_to_world(chain, EnuCoordd(p)) - p).norm() == 0.0);
}

TEST_CASE("quarter-turn yaw maps east to minus y") {
  FrameChaind chain;
  chain.yaw_offset = oracle::kPi / 2;
  chain.anchor_world = Eigen::Vector3d(10, 20, 30);
  const Eigen::Vector3d w = enu_to_world(chain, EnuCoordd(1, 0, 0));
  CHECK((w - Eigen::Vector3d(10, 19, 30)).norm() < 1e-12);
  CHECK((world_to_enu(chain, w).enu - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("yaw leaves the up component unchanged") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3), yaw(-10, 10);
  for (int i = 0; i < 200; ++i) {
    FrameChaind chain;
    chain.yaw_offset = yaw(rng);
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    CHECK(std::abs(enu_to_world(chain, EnuCoordd(p)).z() - p.z()) < 1e-12);
  }
}

TEST_CASE("enu_to_world and world_to_enu invert each other") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int i = 0; i < 500; ++i) {
    const FrameChaind chain = random_chain(rng);
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    CHECK((world_to_enu(chain, enu_to_world(chain, EnuCoordd(p))).enu - p).norm() < 1e-9);
  }
}

TEST_CASE("satellite_to_sky_camera with identity chain") {
  const FrameChaind chain;
  const Eigen::Vector3d p(0, 0, 2e7);
  CHECK((satellite_to_sky_camera(chain, p) - p).norm() == 0.0);
}

TEST_CASE("satellite_to_sky_camera matches the frozen matrix chain") {
  FrameChaind chain;
  chain.yaw_offset = 30 * oracle::kDeg;
  chain.anchor_world = Eigen::Vector3d(1, 2, 3);
  chain.r_sky_to_body = Eigen::AngleAxisd(5 * oracle::kDeg, Eigen::Vector3d::UnitX()).toRotationMatrix();
  chain.body_pose.r_body_to_world = (Eigen::AngleAxisd(40 * oracle::kDeg, Eigen::Vector3d::UnitZ()) *
                                     Eigen::AngleAxisd(-10 * oracle::kDeg, Eigen::Vector3d::UnitY()))
                                        .toRotationMatrix();
  chain.body_pose.t_body_in_world = Eigen::Vector3d(4, -5, 6);
  const Eigen::Vector3d sat_enu = Eigen::Vector3d(0.3, 0.4, 0.866).normalized() * 2e7;
  const Eigen::Vector3d sky = satellite_to_sky_camera(chain, enu_to_world(chain, EnuCoordd(sat_enu)));
  CHECK(std::abs(sky.x() - oracle::frozen::kSkyX) < 1e-5);
  CHECK(std::abs(sky.y() - oracle::frozen::kSkyY) < 1e-5);
  CHECK(std::abs(sky.z() - oracle::frozen::kSkyZ) < 1e-5);
}

TEST_CASE("satellite_to_sky_camera preserves distances") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.6e7, 2.6e7);
  for (int i = 0; i < 200; ++i) {
    const FrameChaind chain = random_chain(rng);
    const Eigen::Vector3d a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    const double d = (satellite_to_sky_camera(chain, a) - satellite_to_sky_camera(chain, b)).norm();
    CHECK(std::abs(d - (a - b).norm()) < 1e-6);
    CHECK(std::abs(satellite_to_sky_camera(chain, a).norm() - (a - chain.body_pose.t_body_in_world).norm()) < 1e-6);
  }
}

TEST_CASE("elevation_azimuth special directions") {
  CHECK(elevation_azimuth(EnuCoordd(0, 0, 1)).elevation == doctest::Approx(oracle::kPi / 2));
  const AzEld east = elevation_azimuth(EnuCoordd(1, 0, 0));
  CHECK(std::abs(east.elevation) < 1e-15);
  CHECK(east.azimuth == doctest::Approx(oracle::kPi / 2));
  const AzEld diag = elevation_azimuth(EnuCoordd(1, 1, std::sqrt(2.0)));
  CHECK(diag.elevation == doctest::Approx(oracle::kPi / 4));
  CHECK(diag.azimuth == doctest::Approx(oracle::kPi / 4));
  const AzEld west = elevation_azimuth(EnuCoordd(-1, 0, 0));
  CHECK(west.azimuth == doctest::Approx(3 * oracle::kPi / 2));
}

TEST_CASE("elevation_azimuth rejects the zero vector") {
  CHECK_THROWS_AS(elevation_azimuth(EnuCoordd(0, 0, 0)), Error);
}

TEST_CASE("elevation_azimuth is scale invariant and inverts enu_direction") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1), s(1e-3, 1e7);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    const AzEld a = elevation_azimuth(EnuCoordd(p));
    const AzEld b = elevation_azimuth(EnuCoordd(s(rng) * p));
    CHECK(std::abs(a.elevation - b.elevation) < 1e-12);
    CHECK(std::abs(wrap_pi(a.azimuth - b.azimuth)) < 1e-12);
    CHECK(a.azimuth >= 0.0);
    CHECK(a.azimuth < 2 * oracle::kPi);
    CHECK((enu_direction(a) - p.normalized()).norm() < 1e-12);
  }
}

TEST_CASE("wrap_pi range") {
  CHECK(wrap_pi(oracle::kPi) == doctest::Approx(oracle::kPi));
  CHECK(wrap_pi(-oracle::kPi) == doctest::Approx(oracle::kPi));
  CHECK(wrap_pi(3 * oracle::kPi / 2) == doctest::Approx(-oracle::kPi / 2));
}
