#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "skynav/io.hpp"

using namespace skynav;
namespace fs = std::filesystem;

namespace {

std::string parse_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) return e.what();
    return "wrong code";
  }
  return "no error";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "skynav_test_io";
  fs::create_directories(dir);
  return dir / name;
}

SatelliteObservation sample(double t, const std::string& id, Constellation c) {
  SatelliteObservation o;
  o.epoch_time = t;
  o.sat_id = id;
  o.constellation = c;
  o.pos_ecef = EcefCoordd(Eigen::Vector3d(1.5e7, -2.0e7 / 3.0, 1.1e7));
  o.vel_ecef = Eigen::Vector3d(-1234.5, 0.1, 2.0 / 7.0);
  o.pseudorange = 2.2e7 + 0.123456789;
  o.doppler_range_rate = -345.6789;
  o.n_si = 2.0;
  o.n_p = 0.3;
  o.n_d = 1.0 / 3.0;
  return o;
}

const std::string kRow = "0,G01,G,1.5e7,2e7,1e7,0,0,0,2.2e7,-10,1,1,1";

}  // namespace

TEST_CASE("observation csv round trip is exact") {
  const std::vector<SatelliteObservation> obs{sample(0.5, "G05", Constellation::GPS),
                                              sample(0.5, "E11", Constellation::Galileo),
                                              sample(1.5, "C30", Constellation::BeiDou)};
  std::stringstream ss;
  io::write_observations(ss, obs);
  CHECK(ss.str().rfind(io::kObservationHeader, 0) == 0);
  const auto back = io::read_observations(ss);
  REQUIRE(back.size() == obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    CHECK(back[i].epoch_time == obs[i].epoch_time);
    CHECK(back[i].sat_id == obs[i].sat_id);
    CHECK(back[i].constellation == obs[i].constellation);
    CHECK(back[i].pos_ecef.xyz == obs[i].pos_ecef.xyz);
    CHECK(back[i].vel_ecef == obs[i].vel_ecef);
    CHECK(back[i].pseudorange == obs[i].pseudorange);
    CHECK(back[i].doppler_range_rate == obs[i].doppler_range_rate);
    CHECK(back[i].n_d == obs[i].n_d);
  }
  const EpochBatch batch = io::group_epochs(back);
  REQUIRE(batch.size() == 2);
  CHECK(batch.epochs[0].observations.size() == 2);
  CHECK(batch.epochs[1].epoch_time == 1.5);
}

TEST_CASE("header-only observation file is empty") {
  std::istringstream in(std::string(io::kObservationHeader) + "\n");
  CHECK(io::read_observations(in).empty());
}

TEST_CASE("observation parse errors name the line") {
  const std::string header = std::string(io::kObservationHeader) + "\n";
  auto read = [](const std::string& text) {
    return [text] {
      std::istringstream in(text);
      io::read_observations(in);
    };
  };
  CHECK(parse_message(read("time,sat\n" + kRow)).find("line 1") != std::string::npos);
  CHECK(parse_message(read(header + kRow + "\n0,G02,G,1,2\n")).find("line 3") != std::string::npos);
  CHECK(parse_message(read(header + "0,G01,G,abc,2e7,1e7,0,0,0,2.2e7,-10,1,1,1\n")).find("line 2") !=
        std::string::npos);
  // Noise indices must be positive and pseudoranges far.
  CHECK(parse_message(read(header + "0,G01,G,1.5e7,2e7,1e7,0,0,0,2.2e7,-10,0,1,1\n")) != "no error");
  CHECK(parse_message(read(header + "0,G01,G,1.5e7,2e7,1e7,0,0,0,5e5,-10,1,1,1\n")) != "no error");
  CHECK(parse_message(read(header + "0,G01,X,1.5e7,2e7,1e7,0,0,0,2.2e7,-10,1,1,1\n")) != "no error");
  CHECK(parse_message(read(header + kRow + "\n")) == "no error");
}

TEST_CASE("calibration round trip") {
  io::Calibration c;
  c.intrinsics = synth::default_intrinsics(640, 512);
  c.intrinsics.alpha = 0.001;
  c.intrinsics.k = {-0.01, 0.002, 1e-4, -3e-5};
  c.r_sky_to_body = Eigen::AngleAxisd(0.1, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  std::stringstream ss;
  io::write_calibration(ss, c);
  const io::Calibration back = io::read_calibration(ss);
  CHECK(back.intrinsics.fx == c.intrinsics.fx);
  CHECK(back.intrinsics.cy == c.intrinsics.cy);
  CHECK(back.intrinsics.alpha == c.intrinsics.alpha);
  CHECK(back.intrinsics.k == c.intrinsics.k);
  CHECK(back.intrinsics.image_width == 640);
  CHECK(back.intrinsics.valid_radius == c.intrinsics.valid_radius);
  CHECK(back.r_sky_to_body == c.r_sky_to_body);
}

TEST_CASE("calibration parse errors") {
  auto read = [](const std::string& text) {
    return [text] {
      std::istringstream in(text);
      io::read_calibration(in);
    };
  };
  const std::string good =
      "# camera\nfx=300\nfy=300\ncx=320\ncy=240\nalpha=0\nk1=0\nk2=0\nk3=0\nk4=0\nwidth=640\nheight=480\n"
      "valid_radius=230\nr_sky_i=1,0,0,0,1,0,0,0,1\n";
  CHECK(parse_message(read(good)) == "no error");
  CHECK(parse_message(read(good + "bogus=1\n")).find("line 15") != std::string::npos);
  CHECK(parse_message(read(good + "fx\n")).find("line 15") != std::string::npos);
  CHECK(parse_message(read("fx=300\n")) != "no error");
  CHECK(parse_message(read(good + "r_sky_i=1,0,0\n")) != "no error");
}

TEST_CASE("pose and anchor round trips") {
  std::vector<io::TimedPose> poses(2);
  poses[0].epoch_time = 0.25;
  poses[0].pose.r_body_to_world = Eigen::AngleAxisd(0.7, Eigen::Vector3d(0.2, -0.3, 0.9).normalized()).toRotationMatrix();
  poses[0].pose.t_body_in_world = Eigen::Vector3d(1.25, -3.5, 0.125);
  poses[1].epoch_time = 1.25;
  std::stringstream ss;
  io::write_poses(ss, poses);
  CHECK(ss.str().rfind(io::kPoseHeader, 0) == 0);
  const auto back = io::read_poses(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].epoch_time == 0.25);
  CHECK((back[0].pose.r_body_to_world - poses[0].pose.r_body_to_world).norm() < 1e-12);
  CHECK(back[0].pose.t_body_in_world == poses[0].pose.t_body_in_world);
  CHECK(back[1].pose.r_body_to_world.isIdentity(1e-15));

  const io::AnchorRecord anchor{GeodeticCoordd{0.6, -2.0, 55.5}, 0.4};
  std::stringstream sa;
  io::write_anchor(sa, anchor);
  CHECK(sa.str().rfind(io::kAnchorHeader, 0) == 0);
  const auto a = io::read_anchor(sa);
  CHECK(a.geodetic.latitude == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(a.geodetic.longitude == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(a.geodetic.height == 55.5);
  CHECK(a.psi == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("anchor in degrees") {
  std::istringstream in(std::string(io::kAnchorHeader) + "\n22.3,114.2,10,30\n");
  const auto a = io::read_anchor(in);
  CHECK(a.geodetic.latitude == doctest::Approx(22.3 * oracle::kDeg));
  CHECK(a.psi == doctest::Approx(30 * oracle::kDeg));
  std::istringstream bad(std::string(io::kAnchorHeader) + "\n22.3,114.2\n");
  CHECK(parse_message([&] { io::read_anchor(bad); }).find("line 2") != std::string::npos);
}

TEST_CASE("netpbm round trips") {
  GrayImage g(3, 5);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = static_cast<std::uint8_t>(i * 17);
  const fs::path pgm = scratch("g.pgm");
  io::write_pgm(pgm, g);
  CHECK(io::read_gray_image(pgm) == g);

  RgbImage rgb{g, GrayImage::Constant(3, 5, 9), GrayImage::Constant(3, 5, 250)};
  const fs::path ppm = scratch("c.ppm");
  io::write_ppm(ppm, rgb);
  const RgbImage back = io::read_color_image(ppm);
  CHECK(back.r == rgb.r);
  CHECK(back.g == rgb.g);
  CHECK(back.b == rgb.b);
  CHECK(io::read_gray_image(ppm).rows() == 3);

  {
    std::ofstream out(scratch("bad.pgm"), std::ios::binary);
    out << "P2\n2 2\n255\n1 2 3 4\n";
  }
  CHECK(parse_message([] { io::read_gray_image(scratch("bad.pgm")); }) != "no error");
  CHECK(parse_message([] { io::read_gray_image(scratch("missing.pgm")); }) != "no error");
}

TEST_CASE("mask images use 0 and 255") {
  SkyMask m;
  m.bits = MaskRaster::Zero(2, 3);
  m.bits(0, 1) = true;
  m.bits(1, 2) = true;
  const GrayImage img = io::mask_to_image(m);
  CHECK(img(0, 1) == 255);
  CHECK(img(0, 0) == 0);
  CHECK(io::image_to_mask(img).bits == m.bits);
}

TEST_CASE("scene file round trip") {
  synth::RandomSceneOptions o;
  o.width = 320;
  o.height = 256;
  o.noise = {8.0, 1.5, 0.05};
  o.motion.epochs = 4;
  o.motion.velocity_world = Eigen::Vector3d(1.0, 2.0, 0.0);
  const auto scene = synth::random_scene(12, o);
  std::stringstream ss;
  io::write_scene(ss, scene);
  const auto back = io::read_scene(ss);
  CHECK(back.occluders.size() == scene.occluders.size());
  CHECK(back.satellites.size() == scene.satellites.size());
  CHECK(back.rig.yaw_offset == scene.rig.yaw_offset);
  CHECK(back.noise.pr_sigma == 1.5);
  CHECK(back.motion.epochs == 4);
  CHECK(back.seed == scene.seed);
  // Same scene, same render and observations.
  CHECK(synth::render(back).first == synth::render(scene).first);
  const auto wa = synth::simulate_window(scene), wb = synth::simulate_window(back);
  CHECK(wa.batch.epochs[3].observations[2].pseudorange == wb.batch.epochs[3].observations[2].pseudorange);
}

TEST_CASE("random scene keys") {
  std::istringstream in("base=random\nseed=5\nwidth=160\nheight=128\nrandom_satellites=7\nnlos_count=2\n");
  const auto scene = io::read_scene(in);
  CHECK(scene.satellites.size() == 7);
  CHECK(scene.intrinsics.image_width == 160);
  std::istringstream bad("satellite=G01,G,10,45\n");
  CHECK(parse_message([&] { io::read_scene(bad); }).find("line 1") != std::string::npos);
  std::istringstream low("occluder=0,90,0\n");
  CHECK(parse_message([&] { io::read_scene(low); }) != "no error");
}
