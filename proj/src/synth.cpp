#include "skynav/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Geometry>
#include <fmt/format.h>

namespace skynav::synth {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDeg = std::numbers::pi / 180.0;

double wrap_two_pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0) w += kTwoPi;
  return w;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// ECEF -> ENU built from two frame rotations (about z by lon + 90 deg, then
// about the new x by 90 deg - lat), independent of the geodesy module's matrix.
Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticCoordd& g) {
  const Eigen::AngleAxisd about_z(-(g.longitude + kPi / 2), Eigen::Vector3d::UnitZ());
  const Eigen::AngleAxisd about_x(-(kPi / 2 - g.latitude), Eigen::Vector3d::UnitX());
  return (about_x * about_z).toRotationMatrix();
}

// Camera-frame direction -> anchor ENU direction for a rig.
Eigen::Quaterniond camera_to_enu(const FrameChaind& rig) {
  const Eigen::Quaterniond sky_to_world =
      Eigen::Quaterniond(rig.body_pose.r_body_to_world) * Eigen::Quaterniond(rig.r_sky_to_body);
  return Eigen::Quaterniond(Eigen::AngleAxisd(rig.yaw_offset, Eigen::Vector3d::UnitZ())) * sky_to_world;
}

double polynomial_angle(const FisheyeIntrinsicsd& intr, double theta) {
  double out = theta;
  double power = theta;
  for (double k : intr.k) {
    power *= theta * theta;
    out += k * power;
  }
  return out;
}

// Incidence angle for a distorted angle, searched over [0, pi). Empty when
// the lens polynomial does not reach theta_d.
std::optional<double> incidence_for(const FisheyeIntrinsicsd& intr, double theta_d) {
  if (theta_d <= 0) return 0.0;
  double lo = 0, hi = kPi - 1e-9;
  if (polynomial_angle(intr, hi) < theta_d) return std::nullopt;
  double theta = theta_d;
  for (int i = 0; i < 100; ++i) {
    const double f = polynomial_angle(intr, theta) - theta_d;
    if (f > 0) hi = theta; else lo = theta;
    const double h = 1e-7;
    const double df = (polynomial_angle(intr, theta + h) - polynomial_angle(intr, theta - h)) / (2 * h);
    double next = theta - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - theta) < 1e-15) return next;
    theta = next;
  }
  return theta;
}

AzEld direction_to_azel(const Eigen::Vector3d& d_enu) {
  const Eigen::Vector3d d = d_enu.normalized();
  return AzEld{wrap_two_pi(std::atan2(d.x(), d.y())), std::asin(std::clamp(d.z(), -1.0, 1.0))};
}

bool same_intrinsics(const FisheyeIntrinsicsd& a, const FisheyeIntrinsicsd& b) {
  return a.fx == b.fx && a.fy == b.fy && a.cx == b.cx && a.cy == b.cy && a.alpha == b.alpha && a.k == b.k &&
         a.image_width == b.image_width && a.image_height == b.image_height && a.valid_radius == b.valid_radius;
}

// Unit camera rays per pixel (zero outside the circle). Rendering many frames
// through one lens reuses the table.
struct RayTable {
  FisheyeIntrinsicsd intrinsics;
  std::vector<Eigen::Vector3d> rays;
};

const RayTable& ray_table(const FisheyeIntrinsicsd& intr) {
  thread_local RayTable table;
  if (!table.rays.empty() && same_intrinsics(table.intrinsics, intr)) return table;
  table.intrinsics = intr;
  table.rays.assign(static_cast<std::size_t>(intr.image_width) * static_cast<std::size_t>(intr.image_height),
                    Eigen::Vector3d::Zero());
  for (int row = 0; row < intr.image_height; ++row) {
    for (int col = 0; col < intr.image_width; ++col) {
      const double du = col - intr.cx, dv = row - intr.cy;
      if (std::hypot(du, dv) > intr.valid_radius) continue;
      const double yd = dv / intr.fy;
      const double xd = du / intr.fx - intr.alpha * yd;
      const auto theta = incidence_for(intr, std::hypot(xd, yd));
      if (!theta) continue;
      const double phi = std::atan2(yd, xd);
      table.rays[static_cast<std::size_t>(row) * static_cast<std::size_t>(intr.image_width) +
                 static_cast<std::size_t>(col)] =
          Eigen::Vector3d(std::sin(*theta) * std::cos(phi), std::sin(*theta) * std::sin(phi), std::cos(*theta));
    }
  }
  return table;
}

}  // namespace

bool Occluder::contains(const AzEld& direction) const {
  if (direction.elevation >= max_elevation) return false;
  const double az = wrap_two_pi(direction.azimuth);
  const double begin = wrap_two_pi(az_begin);
  const double end = wrap_two_pi(az_end);
  if (begin <= end) return az >= begin && az < end;
  return az >= begin || az < end;
}

void SceneSpec::validate() const {
  for (const auto& o : occluders) {
    if (!(o.max_elevation > 0.0 && o.max_elevation <= kPi / 2)) {
      throw Error(ErrorCode::InvalidArgument, "occluder elevation must lie in (0, pi/2]");
    }
  }
  for (const auto& s : satellites) {
    if (!(s.range >= 1.9e7)) throw Error(ErrorCode::InvalidArgument, "satellite " + s.sat_id + " is too close");
  }
  intrinsics.validate();
  if (motion.epochs < 1 || !(motion.interval > 0)) throw Error(ErrorCode::InvalidArgument, "bad motion window");
}

Verdict visibility_oracle(const SceneSpec& scene, const AzEld& direction) {
  if (direction.elevation <= 0.0) return Verdict::NLOS;
  for (const auto& o : scene.occluders) {
    if (o.contains(direction)) return Verdict::NLOS;
  }
  return Verdict::LOS;
}

Eigen::Vector3d world_position_at(const SceneSpec& scene, int epoch) {
  return scene.rig.body_pose.t_body_in_world + scene.motion.velocity_world * (epoch * scene.motion.interval);
}

FrameChaind rig_at(const SceneSpec& scene, int epoch) {
  FrameChaind rig = scene.rig;
  rig.body_pose.t_body_in_world = world_position_at(scene, epoch);
  return rig;
}

EcefCoordd receiver_ecef_at(const SceneSpec& scene, int epoch) {
  const Eigen::Matrix3d r_enu_to_ecef = ecef_to_enu_rotation(scene.anchor).transpose();
  const Eigen::Vector3d enu = Eigen::AngleAxisd(scene.rig.yaw_offset, Eigen::Vector3d::UnitZ()) *
                              (world_position_at(scene, epoch) - scene.rig.anchor_world);
  return EcefCoordd(geodetic_to_ecef(scene.anchor).xyz + r_enu_to_ecef * enu);
}

EcefCoordd satellite_ecef_at(const SceneSpec& scene, const SceneSatellite& sat, int epoch) {
  const Eigen::Matrix3d r_enu_to_ecef = ecef_to_enu_rotation(scene.anchor).transpose();
  const double ce = std::cos(sat.direction.elevation);
  const Eigen::Vector3d d_enu(ce * std::sin(sat.direction.azimuth), ce * std::cos(sat.direction.azimuth),
                              std::sin(sat.direction.elevation));
  const Eigen::Vector3d start = receiver_ecef_at(scene, 0).xyz + r_enu_to_ecef * (sat.range * d_enu);
  return EcefCoordd(start + sat.vel_ecef * (epoch * scene.motion.interval));
}

AzEld satellite_direction_at(const SceneSpec& scene, const SceneSatellite& sat, int epoch) {
  const Eigen::Vector3d rel = satellite_ecef_at(scene, sat, epoch).xyz - receiver_ecef_at(scene, epoch).xyz;
  return direction_to_azel(ecef_to_enu_rotation(scene.anchor) * rel);
}

std::pair<GrayImage, GroundTruth> render(const SceneSpec& scene, int epoch) {
  const FisheyeIntrinsicsd& intr = scene.intrinsics;
  const int width = intr.image_width, height = intr.image_height;
  const FrameChaind rig = rig_at(scene, epoch);
  const Eigen::Matrix3d cam_to_enu = camera_to_enu(rig).toRotationMatrix();

  GroundTruth truth;
  truth.mask.bits = MaskRaster::Constant(height, width, false);
  truth.true_psi = scene.rig.yaw_offset;
  truth.true_position_ecef = receiver_ecef_at(scene, epoch);
  for (const auto& sat : scene.satellites) {
    truth.visibility.push_back(visibility_oracle(scene, satellite_direction_at(scene, sat, epoch)));
  }

  const RayTable& table = ray_table(intr);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const Eigen::Vector3d& ray =
          table.rays[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)];
      if (ray.isZero()) continue;
      truth.mask.bits(row, col) = visibility_oracle(scene, direction_to_azel(cam_to_enu * ray)) == Verdict::LOS;
    }
  }

  GrayImage image(height, width);
  auto rng = make_rng(scene.seed, 0x5eedULL + static_cast<std::uint64_t>(epoch));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const double mean = truth.mask.bits.data()[i] ? scene.sky_intensity : scene.occluder_intensity;
    const double value = scene.noise.pixel_sigma > 0 ? mean + scene.noise.pixel_sigma * noise(rng) : mean;
    image.data()[i] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
  }
  return {std::move(image), std::move(truth)};
}

std::optional<PixelCoordd> render_side_projection(const SceneSpec& scene, const EcefCoordd& sat_ecef, int epoch) {
  const FisheyeIntrinsicsd& intr = scene.intrinsics;
  const Eigen::Vector3d d_enu = ecef_to_enu_rotation(scene.anchor) * (sat_ecef.xyz - receiver_ecef_at(scene, epoch).xyz);
  const Eigen::Vector3d d_cam = camera_to_enu(rig_at(scene, epoch)).conjugate() * d_enu.normalized();
  if (d_cam.z() <= 0.0) return std::nullopt;
  const double theta = std::acos(std::clamp(d_cam.z(), -1.0, 1.0));
  const double phi = std::atan2(d_cam.y(), d_cam.x());
  const double theta_d = polynomial_angle(intr, theta);
  const double xd = theta_d * std::cos(phi), yd = theta_d * std::sin(phi);
  const PixelCoordd px{intr.cx + intr.fx * (xd + intr.alpha * yd), intr.cy + intr.fy * yd};
  if (std::hypot(px.u - intr.cx, px.v - intr.cy) > intr.valid_radius) return std::nullopt;
  return px;
}

SyntheticWindow simulate_window(const SceneSpec& scene) {
  SyntheticWindow out;
  const Eigen::Matrix3d r_enu_to_ecef = ecef_to_enu_rotation(scene.anchor).transpose();
  const Eigen::Vector3d v_receiver_ecef =
      r_enu_to_ecef * (Eigen::AngleAxisd(scene.rig.yaw_offset, Eigen::Vector3d::UnitZ()) * scene.motion.velocity_world);
  auto rng = make_rng(scene.seed, 0x0b5ULL);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int k = 0; k < scene.motion.epochs; ++k) {
    const double t = scene.motion.start_time + k * scene.motion.interval;
    const double elapsed = k * scene.motion.interval;
    const Eigen::Vector3d receiver = receiver_ecef_at(scene, k).xyz;
    out.world_positions.push_back(world_position_at(scene, k));
    out.world_velocities.push_back(scene.motion.velocity_world);
    out.receiver_ecef.emplace_back(receiver);

    Epoch epoch;
    epoch.epoch_time = t;
    std::vector<Verdict> visibility;
    for (const auto& sat : scene.satellites) {
      const Eigen::Vector3d pos = satellite_ecef_at(scene, sat, k).xyz;
      const Verdict verdict = visibility_oracle(scene, satellite_direction_at(scene, sat, k));
      visibility.push_back(verdict);
      const Eigen::Vector3d los = pos - receiver;
      const Eigen::Vector3d kappa = los.normalized();
      const double clock = scene.clock_bias[static_cast<int>(sat.constellation)] + scene.clock_drift * elapsed;

      SatelliteObservation obs;
      obs.epoch_time = t;
      obs.sat_id = sat.sat_id;
      obs.constellation = sat.constellation;
      obs.pos_ecef = EcefCoordd(pos);
      obs.vel_ecef = sat.vel_ecef;
      // The simulated noise does not depend on elevation, so the reported
      // indices cancel the 1/sin^2 factor of the variance model.
      const double sin_el = std::max(std::sin(satellite_direction_at(scene, sat, k).elevation), 1e-3);
      obs.n_si = 1.0;
      obs.n_p = sin_el * sin_el;
      obs.n_d = sin_el * sin_el;
      // Draw both noise terms unconditionally so the stream layout does not
      // depend on the noise levels.
      const double pr_noise = noise(rng);
      const double dop_noise = noise(rng);
      obs.pseudorange = los.norm() + clock + scene.noise.pr_sigma * pr_noise +
                        (verdict == Verdict::NLOS ? scene.nlos_delay : 0.0);
      obs.doppler_range_rate =
          kappa.dot(sat.vel_ecef - v_receiver_ecef) + scene.clock_drift + scene.noise.dop_sigma * dop_noise;
      epoch.observations.push_back(std::move(obs));
    }
    out.visibility.push_back(std::move(visibility));
    out.batch.epochs.push_back(std::move(epoch));
  }
  return out;
}

EpochBatch forward_model(const SceneSpec& scene, const GroundTruth& /*truth*/) {
  return simulate_window(scene).batch;
}

FisheyeIntrinsicsd default_intrinsics(int width, int height) {
  FisheyeIntrinsicsd intr;
  intr.image_width = width;
  intr.image_height = height;
  intr.cx = (width - 1) / 2.0;
  intr.cy = (height - 1) / 2.0;
  intr.k = {-0.01, 0.002, 0.0, 0.0};
  intr.alpha = 0.0;
  intr.valid_radius = 0.48 * std::min(width, height);
  // Rim of the circle at 89 degrees of incidence.
  const double rim_theta_d = polynomial_angle(intr, 89.0 * kDeg);
  intr.fx = intr.valid_radius / rim_theta_d;
  intr.fy = intr.fx;
  return intr;
}

SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& options) {
  auto rng = make_rng(seed, 0x5ce7eULL);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  SceneSpec scene;
  scene.seed = seed;
  scene.anchor = GeodeticCoordd{uniform(-60, 60) * kDeg, uniform(-180, 180) * kDeg, uniform(0, 500)};
  scene.intrinsics = default_intrinsics(options.width, options.height);
  scene.noise = options.noise;
  scene.motion = options.motion;

  const int occluder_count = std::uniform_int_distribution<int>(options.min_occluders, options.max_occluders)(rng);
  for (int i = 0; i < occluder_count; ++i) {
    const double begin = uniform(0, 360) * kDeg;
    scene.occluders.push_back(Occluder{begin, wrap_two_pi(begin + uniform(20, 80) * kDeg), uniform(15, 60) * kDeg});
  }

  // Satellites keep a 2 degree margin from every block edge when their
  // visibility is forced.
  auto clear_of_edges = [&scene](const AzEld& d) {
    for (const auto& o : scene.occluders) {
      for (double daz : {-2.0 * kDeg, 2.0 * kDeg}) {
        if (o.contains(AzEld{d.azimuth + daz, d.elevation}) != o.contains(d)) return false;
      }
      for (double del : {-2.0 * kDeg, 2.0 * kDeg}) {
        if (o.contains(AzEld{d.azimuth, d.elevation + del}) != o.contains(d)) return false;
      }
    }
    return true;
  };
  const int nlos_target = options.nlos_count.value_or(-1);
  // Satellites not forced into a block are spread over the sky: each takes
  // its own azimuth sector, as a real constellation would.
  const int forced_nlos = scene.occluders.empty() ? 0 : std::clamp(nlos_target, 0, options.satellites);
  const int spread = std::max(1, options.satellites - forced_nlos);
  const double sector = kTwoPi / spread;
  const double sector_offset = uniform(0, kTwoPi);
  auto sector_azimuth = [&](int i) { return wrap_two_pi(sector_offset + (i - forced_nlos + uniform(0, 1)) * sector); };
  for (int i = 0; i < options.satellites; ++i) {
    AzEld dir;
    if (nlos_target >= 0 && i < nlos_target && !scene.occluders.empty()) {
      do {
        const auto& o = scene.occluders[std::uniform_int_distribution<std::size_t>(0, scene.occluders.size() - 1)(rng)];
        const double width = wrap_two_pi(o.az_end - o.az_begin);
        dir = AzEld{wrap_two_pi(o.az_begin + uniform(2 * kDeg, width - 2 * kDeg)),
                    uniform(std::min(15 * kDeg, o.max_elevation - 4 * kDeg), o.max_elevation - 2 * kDeg)};
      } while (!clear_of_edges(dir));
    } else if (nlos_target >= 0) {
      do {
        dir = AzEld{sector_azimuth(i), uniform(15, 85) * kDeg};
      } while (visibility_oracle(scene, dir) != Verdict::LOS || !clear_of_edges(dir));
    } else {
      dir = AzEld{sector_azimuth(i), uniform(5, 85) * kDeg};
    }
    const Constellation c = options.constellations[static_cast<std::size_t>(i) % options.constellations.size()];
    const std::string id = fmt::format("{}{:02d}", constellation_letter(c), i + 1);
    const Eigen::Vector3d vel(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    scene.satellites.push_back(SceneSatellite{id, c, dir, uniform(2.0e7, 2.6e7), 3000.0 * vel.normalized()});
  }

  scene.rig.yaw_offset = uniform(-180, 180) * kDeg;
  const double tilt_limit = options.max_tilt / std::numbers::sqrt2;
  scene.rig.body_pose.r_body_to_world =
      (Eigen::AngleAxisd(uniform(-kPi, kPi), Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(uniform(-tilt_limit, tilt_limit), Eigen::Vector3d::UnitX()) *
       Eigen::AngleAxisd(uniform(-tilt_limit, tilt_limit), Eigen::Vector3d::UnitY()))
          .toRotationMatrix();
  scene.rig.body_pose.t_body_in_world = Eigen::Vector3d(uniform(-10, 10), uniform(-10, 10), uniform(-1, 1));
  scene.rig.r_sky_to_body = (Eigen::AngleAxisd(uniform(-1, 1) * kDeg, Eigen::Vector3d::UnitX()) *
                             Eigen::AngleAxisd(uniform(-1, 1) * kDeg, Eigen::Vector3d::UnitY()))
                                .toRotationMatrix();
  for (auto& b : scene.clock_bias) b = uniform(-1000, 1000);
  scene.clock_drift = uniform(-1, 1);
  return scene;
}

}  // namespace skynav::synth
