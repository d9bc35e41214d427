#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skynav/fisheye.hpp"
#include "skynav/frames.hpp"
#include "skynav/geodesy.hpp"
#include "skynav/gnss.hpp"
#include "skynav/nlos.hpp"
#include "skynav/skyseg.hpp"

namespace skynav::synth {

/// Azimuth interval [az_begin, az_end) (radians, clockwise from north,
/// wrapping through north when az_end < az_begin) blocking the sky from the
/// horizon up to max_elevation.
struct Occluder {
  double az_begin{0};
  double az_end{0};
  double max_elevation{0};

  bool contains(const AzEld& direction) const;
};

/// A satellite placed by its direction and range from the receiver at the
/// first epoch.
struct SceneSatellite {
  std::string sat_id;
  Constellation constellation{Constellation::GPS};
  AzEld direction;
  double range{2.2e7};
  Eigen::Vector3d vel_ecef = Eigen::Vector3d::Zero();
};

struct SceneNoise {
  double pixel_sigma{0};  // intensity levels
  double pr_sigma{0};     // meters
  double dop_sigma{0};    // m/s
};

/// Constant-velocity body motion in the world frame.
struct SceneMotion {
  int epochs{1};
  double interval{1.0};  // seconds
  double start_time{0};
  Eigen::Vector3d velocity_world = Eigen::Vector3d::Zero();
};

struct SceneSpec {
  GeodeticCoordd anchor;
  std::vector<Occluder> occluders;
  std::vector<SceneSatellite> satellites;
  FrameChaind rig;  // body pose = first epoch
  FisheyeIntrinsicsd intrinsics;
  SceneNoise noise;
  double nlos_delay{30.0};
  std::array<double, kConstellationCount> clock_bias{};  // meters at start_time
  double clock_drift{0};                                 // m/s
  SceneMotion motion;
  double sky_intensity{200};
  double occluder_intensity{60};  // also used for the dark rim outside the fisheye circle
  std::uint64_t seed{1};

  /// Throws InvalidArgument when occluder elevations or ranges are out of range.
  void validate() const;
};

struct GroundTruth {
  SkyMask mask;
  std::vector<Verdict> visibility;  // per scene satellite, LOS or NLOS
  EcefCoordd true_position_ecef;
  double true_psi{0};
};

/// Pure interval test: NLOS if below the horizon or inside an occluder.
Verdict visibility_oracle(const SceneSpec& scene, const AzEld& direction);

/// Rig as it stands at epoch k.
FrameChaind rig_at(const SceneSpec& scene, int epoch);
Eigen::Vector3d world_position_at(const SceneSpec& scene, int epoch);
EcefCoordd receiver_ecef_at(const SceneSpec& scene, int epoch);
EcefCoordd satellite_ecef_at(const SceneSpec& scene, const SceneSatellite& sat, int epoch);
/// Direction of a satellite from the receiver at epoch k, in the anchor's ENU axes.
AzEld satellite_direction_at(const SceneSpec& scene, const SceneSatellite& sat, int epoch);

/// Renders the sky image seen at epoch k. Every pixel is unprojected through
/// the renderer's own fisheye inverse and classified by the occluder blocks;
/// the mask holds the noiseless geometric truth.
std::pair<GrayImage, GroundTruth> render(const SceneSpec& scene, int epoch = 0);

/// Pixel where a satellite at `sat_ecef` appears at epoch k, computed by the
/// renderer's own forward model. Empty when behind the camera or outside the
/// fisheye circle.
std::optional<PixelCoordd> render_side_projection(const SceneSpec& scene, const EcefCoordd& sat_ecef, int epoch = 0);

/// Pseudorange and Doppler for every satellite over the scene's epochs.
/// NLOS satellites (per epoch) carry the extra nlos_delay.
EpochBatch forward_model(const SceneSpec& scene, const GroundTruth& truth);

/// Everything the pipeline needs from one simulated window.
struct SyntheticWindow {
  EpochBatch batch;
  std::vector<Eigen::Vector3d> world_positions;
  std::vector<Eigen::Vector3d> world_velocities;
  std::vector<EcefCoordd> receiver_ecef;
  std::vector<std::vector<Verdict>> visibility;  // [epoch][satellite]
};

SyntheticWindow simulate_window(const SceneSpec& scene);

struct RandomSceneOptions {
  int width{1280};
  int height{1024};
  int satellites{10};
  std::vector<Constellation> constellations{Constellation::GPS, Constellation::Galileo};
  int min_occluders{2};
  int max_occluders{5};
  // When set, exactly this many satellites are placed inside occluders.
  std::optional<int> nlos_count;
  double max_tilt{5.0 * 3.14159265358979323846 / 180.0};
  SceneNoise noise{10.0, 0.0, 0.0};
  SceneMotion motion{};
};

/// Fisheye with the usable circle inside a width x height sensor and 89
/// degrees of incidence at the rim.
FisheyeIntrinsicsd default_intrinsics(int width = 1280, int height = 1024);

/// Deterministic random scene for a seed.
SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& options = {});

}  // namespace skynav::synth
