#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "skynav/fisheye.hpp"
#include "skynav/frames.hpp"
#include "skynav/geodesy.hpp"
#include "skynav/nlos.hpp"
#include "skynav/skyseg.hpp"
#include "skynav/synth.hpp"

namespace skynav::io {

/// Exact header of the observation CSV.
inline constexpr const char* kObservationHeader =
    "epoch_time,sat_id,constellation,x_ecef,y_ecef,z_ecef,vx_ecef,vy_ecef,vz_ecef,pseudorange_m,doppler_mps,n_si,n_p,n_d";
inline constexpr const char* kPoseHeader = "epoch_time,px,py,pz,qw,qx,qy,qz";
inline constexpr const char* kAnchorHeader = "lat_deg,lon_deg,height_m,psi_deg";

/// Throws Error(Parse) naming the offending line.
std::vector<SatelliteObservation> read_observations(std::istream& in);
std::vector<SatelliteObservation> read_observations(const std::filesystem::path& path);
void write_observations(std::ostream& out, const std::vector<SatelliteObservation>& observations);

/// Groups observations into epochs by identical epoch_time, in time order.
EpochBatch group_epochs(const std::vector<SatelliteObservation>& observations);

struct Calibration {
  FisheyeIntrinsicsd intrinsics;
  Eigen::Matrix3d r_sky_to_body = Eigen::Matrix3d::Identity();
};

/// key=value lines: fx fy cx cy alpha k1..k4 width height valid_radius and
/// r_sky_i (nine row-major values). '#' starts a comment.
Calibration read_calibration(std::istream& in);
Calibration read_calibration(const std::filesystem::path& path);
void write_calibration(std::ostream& out, const Calibration& calibration);

struct TimedPose {
  double epoch_time{0};
  BodyPosed pose;
};

std::vector<TimedPose> read_poses(std::istream& in);
std::vector<TimedPose> read_poses(const std::filesystem::path& path);
void write_poses(std::ostream& out, const std::vector<TimedPose>& poses);

struct AnchorRecord {
  GeodeticCoordd geodetic;
  double psi{0};  // radians
};

AnchorRecord read_anchor(std::istream& in);
AnchorRecord read_anchor(const std::filesystem::path& path);
void write_anchor(std::ostream& out, const AnchorRecord& anchor);

/// Binary PGM (P5). PPM (P6) input is converted to luminance.
GrayImage read_gray_image(const std::filesystem::path& path);
RgbImage read_color_image(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

/// Mask rasters are PGM with 255 = sky, 0 = non-sky.
GrayImage mask_to_image(const SkyMask& mask);
SkyMask image_to_mask(const GrayImage& image);

/// Line-oriented key = value scene description (see README for keys).
synth::SceneSpec read_scene(std::istream& in);
synth::SceneSpec read_scene(const std::filesystem::path& path);
void write_scene(std::ostream& out, const synth::SceneSpec& scene);

}  // namespace skynav::io
