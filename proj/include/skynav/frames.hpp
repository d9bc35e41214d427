#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "skynav/error.hpp"
#include "skynav/geodesy.hpp"

namespace skynav {

/// Rotation by `angle` about the up (z) axis.
template <typename Scalar>
Matrix3<Scalar> rotation_about_up(Scalar angle) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(angle), s = sin(angle);
  Matrix3<Scalar> r;
  r << c, -s, Scalar(0),
       s, c, Scalar(0),
       Scalar(0), Scalar(0), Scalar(1);
  return r;
}

template <typename Scalar>
struct BodyPose {
  Matrix3<Scalar> r_body_to_world = Matrix3<Scalar>::Identity();
  Vector3<Scalar> t_body_in_world = Vector3<Scalar>::Zero();
};

/// ENU <-> local world <-> body <-> sky camera.
///
/// `yaw_offset` is the yaw of the world frame measured in ENU, so that
/// R_w^n = Rot_up(yaw_offset) and R_n^w is its transpose. The body pose is
/// per epoch and comes from outside (VIO or the synthetic scene).
template <typename Scalar>
struct FrameChain {
  Scalar yaw_offset{0};
  Vector3<Scalar> anchor_world = Vector3<Scalar>::Zero();
  Matrix3<Scalar> r_sky_to_body = Matrix3<Scalar>::Identity();
  BodyPose<Scalar> body_pose;
  // Antenna-to-camera offset. Reserved; the pipeline treats both as co-located.
  Vector3<Scalar> lever_arm = Vector3<Scalar>::Zero();

  Matrix3<Scalar> r_world_to_enu() const { return rotation_about_up(yaw_offset); }
  Matrix3<Scalar> r_enu_to_world() const { return rotation_about_up(yaw_offset).transpose(); }
  Matrix3<Scalar> r_sky_to_world() const { return body_pose.r_body_to_world * r_sky_to_body; }
};

using FrameChaind = FrameChain<double>;
using BodyPosed = BodyPose<double>;

template <typename Scalar>
Vector3<Scalar> enu_to_world(const FrameChain<Scalar>& chain, const EnuCoord<Scalar>& p) {
  return chain.r_enu_to_world() * p.enu + chain.anchor_world;
}

template <typename Scalar>
EnuCoord<Scalar> world_to_enu(const FrameChain<Scalar>& chain, const Vector3<Scalar>& p_world) {
  return EnuCoord<Scalar>(chain.r_world_to_enu() * (p_world - chain.anchor_world));
}

/// Satellite position expressed in the sky-pointing camera frame. The camera
/// is taken to sit at the body origin.
template <typename Scalar>
Vector3<Scalar> satellite_to_sky_camera(const FrameChain<Scalar>& chain, const Vector3<Scalar>& p_sat_world) {
  return chain.r_sky_to_world().transpose() * (p_sat_world - chain.body_pose.t_body_in_world);
}

template <typename Scalar>
struct AzEl {
  Scalar azimuth{0};    // from north, clockwise, [0, 2pi)
  Scalar elevation{0};  // above the horizon
};

using AzEld = AzEl<double>;

template <typename Scalar>
AzEl<Scalar> elevation_azimuth(const EnuCoord<Scalar>& p) {
  using std::asin;
  using std::atan2;
  const Scalar norm = p.enu.norm();
  if (!(norm > Scalar(0))) {
    throw Error(ErrorCode::ZeroVector, "elevation of a zero-length ENU vector");
  }
  constexpr Scalar kTwoPi = Scalar(2 * std::numbers::pi);
  const Scalar s = std::clamp(p.up() / norm, Scalar(-1), Scalar(1));
  Scalar az = atan2(p.east(), p.north());
  if (az < Scalar(0)) az += kTwoPi;
  if (az >= kTwoPi) az -= kTwoPi;
  return AzEl<Scalar>{az, asin(s)};
}

/// Unit ENU direction for an azimuth/elevation pair.
template <typename Scalar>
Vector3<Scalar> enu_direction(const AzEl<Scalar>& ae) {
  using std::cos;
  using std::sin;
  const Scalar ce = cos(ae.elevation);
  return Vector3<Scalar>(ce * sin(ae.azimuth), ce * cos(ae.azimuth), sin(ae.elevation));
}

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_pi(Scalar a) {
  using std::remainder;
  Scalar w = remainder(a, Scalar(2 * std::numbers::pi));
  if (w <= -Scalar(std::numbers::pi)) w += Scalar(2 * std::numbers::pi);
  return w;
}

}  // namespace skynav
