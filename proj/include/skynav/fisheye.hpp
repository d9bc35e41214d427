#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "skynav/error.hpp"
#include "skynav/geodesy.hpp"

namespace skynav {

/// Kannala-Brandt (equidistant polynomial) fisheye intrinsics.
template <typename Scalar>
struct FisheyeIntrinsics {
  Scalar fx{1}, fy{1};
  Scalar cx{0}, cy{0};
  Scalar alpha{0};  // skew, enters u only
  std::array<Scalar, 4> k{};
  int image_width{0};
  int image_height{0};
  Scalar valid_radius{0};  // usable fisheye circle around (cx, cy), pixels

  /// Throws InvalidArgument when the invariants do not hold.
  void validate() const {
    if (!(fx > Scalar(0)) || !(fy > Scalar(0))) {
      throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    }
    if (!(valid_radius > Scalar(0)) || valid_radius > Scalar(std::max(image_width, image_height))) {
      throw Error(ErrorCode::InvalidArgument, "valid_radius must lie in (0, max(width, height)]");
    }
  }
};

using FisheyeIntrinsicsd = FisheyeIntrinsics<double>;

template <typename Scalar>
struct PixelCoord {
  Scalar u{0};
  Scalar v{0};
};

using PixelCoordd = PixelCoord<double>;

/// theta_d = theta (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)
template <typename Scalar>
Scalar distort_angle(const FisheyeIntrinsics<Scalar>& intr, Scalar theta) {
  const Scalar t2 = theta * theta;
  return theta * (Scalar(1) + t2 * (intr.k[0] + t2 * (intr.k[1] + t2 * (intr.k[2] + t2 * intr.k[3]))));
}

template <typename Scalar>
Scalar distort_angle_derivative(const FisheyeIntrinsics<Scalar>& intr, Scalar theta) {
  const Scalar t2 = theta * theta;
  return Scalar(1) + t2 * (Scalar(3) * intr.k[0] +
                           t2 * (Scalar(5) * intr.k[1] + t2 * (Scalar(7) * intr.k[2] + t2 * Scalar(9) * intr.k[3])));
}

template <typename Scalar>
PixelCoord<Scalar> project(const FisheyeIntrinsics<Scalar>& intr, const Vector3<Scalar>& p_cam) {
  using std::atan;
  using std::sqrt;
  if (!(p_cam.z() > Scalar(0))) {
    throw Error(ErrorCode::BehindCamera, "point is not in front of the camera");
  }
  const Scalar a = p_cam.x() / p_cam.z();
  const Scalar b = p_cam.y() / p_cam.z();
  const Scalar r = sqrt(a * a + b * b);
  const Scalar theta = atan(r);
  const Scalar theta_d = distort_angle(intr, theta);
  // theta_d / r -> 1 as r -> 0.
  const Scalar scale = (r > Scalar(1e-12)) ? theta_d / r : Scalar(1);
  const Scalar xd = scale * a;
  const Scalar yd = scale * b;
  return PixelCoord<Scalar>{intr.fx * (xd + intr.alpha * yd) + intr.cx, intr.fy * yd + intr.cy};
}

template <typename Scalar>
Scalar distance_from_center(const FisheyeIntrinsics<Scalar>& intr, const PixelCoord<Scalar>& px) {
  using std::hypot;
  return hypot(px.u - intr.cx, px.v - intr.cy);
}

template <typename Scalar>
bool in_valid_circle(const FisheyeIntrinsics<Scalar>& intr, const PixelCoord<Scalar>& px) {
  return distance_from_center(intr, px) <= intr.valid_radius;
}

/// Solves distort_angle(theta) = theta_d on [0, pi/2) by Newton iteration
/// with a bisection fallback. Starts from theta = theta_d.
template <typename Scalar>
Scalar undistort_angle(const FisheyeIntrinsics<Scalar>& intr, Scalar theta_d) {
  using std::abs;
  constexpr int kMaxIterations = 50;
  if (theta_d <= Scalar(0)) return Scalar(0);
  Scalar lo = 0;
  Scalar hi = Scalar(std::numbers::pi / 2);
  if (distort_angle(intr, hi) < theta_d) {
    throw Error(ErrorCode::NoConvergence, "distorted angle has no preimage in front of the camera");
  }
  Scalar theta = std::min(theta_d, hi);
  for (int i = 0; i < kMaxIterations; ++i) {
    const Scalar f = distort_angle(intr, theta) - theta_d;
    if (abs(f) <= Scalar(1e-15) * std::max(Scalar(1), theta_d)) return theta;
    if (f > Scalar(0)) hi = theta; else lo = theta;
    const Scalar df = distort_angle_derivative(intr, theta);
    Scalar next = (df > Scalar(0)) ? theta - f / df : (lo + hi) / 2;
    if (!(next > lo && next < hi)) next = (lo + hi) / 2;
    if (abs(next - theta) <= Scalar(1e-16)) return next;
    theta = next;
  }
  throw Error(ErrorCode::NoConvergence, "incidence-angle root find exceeded iteration cap");
}

/// Unit ray (z > 0) through a pixel inside the valid circle.
template <typename Scalar>
Vector3<Scalar> unproject(const FisheyeIntrinsics<Scalar>& intr, const PixelCoord<Scalar>& px) {
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;
  if (!in_valid_circle(intr, px)) {
    throw Error(ErrorCode::OutsideValidCircle, "pixel lies outside the fisheye circle");
  }
  const Scalar yd = (px.v - intr.cy) / intr.fy;
  const Scalar xd = (px.u - intr.cx) / intr.fx - intr.alpha * yd;
  const Scalar theta_d = sqrt(xd * xd + yd * yd);
  if (theta_d == Scalar(0)) return Vector3<Scalar>(0, 0, 1);
  const Scalar theta = undistort_angle(intr, theta_d);
  const Scalar phi = atan2(yd, xd);
  return Vector3<Scalar>(sin(theta) * cos(phi), sin(theta) * sin(phi), cos(theta));
}

}  // namespace skynav
