#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "skynav/error.hpp"

namespace skynav {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// WGS-84 ellipsoid.
namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kSemiMinor = kSemiMajor * (1.0 - kFlattening);
inline constexpr double kEccentricitySq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

/// Latitude/longitude in radians, height in meters above the ellipsoid.
template <typename Scalar>
struct GeodeticCoord {
  Scalar latitude{0};
  Scalar longitude{0};
  Scalar height{0};
};

template <typename Scalar>
struct EcefCoord {
  Vector3<Scalar> xyz = Vector3<Scalar>::Zero();

  EcefCoord() = default;
  explicit EcefCoord(const Vector3<Scalar>& v) : xyz(v) {}
  EcefCoord(Scalar x, Scalar y, Scalar z) : xyz(x, y, z) {}
};

template <typename Scalar>
struct EnuCoord {
  Vector3<Scalar> enu = Vector3<Scalar>::Zero();

  EnuCoord() = default;
  explicit EnuCoord(const Vector3<Scalar>& v) : enu(v) {}
  EnuCoord(Scalar e, Scalar n, Scalar u) : enu(e, n, u) {}

  Scalar east() const { return enu.x(); }
  Scalar north() const { return enu.y(); }
  Scalar up() const { return enu.z(); }
};

using GeodeticCoordd = GeodeticCoord<double>;
using EcefCoordd = EcefCoord<double>;
using EnuCoordd = EnuCoord<double>;

template <typename Scalar>
EcefCoord<Scalar> geodetic_to_ecef(const GeodeticCoord<Scalar>& g) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar sin_lat = sin(g.latitude);
  const Scalar cos_lat = cos(g.latitude);
  const Scalar n = Scalar(wgs84::kSemiMajor) / sqrt(Scalar(1) - Scalar(wgs84::kEccentricitySq) * sin_lat * sin_lat);
  return EcefCoord<Scalar>((n + g.height) * cos_lat * cos(g.longitude),
                           (n + g.height) * cos_lat * sin(g.longitude),
                           (n * (Scalar(1) - Scalar(wgs84::kEccentricitySq)) + g.height) * sin_lat);
}

/// Fixed-point iteration on the ellipsoidal-normal z intercept; latitude
/// converges to 1e-12 rad well within the 20-iteration cap.
template <typename Scalar>
GeodeticCoord<Scalar> ecef_to_geodetic(const EcefCoord<Scalar>& p) {
  using std::atan2;
  using std::abs;
  using std::sqrt;
  if (!(p.xyz.norm() > Scalar(1))) {
    throw Error(ErrorCode::NearSingular, "ECEF point within 1 m of the Earth center");
  }
  constexpr int kMaxIterations = 20;
  constexpr double kLatTolerance = 1e-12;
  const Scalar e2 = Scalar(wgs84::kEccentricitySq);
  const Scalar rho2 = p.xyz.x() * p.xyz.x() + p.xyz.y() * p.xyz.y();
  const Scalar rho = sqrt(rho2);

  Scalar z = p.xyz.z();
  Scalar lat = atan2(z, rho);
  Scalar n = Scalar(wgs84::kSemiMajor);
  for (int i = 0; i < kMaxIterations; ++i) {
    const Scalar sin_lat = z / sqrt(rho2 + z * z);
    n = Scalar(wgs84::kSemiMajor) / sqrt(Scalar(1) - e2 * sin_lat * sin_lat);
    z = p.xyz.z() + n * e2 * sin_lat;
    const Scalar next_lat = atan2(z, rho);
    const bool converged = abs(next_lat - lat) < Scalar(kLatTolerance);
    lat = next_lat;
    if (converged) break;
  }
  GeodeticCoord<Scalar> g;
  g.latitude = lat;
  g.longitude = (rho2 > Scalar(0)) ? atan2(p.xyz.y(), p.xyz.x()) : Scalar(0);
  if (g.longitude <= -Scalar(std::numbers::pi)) g.longitude = Scalar(std::numbers::pi);
  g.height = sqrt(rho2 + z * z) - n;
  return g;
}

/// R_e^n: rotates ECEF vectors into the local East-North-Up frame at `g`.
template <typename Scalar>
Matrix3<Scalar> rotation_ecef_to_enu(const GeodeticCoord<Scalar>& g) {
  using std::cos;
  using std::sin;
  const Scalar sl = sin(g.latitude), cl = cos(g.latitude);
  const Scalar so = sin(g.longitude), co = cos(g.longitude);
  Matrix3<Scalar> r;
  r << -so, co, Scalar(0),
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

/// Origin of the ENU frame, tying the local world frame to ECEF.
template <typename Scalar>
struct AnchorPoint {
  EcefCoord<Scalar> ecef;
  GeodeticCoord<Scalar> geodetic;
  Matrix3<Scalar> r_e_to_n = Matrix3<Scalar>::Identity();

  static AnchorPoint from_geodetic(const GeodeticCoord<Scalar>& g) {
    return AnchorPoint{geodetic_to_ecef(g), g, rotation_ecef_to_enu(g)};
  }
  static AnchorPoint from_ecef(const EcefCoord<Scalar>& p) {
    const auto g = ecef_to_geodetic(p);
    return AnchorPoint{p, g, rotation_ecef_to_enu(g)};
  }
};

using AnchorPointd = AnchorPoint<double>;

template <typename Scalar>
EnuCoord<Scalar> ecef_to_enu_point(const AnchorPoint<Scalar>& anchor, const EcefCoord<Scalar>& p) {
  return EnuCoord<Scalar>(anchor.r_e_to_n * (p.xyz - anchor.ecef.xyz));
}

template <typename Scalar>
EcefCoord<Scalar> enu_to_ecef_point(const AnchorPoint<Scalar>& anchor, const EnuCoord<Scalar>& p) {
  return EcefCoord<Scalar>(anchor.ecef.xyz + anchor.r_e_to_n.transpose() * p.enu);
}

}  // namespace skynav
