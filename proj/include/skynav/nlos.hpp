#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "skynav/fisheye.hpp"
#include "skynav/frames.hpp"
#include "skynav/geodesy.hpp"
#include "skynav/skyseg.hpp"

namespace skynav {

enum class Constellation { GPS, Glonass, Galileo, BeiDou };

inline constexpr int kConstellationCount = 4;

/// 'G', 'R', 'E', 'C'
char constellation_letter(Constellation c);
Constellation constellation_from_letter(char letter);

/// One satellite at one epoch. Doppler is a range rate, positive when the
/// range is opening.
struct SatelliteObservation {
  double epoch_time{0};
  std::string sat_id;
  Constellation constellation{Constellation::GPS};
  EcefCoordd pos_ecef;
  Eigen::Vector3d vel_ecef = Eigen::Vector3d::Zero();
  double pseudorange{0};
  double doppler_range_rate{0};
  double n_si{1};
  double n_p{1};
  double n_d{1};
};

enum class Verdict { LOS, NLOS, OutOfView };

const char* to_string(Verdict v);

struct Classification {
  Verdict verdict{Verdict::OutOfView};
  std::optional<PixelCoordd> pixel;  // present iff verdict is LOS or NLOS
  double elevation{0};
  bool by_elevation_fallback{false};
};

/// Where a satellite lands in the sky camera.
struct BackProjection {
  Eigen::Vector3d p_sky = Eigen::Vector3d::Zero();
  AzEld azel;                         // as seen from the receiver
  std::optional<PixelCoordd> pixel;  // empty when out of view

  bool in_view() const { return pixel.has_value(); }
};

struct WeightedObservation {
  SatelliteObservation obs;
  double pr_variance{1};
  double dop_variance{1};
  double elevation{0};
};

struct RejectedObservation {
  SatelliteObservation obs;
  Classification classification;
};

struct FilteredEpoch {
  double epoch_time{0};
  std::vector<WeightedObservation> kept;
  std::vector<RejectedObservation> rejected;
};

struct NlosConfig {
  double elevation_cutoff{15.0 * std::numbers::pi / 180.0};
  // Reserved: keep NLOS satellites with inflated variance instead of rejecting.
  bool downweight_nlos{false};
  double nlos_variance_scale{100.0};
};

/// ECEF -> ENU -> world -> sky camera -> pixel. Behind-camera points and
/// pixels outside the fisheye circle come back out of view.
BackProjection back_project(const FrameChaind& chain, const AnchorPointd& anchor, const FisheyeIntrinsicsd& intr,
                            const SatelliteObservation& sat);

/// Pixel on a sky bit -> LOS, on a non-sky bit -> NLOS. Out-of-view
/// satellites and degenerate masks fall back to the elevation cutoff. A
/// satellite at or below the horizon is never LOS.
Classification classify(const BackProjection& bp, const SkyMask& mask, double elevation, double fallback_cutoff);

/// (n_si * n_p) / sin^2(elevation), used as the weighting variance.
double pseudorange_variance(const SatelliteObservation& sat, double elevation);
/// (n_si * n_d) / sin^2(elevation)
double doppler_variance(const SatelliteObservation& sat, double elevation);

WeightedObservation weigh(const SatelliteObservation& sat, double elevation);

/// Classifies every observation of one epoch against the sky mask and keeps
/// the LOS ones with their variances attached.
FilteredEpoch filter_epoch(const std::vector<SatelliteObservation>& observations, const FrameChaind& chain,
                           const AnchorPointd& anchor, const FisheyeIntrinsicsd& intr, const SkyMask& mask,
                           const NlosConfig& config);

/// Elevation-only screening from a receiver position (cutoff 0 keeps every
/// satellite above the horizon).
FilteredEpoch filter_by_elevation(const std::vector<SatelliteObservation>& observations,
                                  const EcefCoordd& receiver, double cutoff);

}  // namespace skynav
