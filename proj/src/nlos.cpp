#include "skynav/nlos.hpp"

#include <cmath>

namespace skynav {

char constellation_letter(Constellation c) {
  switch (c) {
    case Constellation::GPS: return 'G';
    case Constellation::Glonass: return 'R';
    case Constellation::Galileo: return 'E';
    case Constellation::BeiDou: return 'C';
  }
  return '?';
}

Constellation constellation_from_letter(char letter) {
  switch (letter) {
    case 'G': return Constellation::GPS;
    case 'R': return Constellation::Glonass;
    case 'E': return Constellation::Galileo;
    case 'C': return Constellation::BeiDou;
    default: break;
  }
  throw Error(ErrorCode::Parse, std::string("unknown constellation '") + letter + "'");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::LOS: return "LOS";
    case Verdict::NLOS: return "NLOS";
    case Verdict::OutOfView: return "OutOfView";
  }
  return "?";
}

BackProjection back_project(const FrameChaind& chain, const AnchorPointd& anchor, const FisheyeIntrinsicsd& intr,
                            const SatelliteObservation& sat) {
  BackProjection bp;
  const EnuCoordd sat_enu = ecef_to_enu_point(anchor, sat.pos_ecef);
  const Eigen::Vector3d sat_world = enu_to_world(chain, sat_enu);
  const Eigen::Vector3d from_receiver = chain.r_world_to_enu() * (sat_world - chain.body_pose.t_body_in_world);
  bp.azel = elevation_azimuth(EnuCoordd(from_receiver));
  bp.p_sky = satellite_to_sky_camera(chain, sat_world);
  if (bp.p_sky.z() <= 0.0) return bp;
  const PixelCoordd px = project(intr, bp.p_sky);
  if (in_valid_circle(intr, px)) bp.pixel = px;
  return bp;
}

Classification classify(const BackProjection& bp, const SkyMask& mask, double elevation, double fallback_cutoff) {
  Classification c;
  c.elevation = elevation;
  const bool above_horizon = elevation > 0.0;
  if (bp.pixel && !mask.degenerate) {
    const long col = std::lround(bp.pixel->u);
    const long row = std::lround(bp.pixel->v);
    if (row >= 0 && row < mask.height() && col >= 0 && col < mask.width()) {
      c.pixel = bp.pixel;
      c.verdict = (mask.bits(row, col) && above_horizon) ? Verdict::LOS : Verdict::NLOS;
      return c;
    }
  }
  c.by_elevation_fallback = true;
  if (bp.pixel) {
    // Degenerate mask: keep the pixel for reporting, decide by elevation.
    c.pixel = bp.pixel;
  }
  c.verdict = (above_horizon && elevation >= fallback_cutoff) ? Verdict::LOS : Verdict::NLOS;
  return c;
}

namespace {

double elevation_variance(double n_si, double n_noise, double elevation) {
  if (!(elevation > 0.0)) {
    throw Error(ErrorCode::NonPositiveElevation, "variance undefined at or below the horizon");
  }
  const double s = std::sin(std::min(elevation, std::numbers::pi / 2));
  return n_si * n_noise / (s * s);
}

}  // namespace

double pseudorange_variance(const SatelliteObservation& sat, double elevation) {
  return elevation_variance(sat.n_si, sat.n_p, elevation);
}

double doppler_variance(const SatelliteObservation& sat, double elevation) {
  return elevation_variance(sat.n_si, sat.n_d, elevation);
}

WeightedObservation weigh(const SatelliteObservation& sat, double elevation) {
  return WeightedObservation{sat, pseudorange_variance(sat, elevation), doppler_variance(sat, elevation), elevation};
}

FilteredEpoch filter_epoch(const std::vector<SatelliteObservation>& observations, const FrameChaind& chain,
                           const AnchorPointd& anchor, const FisheyeIntrinsicsd& intr, const SkyMask& mask,
                           const NlosConfig& config) {
  FilteredEpoch out;
  if (observations.empty()) return out;
  out.epoch_time = observations.front().epoch_time;
  for (const auto& sat : observations) {
    if (sat.epoch_time != out.epoch_time) {
      throw Error(ErrorCode::MixedEpochs, "observations span more than one epoch");
    }
  }
  for (const auto& sat : observations) {
    const BackProjection bp = back_project(chain, anchor, intr, sat);
    const Classification c = classify(bp, mask, bp.azel.elevation, config.elevation_cutoff);
    if (c.verdict == Verdict::LOS) {
      out.kept.push_back(weigh(sat, c.elevation));
    } else if (config.downweight_nlos && c.elevation > 0.0) {
      WeightedObservation w = weigh(sat, c.elevation);
      w.pr_variance *= config.nlos_variance_scale;
      w.dop_variance *= config.nlos_variance_scale;
      out.kept.push_back(w);
    } else {
      out.rejected.push_back(RejectedObservation{sat, c});
    }
  }
  return out;
}

FilteredEpoch filter_by_elevation(const std::vector<SatelliteObservation>& observations,
                                  const EcefCoordd& receiver, double cutoff) {
  FilteredEpoch out;
  if (observations.empty()) return out;
  out.epoch_time = observations.front().epoch_time;
  const AnchorPointd here = AnchorPointd::from_ecef(receiver);
  for (const auto& sat : observations) {
    if (sat.epoch_time != out.epoch_time) {
      throw Error(ErrorCode::MixedEpochs, "observations span more than one epoch");
    }
    const double elevation = elevation_azimuth(ecef_to_enu_point(here, sat.pos_ecef)).elevation;
    if (elevation > 0.0 && elevation >= cutoff) {
      out.kept.push_back(weigh(sat, elevation));
    } else {
      Classification c;
      c.verdict = Verdict::NLOS;
      c.elevation = elevation;
      c.by_elevation_fallback = true;
      out.rejected.push_back(RejectedObservation{sat, c});
    }
  }
  return out;
}

}  // namespace skynav
