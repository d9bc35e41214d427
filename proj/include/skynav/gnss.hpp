#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "skynav/geodesy.hpp"
#include "skynav/nlos.hpp"

namespace skynav {

struct Epoch {
  double epoch_time{0};
  std::vector<SatelliteObservation> observations;
};

/// Sliding window of epochs, strictly increasing in time, none empty.
struct EpochBatch {
  std::vector<Epoch> epochs;

  std::size_t size() const { return epochs.size(); }
  /// Throws InvalidArgument if the ordering or non-emptiness invariant fails.
  void validate() const;
};

/// Receiver clock: per-constellation bias in meters, indexed G, R, E, C, and
/// the drift rate in m/s.
struct ClockState {
  std::array<std::optional<double>, kConstellationCount> biases{};
  double drift_rate{0};

  std::optional<double> bias(Constellation c) const { return biases[static_cast<int>(c)]; }
};

struct SolverOptions {
  int max_iterations{25};
  double step_tolerance{1e-4};  // meters (radians for yaw)
  double initial_damping{1e-3};
  double damping_factor{10.0};
  double max_condition{1e12};
};

struct SppSolution {
  EcefCoordd position_ecef;
  ClockState clock;
  double post_fit_rms{0};
  int iterations{0};
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};

/// Weighted single-point positioning on one epoch. Unknowns are the receiver
/// position and one clock bias per constellation present; weights are the
/// inverse pseudorange variances. Starts from the Earth center unless
/// `initial` is given.
SppSolution spp_solve(const std::vector<WeightedObservation>& observations,
                      const std::optional<EcefCoordd>& initial = std::nullopt, const SolverOptions& options = {});

struct YawCalibration {
  double psi{0};         // (-pi, pi]
  double drift_rate{0};  // window-average clock drift, m/s
  double residual_rms{0};
  int iterations{0};
};

struct YawOptions {
  int max_iterations{50};
  double step_tolerance{1e-12};
  double min_speed{0.1};     // m/s; horizontal speed needed for observability
  int coarse_scan_steps{72};
};

/// Doppler residual of one observation for yaw `psi` and drift `drift`:
/// doppler - [kappa^T (v_sat - R_n^e R_w^n(psi) v_world) + drift], with
/// kappa the unit line of sight from the anchor to the satellite.
double doppler_residual(const SatelliteObservation& sat, const Eigen::Vector3d& v_world, const AnchorPointd& anchor,
                        double psi, double drift);

/// Recovers the world-to-ENU yaw and the window-constant clock drift from
/// Doppler, holding the per-epoch world velocities fixed. The drift is
/// eliminated in closed form; yaw is found by a coarse scan followed by
/// damped Gauss-Newton. Lines of sight start at the anchor; with
/// world_positions (relative to the anchor) a second pass takes them from each
/// epoch's receiver.
YawCalibration yaw_calibrate(const EpochBatch& batch, const std::vector<Eigen::Vector3d>& world_velocities,
                             const AnchorPointd& anchor, const YawOptions& options = {},
                             const std::vector<Eigen::Vector3d>& world_positions = {});

struct RefinedAnchor {
  EcefCoordd anchor_ecef;
  std::vector<ClockState> per_epoch_biases;
  double residual_rms{0};  // sqrt(weighted cost / residual count)
  double initial_cost{0};
  double final_cost{0};
  int iterations{0};
};

struct AnchorOptions {
  SolverOptions solver{};
  // Clock random walk: residual variance is clock_sigma^2 * dt.
  double clock_sigma{0.1};
  double drift_rate{0};  // m/s, from yaw calibration
};

/// Refines the anchor (the ECEF position of the world origin) and per-epoch
/// clock biases over a window from pseudoranges plus clock-continuity
/// factors, with the world trajectory and yaw held fixed.
RefinedAnchor refine_anchor(const EpochBatch& batch, const AnchorPointd& coarse,
                            const std::vector<Eigen::Vector3d>& world_positions, double psi,
                            const AnchorOptions& options = {});

/// Weighted cost that refine_anchor minimizes, at a given anchor and clocks.
/// Pseudorange weights use elevations seen from `coarse`, as in the solver.
double anchor_cost(const EpochBatch& batch, const AnchorPointd& coarse, const EcefCoordd& anchor_ecef,
                   const std::vector<ClockState>& clocks, const std::vector<Eigen::Vector3d>& world_positions,
                   double psi, const AnchorOptions& options);

/// Receiver ECEF for a world position given the anchor and yaw.
EcefCoordd world_to_ecef(const AnchorPointd& anchor, double psi, const Eigen::Vector3d& p_world);

}  // namespace skynav
