#include "skynav/gnss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "damped_least_squares.hpp"
#include "skynav/frames.hpp"

namespace skynav {

void EpochBatch::validate() const {
  for (std::size_t k = 0; k < epochs.size(); ++k) {
    if (epochs[k].observations.empty()) {
      throw Error(ErrorCode::InvalidArgument, "epoch " + std::to_string(k) + " has no observations");
    }
    if (k > 0 && !(epochs[k].epoch_time > epochs[k - 1].epoch_time)) {
      throw Error(ErrorCode::InvalidArgument, "epoch times must be strictly increasing");
    }
  }
}

EcefCoordd world_to_ecef(const AnchorPointd& anchor, double psi, const Eigen::Vector3d& p_world) {
  return EcefCoordd(anchor.ecef.xyz + anchor.r_e_to_n.transpose() * rotation_about_up(psi) * p_world);
}

// ---------------------------------------------------------------------------
// Single-point positioning

namespace {

class SppProblem {
 public:
  explicit SppProblem(const std::vector<WeightedObservation>& observations) : obs_(observations) {
    std::fill(bias_index_.begin(), bias_index_.end(), -1);
    int next = 3;
    for (const auto& o : obs_) {
      int& slot = bias_index_[static_cast<int>(o.obs.constellation)];
      if (slot < 0) slot = next++;
    }
    unknowns_ = next;
    weights_.resize(static_cast<Eigen::Index>(obs_.size()));
    for (std::size_t i = 0; i < obs_.size(); ++i) weights_[static_cast<Eigen::Index>(i)] = 1.0 / obs_[i].pr_variance;
  }

  int unknowns() const { return unknowns_; }
  int constellations() const { return unknowns_ - 3; }
  int bias_index(Constellation c) const { return bias_index_[static_cast<int>(c)]; }
  const Eigen::VectorXd& weights() const { return weights_; }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
    const auto m = static_cast<Eigen::Index>(obs_.size());
    r.resize(m);
    jac.setZero(m, unknowns_);
    const Eigen::Vector3d p = x.head<3>();
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& o = obs_[static_cast<std::size_t>(i)].obs;
      const Eigen::Vector3d los = o.pos_ecef.xyz - p;
      const double range = los.norm();
      const int b = bias_index(o.constellation);
      r[i] = o.pseudorange - (range + x[b]);
      jac.block<1, 3>(i, 0) = -los.transpose() / range;
      jac(i, b) = 1.0;
    }
  }

  double step_norm(const Eigen::VectorXd& dx) const { return dx.head<3>().norm(); }

 private:
  const std::vector<WeightedObservation>& obs_;
  std::array<int, kConstellationCount> bias_index_{};
  int unknowns_{3};
  Eigen::VectorXd weights_;
};

}  // namespace

SppSolution spp_solve(const std::vector<WeightedObservation>& observations, const std::optional<EcefCoordd>& initial,
                      const SolverOptions& options) {
  SppProblem problem(observations);
  if (static_cast<int>(observations.size()) < problem.unknowns()) {
    throw Error(ErrorCode::Underdetermined, std::to_string(observations.size()) + " observations for " +
                                                std::to_string(problem.unknowns()) + " unknowns");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.unknowns());
  if (initial) x.head<3>() = initial->xyz;

  const detail::LeastSquaresSummary summary = detail::damped_gauss_newton(problem, x, options);

  SppSolution sol;
  sol.position_ecef = EcefCoordd(x.head<3>());
  for (int c = 0; c < kConstellationCount; ++c) {
    const int b = problem.bias_index(static_cast<Constellation>(c));
    if (b >= 0) sol.clock.biases[c] = x[b];
  }
  sol.iterations = summary.iterations;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(x, r, jac);
  sol.post_fit_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  const Eigen::MatrixXd cov = summary.normal.ldlt().solve(Eigen::MatrixXd::Identity(x.size(), x.size()));
  sol.covariance = 0.5 * (cov.topLeftCorner<3, 3>() + cov.topLeftCorner<3, 3>().transpose());
  return sol;
}

// ---------------------------------------------------------------------------
// Yaw calibration

double doppler_residual(const SatelliteObservation& sat, const Eigen::Vector3d& v_world, const AnchorPointd& anchor,
                        double psi, double drift) {
  const Eigen::Vector3d kappa = (sat.pos_ecef.xyz - anchor.ecef.xyz).normalized();
  const Eigen::Vector3d v_receiver = anchor.r_e_to_n.transpose() * rotation_about_up(psi) * v_world;
  return sat.doppler_range_rate - (kappa.dot(sat.vel_ecef - v_receiver) + drift);
}

namespace {

// One Doppler term with the yaw dependence made explicit:
// residual = offset + los_enu^T Rot_up(psi) v_world - drift.
struct DopplerTerm {
  double weight;
  double offset;
  Eigen::Vector3d los_enu;
  Eigen::Vector3d v_world;

  double yaw_term(double psi) const {
    const double c = std::cos(psi), s = std::sin(psi);
    return los_enu.x() * (c * v_world.x() - s * v_world.y()) + los_enu.y() * (s * v_world.x() + c * v_world.y()) +
           los_enu.z() * v_world.z();
  }
  double yaw_term_derivative(double psi) const {
    const double c = std::cos(psi), s = std::sin(psi);
    return los_enu.x() * (-s * v_world.x() - c * v_world.y()) + los_enu.y() * (c * v_world.x() - s * v_world.y());
  }
};

struct YawEvaluation {
  double cost{0};
  double drift{0};
  double weight_sum{0};
};

YawEvaluation evaluate_yaw(const std::vector<DopplerTerm>& terms, double psi) {
  YawEvaluation e;
  double weighted = 0;
  for (const auto& t : terms) {
    e.weight_sum += t.weight;
    weighted += t.weight * (t.offset + t.yaw_term(psi));
  }
  e.drift = weighted / e.weight_sum;
  for (const auto& t : terms) {
    const double r = t.offset + t.yaw_term(psi) - e.drift;
    e.cost += t.weight * r * r;
  }
  return e;
}

}  // namespace

namespace {

// Doppler terms with the line of sight taken from `receivers[k]` (ECEF).
std::vector<DopplerTerm> doppler_terms(const EpochBatch& batch, const std::vector<Eigen::Vector3d>& world_velocities,
                                       const AnchorPointd& anchor, const std::vector<Eigen::Vector3d>& receivers) {
  std::vector<DopplerTerm> terms;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (const auto& sat : batch.epochs[k].observations) {
      const Eigen::Vector3d kappa = (sat.pos_ecef.xyz - receivers[k]).normalized();
      const double elevation = std::asin(std::clamp((anchor.r_e_to_n * kappa).z(), -1.0, 1.0));
      if (elevation <= 0.0) continue;
      terms.push_back(DopplerTerm{1.0 / doppler_variance(sat, elevation),
                                  sat.doppler_range_rate - kappa.dot(sat.vel_ecef), anchor.r_e_to_n * kappa,
                                  world_velocities[k]});
    }
  }
  if (terms.size() < 2) throw Error(ErrorCode::Underdetermined, "fewer than two usable Doppler observations");
  return terms;
}

// Damped Gauss-Newton on psi with the drift eliminated in closed form.
YawCalibration solve_yaw(const std::vector<DopplerTerm>& terms, double psi, const YawOptions& options) {
  YawCalibration out;
  YawEvaluation current = evaluate_yaw(terms, psi);
  double lambda = 1e-3;
  bool converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    out.iterations = it;
    double mean_derivative = 0;
    for (const auto& t : terms) mean_derivative += t.weight * t.yaw_term_derivative(psi);
    mean_derivative /= current.weight_sum;
    double jtj = 0, jtr = 0;
    for (const auto& t : terms) {
      const double j = t.yaw_term_derivative(psi) - mean_derivative;
      const double r = t.offset + t.yaw_term(psi) - current.drift;
      jtj += t.weight * j * j;
      jtr += t.weight * j * r;
    }
    if (!(jtj > 0.0)) throw Error(ErrorCode::Unobservable, "Doppler residuals do not depend on yaw");
    const double step = -jtr / (jtj * (1.0 + lambda));
    const YawEvaluation trial = evaluate_yaw(terms, psi + step);
    if (trial.cost <= current.cost) {
      psi += step;
      current = trial;
      lambda /= 10.0;
    } else {
      lambda *= 10.0;
    }
    if (std::abs(step) < options.step_tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error(ErrorCode::Diverged, "yaw calibration did not converge");

  out.psi = wrap_pi(psi);
  out.drift_rate = current.drift;
  double sum_sq = 0;
  for (const auto& t : terms) {
    const double r = t.offset + t.yaw_term(psi) - current.drift;
    sum_sq += r * r;
  }
  out.residual_rms = std::sqrt(sum_sq / static_cast<double>(terms.size()));
  return out;
}

}  // namespace

YawCalibration yaw_calibrate(const EpochBatch& batch, const std::vector<Eigen::Vector3d>& world_velocities,
                             const AnchorPointd& anchor, const YawOptions& options,
                             const std::vector<Eigen::Vector3d>& world_positions) {
  if (batch.epochs.empty()) throw Error(ErrorCode::InvalidArgument, "empty epoch batch");
  if (world_velocities.size() != batch.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one world velocity per epoch required");
  }
  if (!world_positions.empty() && world_positions.size() != batch.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one world position per epoch required");
  }
  batch.validate();
  bool observable = false;
  for (const auto& v : world_velocities) observable = observable || v.head<2>().norm() > options.min_speed;
  if (!observable) throw Error(ErrorCode::Unobservable, "horizontal speed below threshold in every epoch");

  const std::vector<Eigen::Vector3d> at_anchor(batch.size(), anchor.ecef.xyz);
  std::vector<DopplerTerm> terms = doppler_terms(batch, world_velocities, anchor, at_anchor);

  // Coarse scan picks the basin; Gauss-Newton polishes.
  double psi = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < options.coarse_scan_steps; ++i) {
    const double candidate = -std::numbers::pi + 2.0 * std::numbers::pi * i / options.coarse_scan_steps;
    const double cost = evaluate_yaw(terms, candidate).cost;
    if (cost < best) {
      best = cost;
      psi = candidate;
    }
  }
  YawCalibration out = solve_yaw(terms, psi, options);
  if (world_positions.empty()) return out;

  // Second pass: lines of sight from each epoch's receiver under the first
  // estimate of psi.
  std::vector<Eigen::Vector3d> receivers;
  for (const auto& p : world_positions) receivers.push_back(world_to_ecef(anchor, out.psi, p).xyz);
  terms = doppler_terms(batch, world_velocities, anchor, receivers);
  const int first_iterations = out.iterations;
  out = solve_yaw(terms, out.psi, options);
  out.iterations += first_iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Anchor refinement

namespace {

class AnchorProblem {
 public:
  AnchorProblem(const EpochBatch& batch, const AnchorPointd& coarse, const std::vector<Eigen::Vector3d>& positions,
                double psi, const AnchorOptions& options)
      : batch_(batch), positions_(positions), yaw_(rotation_about_up(psi)), options_(options) {
    clock_index_.resize(batch.size());
    int next = 3;
    std::vector<double> weights;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      clock_index_[k].fill(-1);
      const Eigen::Vector3d receiver = world_to_ecef(coarse, psi, positions[k]).xyz;
      const AnchorPointd here = AnchorPointd::from_ecef(EcefCoordd(receiver));
      for (const auto& sat : batch.epochs[k].observations) {
        const double elevation = elevation_azimuth(ecef_to_enu_point(here, sat.pos_ecef)).elevation;
        if (elevation <= 0.0) continue;
        int& slot = clock_index_[k][static_cast<int>(sat.constellation)];
        if (slot < 0) slot = next++;
        pseudoranges_.push_back(PseudorangeRow{k, &sat, slot});
        weights.push_back(1.0 / pseudorange_variance(sat, elevation));
      }
    }
    for (std::size_t k = 1; k < batch.size(); ++k) {
      const double dt = batch.epochs[k].epoch_time - batch.epochs[k - 1].epoch_time;
      for (int c = 0; c < kConstellationCount; ++c) {
        if (clock_index_[k][c] < 0 || clock_index_[k - 1][c] < 0) continue;
        clock_rows_.push_back(ClockRow{clock_index_[k - 1][c], clock_index_[k][c], dt});
        weights.push_back(1.0 / (options.clock_sigma * options.clock_sigma * dt));
      }
    }
    unknowns_ = next;
    weights_ = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  }

  int unknowns() const { return unknowns_; }
  Eigen::Index rows() const { return weights_.size(); }
  const Eigen::VectorXd& weights() const { return weights_; }
  int clock_index(std::size_t epoch, int constellation) const { return clock_index_[epoch][constellation]; }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
    r.resize(rows());
    jac.setZero(rows(), unknowns_);
    const Eigen::Vector3d anchor = x.head<3>();
    // R_e^n follows the current anchor estimate; its derivative is negligible.
    const Eigen::Matrix3d r_n_to_e = AnchorPointd::from_ecef(EcefCoordd(anchor)).r_e_to_n.transpose();
    Eigen::Index row = 0;
    for (const auto& p : pseudoranges_) {
      const Eigen::Vector3d receiver = anchor + r_n_to_e * yaw_ * positions_[p.epoch];
      const Eigen::Vector3d los = p.sat->pos_ecef.xyz - receiver;
      const double range = los.norm();
      r[row] = p.sat->pseudorange - (range + x[p.clock]);
      jac.block<1, 3>(row, 0) = -los.transpose() / range;
      jac(row, p.clock) = 1.0;
      ++row;
    }
    for (const auto& c : clock_rows_) {
      r[row] = options_.drift_rate * c.dt - (x[c.current] - x[c.previous]);
      jac(row, c.current) = 1.0;
      jac(row, c.previous) = -1.0;
      ++row;
    }
  }

  double step_norm(const Eigen::VectorXd& dx) const { return dx.head<3>().norm(); }

  /// Clock biases minimizing the pseudorange cost alone at a fixed anchor.
  Eigen::VectorXd initial_state(const Eigen::Vector3d& anchor) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(unknowns_);
    x.head<3>() = anchor;
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    evaluate(x, r, jac);
    Eigen::VectorXd num = Eigen::VectorXd::Zero(unknowns_), den = Eigen::VectorXd::Zero(unknowns_);
    for (std::size_t i = 0; i < pseudoranges_.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      num[pseudoranges_[i].clock] += weights_[row] * r[row];
      den[pseudoranges_[i].clock] += weights_[row];
    }
    for (int j = 3; j < unknowns_; ++j) x[j] = num[j] / den[j];
    return x;
  }

 private:
  struct PseudorangeRow {
    std::size_t epoch;
    const SatelliteObservation* sat;
    int clock;
  };
  struct ClockRow {
    int previous;
    int current;
    double dt;
  };

  const EpochBatch& batch_;
  const std::vector<Eigen::Vector3d>& positions_;
  Eigen::Matrix3d yaw_;
  AnchorOptions options_;
  std::vector<std::array<int, kConstellationCount>> clock_index_;
  std::vector<PseudorangeRow> pseudoranges_;
  std::vector<ClockRow> clock_rows_;
  int unknowns_{3};
  Eigen::VectorXd weights_;
};

void check_window(const EpochBatch& batch, const std::vector<Eigen::Vector3d>& world_positions) {
  if (batch.epochs.empty()) throw Error(ErrorCode::InvalidArgument, "empty epoch batch");
  if (world_positions.size() != batch.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one world position per epoch required");
  }
  batch.validate();
}

}  // namespace

double anchor_cost(const EpochBatch& batch, const AnchorPointd& coarse, const EcefCoordd& anchor_ecef,
                   const std::vector<ClockState>& clocks, const std::vector<Eigen::Vector3d>& world_positions,
                   double psi, const AnchorOptions& options) {
  check_window(batch, world_positions);
  if (clocks.size() != batch.size()) throw Error(ErrorCode::DimensionMismatch, "one clock state per epoch required");
  AnchorProblem problem(batch, coarse, world_positions, psi, options);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.unknowns());
  x.head<3>() = anchor_ecef.xyz;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (int c = 0; c < kConstellationCount; ++c) {
      const int j = problem.clock_index(k, c);
      if (j < 0) continue;
      if (!clocks[k].biases[c]) throw Error(ErrorCode::InvalidArgument, "missing clock bias for an observed system");
      x[j] = *clocks[k].biases[c];
    }
  }
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(x, r, jac);
  return r.dot(problem.weights().cwiseProduct(r));
}

RefinedAnchor refine_anchor(const EpochBatch& batch, const AnchorPointd& coarse,
                            const std::vector<Eigen::Vector3d>& world_positions, double psi,
                            const AnchorOptions& options) {
  check_window(batch, world_positions);
  AnchorProblem problem(batch, coarse, world_positions, psi, options);
  if (problem.rows() < problem.unknowns()) {
    throw Error(ErrorCode::Underdetermined, std::to_string(problem.rows()) + " residuals for " +
                                                std::to_string(problem.unknowns()) + " unknowns");
  }
  Eigen::VectorXd x = problem.initial_state(coarse.ecef.xyz);
  const detail::LeastSquaresSummary summary = detail::damped_gauss_newton(problem, x, options.solver);

  RefinedAnchor out;
  out.anchor_ecef = EcefCoordd(x.head<3>());
  out.per_epoch_biases.resize(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out.per_epoch_biases[k].drift_rate = options.drift_rate;
    for (int c = 0; c < kConstellationCount; ++c) {
      const int j = problem.clock_index(k, c);
      if (j >= 0) out.per_epoch_biases[k].biases[c] = x[j];
    }
  }
  out.initial_cost = summary.initial_cost;
  out.final_cost = summary.final_cost;
  out.iterations = summary.iterations;
  out.residual_rms = std::sqrt(summary.final_cost / static_cast<double>(problem.rows()));
  return out;
}

}  // namespace skynav
