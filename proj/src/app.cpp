#include "skynav/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "skynav/io.hpp"

namespace skynav::app {
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Rgb {
  std::uint8_t r, g, b;
};
constexpr Rgb kGreen{0, 255, 0};
constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kYellow{255, 255, 0};

RgbImage gray_to_rgb(const GrayImage& gray) { return RgbImage{gray, gray, gray}; }

void put(RgbImage& img, Eigen::Index row, Eigen::Index col, Rgb c) {
  if (row < 0 || col < 0 || row >= img.r.rows() || col >= img.r.cols()) return;
  img.r(row, col) = c.r;
  img.g(row, col) = c.g;
  img.b(row, col) = c.b;
}

void draw_boundary(RgbImage& img, const SkyMask& mask) {
  const MaskRaster boundary = mask_boundary(mask);
  for (Eigen::Index row = 0; row < boundary.rows(); ++row) {
    for (Eigen::Index col = 0; col < boundary.cols(); ++col) {
      if (boundary(row, col)) put(img, row, col, kGreen);
    }
  }
}

void draw_disc(RgbImage& img, const PixelCoordd& px, int radius, Rgb c) {
  const long u = std::lround(px.u), v = std::lround(px.v);
  for (long dv = -radius; dv <= radius; ++dv) {
    for (long du = -radius; du <= radius; ++du) {
      if (du * du + dv * dv <= radius * radius) put(img, v + dv, u + du, c);
    }
  }
}

bool is_raster(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm";
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && is_raster(entry.path())) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<SatelliteObservation> observations_of(const std::vector<WeightedObservation>& kept) {
  std::vector<SatelliteObservation> out;
  out.reserve(kept.size());
  for (const auto& w : kept) out.push_back(w.obs);
  return out;
}

const Epoch* nearest_epoch(const EpochBatch& batch, double t) {
  const Epoch* best = nullptr;
  for (const auto& e : batch.epochs) {
    if (!best || std::abs(e.epoch_time - t) < std::abs(best->epoch_time - t)) best = &e;
  }
  return best;
}

const io::TimedPose* nearest_pose(const std::vector<io::TimedPose>& poses, double t) {
  const io::TimedPose* best = nullptr;
  for (const auto& p : poses) {
    if (!best || std::abs(p.epoch_time - t) < std::abs(best->epoch_time - t)) best = &p;
  }
  return best;
}

// Camera rig for one image: anchor at the world origin, yaw from the anchor file.
struct ImageContext {
  io::Calibration calibration;
  io::AnchorRecord anchor;
  AnchorPointd anchor_point;
  FrameChaind chain;
  SkyMask mask;
  GrayImage image;
};

ImageContext load_image_context(const fs::path& image, const fs::path& calibration, const fs::path& anchor,
                                const fs::path& poses, double image_time, const RunConfig& config) {
  ImageContext ctx;
  ctx.image = io::read_gray_image(image);
  ctx.calibration = io::read_calibration(calibration);
  ctx.anchor = io::read_anchor(anchor);
  const auto pose_list = io::read_poses(poses);
  const io::TimedPose* pose = nearest_pose(pose_list, image_time);
  if (!pose || std::abs(pose->epoch_time - image_time) > config.timestamp_tolerance) {
    throw Error(ErrorCode::TimestampMismatch, fmt::format("no pose within {} s of t={}", config.timestamp_tolerance,
                                                          image_time));
  }
  const auto& intr = ctx.calibration.intrinsics;
  if (ctx.image.cols() != intr.image_width || ctx.image.rows() != intr.image_height) {
    throw Error(ErrorCode::Parse, fmt::format("image is {}x{} but calibration says {}x{}", ctx.image.cols(),
                                              ctx.image.rows(), intr.image_width, intr.image_height));
  }
  ctx.anchor_point = AnchorPointd::from_geodetic(ctx.anchor.geodetic);
  ctx.chain.yaw_offset = ctx.anchor.psi;
  ctx.chain.r_sky_to_body = ctx.calibration.r_sky_to_body;
  ctx.chain.body_pose = pose->pose;
  ctx.mask = segment_sky(ctx.image, config.segmentation());
  return ctx;
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EvenKernel:
    case ErrorCode::DimensionMismatch:
      return kExitParse;
    case ErrorCode::EmptyHistogram:
      return kExitDegenerate;
    case ErrorCode::TimestampMismatch:
    case ErrorCode::MixedEpochs:
      return kExitSync;
    case ErrorCode::Underdetermined:
    case ErrorCode::SingularGeometry:
    case ErrorCode::Unobservable:
      return kExitUnderdetermined;
    case ErrorCode::Diverged:
    case ErrorCode::NoConvergence:
      return kExitDiverged;
    default:
      return kExitFailure;
  }
}

SegmentationConfig RunConfig::segmentation() const {
  SegmentationConfig s;
  s.blur_kernel = blur_kernel;
  s.method = segmenter;
  s.local_window = local_window;
  s.local_offset = local_offset;
  return s;
}

NlosConfig RunConfig::nlos() const {
  NlosConfig n;
  n.elevation_cutoff = elevation_cutoff;
  return n;
}

FilterMode filter_mode_from_string(const std::string& name) {
  if (name == "none") return FilterMode::None;
  if (name == "sky") return FilterMode::Sky;
  if (name == "elevation") return FilterMode::Elevation;
  throw Error(ErrorCode::InvalidArgument, "filter must be none, sky or elevation");
}

SppSolution weighted_spp(const std::vector<SatelliteObservation>& observations,
                         const std::optional<EcefCoordd>& initial) {
  std::vector<WeightedObservation> first;
  first.reserve(observations.size());
  for (const auto& o : observations) first.push_back(weigh(o, std::numbers::pi / 2));
  const SppSolution rough = spp_solve(first, initial);

  const AnchorPointd here = AnchorPointd::from_ecef(rough.position_ecef);
  std::vector<WeightedObservation> second;
  for (const auto& o : observations) {
    const double elevation = elevation_azimuth(ecef_to_enu_point(here, o.pos_ecef)).elevation;
    if (elevation > 0.0) second.push_back(weigh(o, elevation));
  }
  return spp_solve(second, rough.position_ecef);
}

double horizontal_error(const EcefCoordd& estimate, const EcefCoordd& truth) {
  const AnchorPointd at = AnchorPointd::from_ecef(truth);
  const EnuCoordd d = ecef_to_enu_point(at, estimate);
  return std::hypot(d.east(), d.north());
}

// ---------------------------------------------------------------------------
// segment

std::string format_segment_report(const SegmentReport& r) {
  return fmt::format("{}: threshold={} sigma_b2={:.6f} degenerate={}", r.image, r.threshold,
                     r.otsu.between_class_variance, r.degenerate ? 1 : 0);
}

int cmd_segment(const std::vector<fs::path>& inputs, const fs::path& out_dir, const RunConfig& config,
                std::ostream& log) {
  int status = kExitOk;
  fs::create_directories(out_dir);
  for (const auto& path : expand_inputs(inputs)) {
    GrayImage image;
    try {
      image = io::read_gray_image(path);
    } catch (const Error& e) {
      fmt::print(log, "error: {}\n", e.what());
      status = std::max<int>(status, kExitParse);
      continue;
    }
    SegmentReport report;
    report.image = path.filename().string();
    const SkyMask mask = segment_sky(image, config.segmentation(), &report.otsu);
    report.threshold = mask.threshold;
    report.degenerate = mask.degenerate;

    const std::string stem = path.stem().string();
    io::write_pgm(out_dir / (stem + "_mask.pgm"), io::mask_to_image(mask));
    RgbImage overlay = gray_to_rgb(image);
    draw_boundary(overlay, mask);
    io::write_ppm(out_dir / (stem + "_overlay.ppm"), overlay);
    std::ofstream(out_dir / (stem + "_report.txt")) << format_segment_report(report) << '\n';
    fmt::print(log, "{}\n", format_segment_report(report));
    if (report.degenerate && status == kExitOk) status = kExitDegenerate;
  }
  return status;
}

// ---------------------------------------------------------------------------
// classify

int cmd_classify(const ClassifyInputs& in, const RunConfig& config, std::ostream& log) {
  try {
    const EpochBatch batch = io::group_epochs(io::read_observations(in.observations));
    std::ofstream csv(in.out_csv);
    if (!csv) throw Error(ErrorCode::Parse, "cannot write " + in.out_csv.string());
    csv << kClassifyHeader << '\n';
    if (batch.epochs.empty()) {
      fmt::print(log, "no observations\n");
      return kExitOk;
    }

    const double image_time = in.image_time.value_or(batch.epochs.front().epoch_time);
    const Epoch* epoch = nearest_epoch(batch, image_time);
    if (std::abs(epoch->epoch_time - image_time) > config.timestamp_tolerance) {
      throw Error(ErrorCode::TimestampMismatch,
                  fmt::format("no observation epoch within {} s of image time {}", config.timestamp_tolerance,
                              image_time));
    }
    const ImageContext ctx = load_image_context(in.image, in.calibration, in.anchor, in.poses, image_time, config);

    RgbImage overlay = gray_to_rgb(ctx.image);
    draw_boundary(overlay, ctx.mask);
    std::size_t los = 0, nlos = 0;
    for (const auto& sat : epoch->observations) {
      const BackProjection bp = back_project(ctx.chain, ctx.anchor_point, ctx.calibration.intrinsics, sat);
      const Classification c = classify(bp, ctx.mask, bp.azel.elevation, config.elevation_cutoff);
      std::string u, v, var_pr, var_dop;
      if (c.pixel) {
        u = fixed(c.pixel->u);
        v = fixed(c.pixel->v);
        draw_disc(overlay, *c.pixel, 6, c.verdict == Verdict::LOS ? kRed : kYellow);
      }
      if (c.elevation > 0.0) {
        var_pr = fixed(pseudorange_variance(sat, c.elevation));
        var_dop = fixed(doppler_variance(sat, c.elevation));
      }
      (c.verdict == Verdict::LOS ? los : nlos) += 1;
      fmt::print(csv, "{},{},{},{},{},{},{}\n", sat.sat_id, u, v, fixed(c.elevation / kDeg), to_string(c.verdict),
                 var_pr, var_dop);
    }
    if (!in.out_overlay.empty()) io::write_ppm(in.out_overlay, overlay);
    fmt::print(log, "epoch {}: {} LOS, {} NLOS, threshold {}\n", fixed(epoch->epoch_time), los, nlos,
               ctx.mask.threshold);
    return kExitOk;
  } catch (const Error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return exit_code_for(e.code());
  }
}

// ---------------------------------------------------------------------------
// spp

int cmd_spp(const SppInputs& in, const RunConfig& config, std::ostream& out, std::ostream& log) {
  try {
    const EpochBatch batch = io::group_epochs(io::read_observations(in.observations));
    if (batch.epochs.empty()) throw Error(ErrorCode::Underdetermined, "no observations");
    for (const auto& epoch : batch.epochs) {
      std::vector<SatelliteObservation> used = epoch.observations;
      std::size_t rejected = 0;
      if (in.filter == FilterMode::Sky) {
        const ImageContext ctx =
            load_image_context(in.image, in.calibration, in.anchor, in.poses, epoch.epoch_time, config);
        const FilteredEpoch f = filter_epoch(epoch.observations, ctx.chain, ctx.anchor_point,
                                             ctx.calibration.intrinsics, ctx.mask, config.nlos());
        used = observations_of(f.kept);
        rejected = f.rejected.size();
      } else if (in.filter == FilterMode::Elevation) {
        const SppSolution rough = weighted_spp(epoch.observations);
        const FilteredEpoch f = filter_by_elevation(epoch.observations, rough.position_ecef, config.elevation_cutoff);
        used = observations_of(f.kept);
        rejected = f.rejected.size();
      }
      const SppSolution s = weighted_spp(used);
      const GeodeticCoordd g = ecef_to_geodetic(s.position_ecef);
      const auto& p = s.position_ecef.xyz;
      fmt::print(out, "epoch {}\n", fixed(epoch.epoch_time));
      fmt::print(out, "  ecef_m {:.4f} {:.4f} {:.4f}\n", p.x(), p.y(), p.z());
      fmt::print(out, "  geodetic {:.9f} {:.9f} {:.4f}\n", g.latitude / kDeg, g.longitude / kDeg, g.height);
      for (int c = 0; c < kConstellationCount; ++c) {
        if (s.clock.biases[c]) {
          fmt::print(out, "  clock_{} {:.4f}\n", constellation_letter(static_cast<Constellation>(c)), *s.clock.biases[c]);
        }
      }
      fmt::print(out, "  post_fit_rms_m {:.4f}\n  kept {}\n  rejected {}\n", s.post_fit_rms, used.size(), rejected);
    }
    return kExitOk;
  } catch (const Error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return exit_code_for(e.code());
  }
}

// ---------------------------------------------------------------------------
// bench-seg

BenchResult bench_segmentation(const fs::path& dir, const RunConfig& config) {
  std::map<std::string, fs::path> images, masks;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    if (!entry.is_regular_file() || p.extension() != ".pgm") continue;
    const std::string stem = p.stem().string();
    constexpr std::string_view suffix = "_mask";
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
      masks[stem.substr(0, stem.size() - suffix.size())] = p;
    } else {
      images[stem] = p;
    }
  }
  for (const auto& [name, path] : images) {
    if (!masks.count(name)) throw Error(ErrorCode::Parse, "no mask for " + path.string());
  }
  for (const auto& [name, path] : masks) {
    if (!images.count(name)) throw Error(ErrorCode::Parse, "no image for " + path.string());
  }

  struct Method {
    const char* name;
    SegmentationConfig::Method method;
  };
  BenchResult result;
  result.images = images.size();
  for (const Method m : {Method{"OTSU", SegmentationConfig::Method::Otsu},
                         Method{"Local", SegmentationConfig::Method::Local}}) {
    RunConfig c = config;
    c.segmenter = m.method;
    double iou_sum = 0, time_sum = 0;
    for (const auto& [name, path] : images) {
      const GrayImage image = io::read_gray_image(path);
      const SkyMask truth = io::image_to_mask(io::read_gray_image(masks.at(name)));
      const auto start = std::chrono::steady_clock::now();
      const SkyMask mask = segment_sky(image, c.segmentation());
      time_sum += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      iou_sum += iou(mask, truth);
    }
    const double n = std::max<double>(1.0, static_cast<double>(images.size()));
    result.rows.push_back(BenchRow{m.name, iou_sum / n, time_sum / n});
  }
  return result;
}

std::string format_bench_table(const BenchResult& r) {
  std::string out = fmt::format("{:<8}{:>12}{:>12}\n", "Method", "IoU(%)", "Time(s)");
  for (const auto& row : r.rows) {
    out += fmt::format("{:<8}{:>12.4f}{:>12.4f}\n", row.method, 100.0 * row.mean_iou, row.mean_time);
  }
  return out;
}

int cmd_bench_seg(const fs::path& dir, const RunConfig& config, std::ostream& out, std::ostream& log) {
  try {
    const BenchResult r = bench_segmentation(dir, config);
    fmt::print(out, "{} images\n{}", r.images, format_bench_table(r));
    return kExitOk;
  } catch (const Error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return exit_code_for(e.code());
  }
}

// ---------------------------------------------------------------------------
// synth

synth::SceneSpec default_pipeline_scene(std::uint64_t seed) {
  synth::RandomSceneOptions options;
  options.width = 640;
  options.height = 512;
  options.satellites = 10;
  options.nlos_count = 3;
  options.noise = synth::SceneNoise{10.0, 2.0, 0.1};
  options.motion.epochs = 10;
  options.motion.interval = 1.0;
  options.motion.velocity_world = Eigen::Vector3d(1.5, 0.8, 0.0);
  return synth::random_scene(seed, options);
}

int cmd_synth(const std::optional<fs::path>& scene_file, int count, const fs::path& out_dir, const RunConfig& config,
              std::ostream& log) {
  try {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be at least 1");
    std::optional<synth::SceneSpec> base;
    if (scene_file) base = io::read_scene(*scene_file);
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
      synth::SceneSpec scene = default_pipeline_scene(config.seed + static_cast<std::uint64_t>(i));
      if (base) {
        scene = *base;
        scene.seed = base->seed + static_cast<std::uint64_t>(i);
      }
      const std::string stem = (out_dir / fmt::format("scene_{:03d}", i)).string();
      const auto [image, truth] = synth::render(scene, 0);
      const synth::SyntheticWindow window = synth::simulate_window(scene);

      io::write_pgm(stem + ".pgm", image);
      io::write_pgm(stem + "_mask.pgm", io::mask_to_image(truth.mask));
      std::vector<SatelliteObservation> all;
      for (const auto& e : window.batch.epochs) all.insert(all.end(), e.observations.begin(), e.observations.end());
      std::ofstream obs(stem + "_obs.csv");
      io::write_observations(obs, all);
      std::ofstream calib(stem + "_calib.txt");
      io::write_calibration(calib, io::Calibration{scene.intrinsics, scene.rig.r_sky_to_body});
      std::ofstream anchor(stem + "_anchor.csv");
      io::write_anchor(anchor, io::AnchorRecord{scene.anchor, scene.rig.yaw_offset});
      std::vector<io::TimedPose> poses;
      for (int k = 0; k < scene.motion.epochs; ++k) {
        BodyPosed pose = synth::rig_at(scene, k).body_pose;
        pose.t_body_in_world -= scene.rig.anchor_world;
        poses.push_back(io::TimedPose{window.batch.epochs[static_cast<std::size_t>(k)].epoch_time, pose});
      }
      std::ofstream pose_out(stem + "_pose.csv");
      io::write_poses(pose_out, poses);
      std::ofstream truth_out(stem + "_truth.csv");
      truth_out << "epoch_time,sat_id,verdict\n";
      for (std::size_t k = 0; k < window.batch.size(); ++k) {
        for (std::size_t s = 0; s < scene.satellites.size(); ++s) {
          fmt::print(truth_out, "{},{},{}\n", window.batch.epochs[k].epoch_time, scene.satellites[s].sat_id,
                     to_string(window.visibility[k][s]));
        }
      }
      std::ofstream scene_out(stem + ".scene");
      io::write_scene(scene_out, scene);
      fmt::print(log, "wrote {}\n", stem);
    }
    return kExitOk;
  } catch (const Error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return exit_code_for(e.code());
  }
}

// ---------------------------------------------------------------------------
// pipeline

double PipelineResult::psi_error() const { return std::abs(wrap_pi(yaw.psi - true_psi)); }
double PipelineResult::coarse_anchor_error() const { return (coarse_anchor.xyz - true_anchor.xyz).norm(); }
double PipelineResult::refined_anchor_error() const { return (refined.anchor_ecef.xyz - true_anchor.xyz).norm(); }
double PipelineResult::screened_anchor_error() const {
  return screened ? (screened->anchor_ecef.xyz - true_anchor.xyz).norm() : std::numeric_limits<double>::quiet_NaN();
}

double PipelineResult::mean_unfiltered_error() const {
  double sum = 0;
  for (const auto& e : epochs) sum += e.unfiltered_error;
  return epochs.empty() ? 0.0 : sum / static_cast<double>(epochs.size());
}

double PipelineResult::mean_filtered_error() const {
  double sum = 0;
  for (const auto& e : epochs) sum += e.filtered_error;
  return epochs.empty() ? 0.0 : sum / static_cast<double>(epochs.size());
}

PipelineResult run_pipeline(const synth::SceneSpec& scene, const RunConfig& config) {
  scene.validate();
  const synth::SyntheticWindow window = synth::simulate_window(scene);
  PipelineResult result;
  result.seed = scene.seed;
  result.true_psi = scene.rig.yaw_offset;
  result.true_anchor = geodetic_to_ecef(scene.anchor);

  // Coarse anchor: mean of the unfiltered per-epoch fixes.
  std::vector<SppSolution> unfiltered;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& epoch : window.batch.epochs) {
    unfiltered.push_back(weighted_spp(epoch.observations));
    sum += unfiltered.back().position_ecef.xyz;
  }
  result.coarse_anchor = EcefCoordd(sum / static_cast<double>(unfiltered.size()));
  const AnchorPointd coarse = AnchorPointd::from_ecef(result.coarse_anchor);

  std::vector<Eigen::Vector3d> positions;
  for (const auto& p : window.world_positions) positions.push_back(p - scene.rig.anchor_world);
  result.yaw = yaw_calibrate(window.batch, window.world_velocities, coarse, YawOptions{}, positions);

  AnchorOptions anchor_options;
  anchor_options.drift_rate = result.yaw.drift_rate;
  result.refined = refine_anchor(window.batch, coarse, positions, result.yaw.psi, anchor_options);
  const AnchorPointd anchor = AnchorPointd::from_ecef(result.refined.anchor_ecef);

  EpochBatch kept_batch;
  for (std::size_t k = 0; k < window.batch.size(); ++k) {
    const int epoch_index = static_cast<int>(k);
    const Epoch& epoch = window.batch.epochs[k];
    const GrayImage image = synth::render(scene, epoch_index).first;
    const SkyMask mask = segment_sky(image, config.segmentation());

    FrameChaind chain = synth::rig_at(scene, epoch_index);
    chain.yaw_offset = result.yaw.psi;
    const FilteredEpoch filtered =
        filter_epoch(epoch.observations, chain, anchor, scene.intrinsics, mask, config.nlos());

    std::map<std::string, Verdict> truth;
    for (std::size_t s = 0; s < scene.satellites.size(); ++s) {
      truth[scene.satellites[s].sat_id] = window.visibility[k][s];
    }
    EpochResult e;
    e.epoch_time = epoch.epoch_time;
    e.kept = filtered.kept.size();
    e.rejected = filtered.rejected.size();
    for (const auto& [id, v] : truth) e.true_nlos += v == Verdict::NLOS ? 1 : 0;
    for (const auto& w : filtered.kept) e.correct += truth.at(w.obs.sat_id) == Verdict::LOS ? 1 : 0;
    for (const auto& r : filtered.rejected) e.correct += truth.at(r.obs.sat_id) == Verdict::NLOS ? 1 : 0;

    e.truth = window.receiver_ecef[k];
    e.unfiltered = unfiltered[k].position_ecef;
    e.filtered = weighted_spp(observations_of(filtered.kept), e.unfiltered).position_ecef;
    e.unfiltered_error = horizontal_error(e.unfiltered, e.truth);
    e.filtered_error = horizontal_error(e.filtered, e.truth);
    result.epochs.push_back(e);
    kept_batch.epochs.push_back(Epoch{epoch.epoch_time, observations_of(filtered.kept)});
  }

  // NLOS delays bias the first refinement; repeat it on the screened window.
  try {
    result.screened = refine_anchor(kept_batch, anchor, positions, result.yaw.psi, anchor_options);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Underdetermined && e.code() != ErrorCode::SingularGeometry) throw;
  }
  return result;
}

std::string format_pipeline_report(const PipelineResult& r) {
  std::string out;
  out += fmt::format("seed {}\nepochs {}\n", r.seed, r.epochs.size());
  out += fmt::format("psi_true_deg {}\npsi_estimated_deg {}\npsi_error_deg {}\n", fixed(r.true_psi / kDeg),
                     fixed(r.yaw.psi / kDeg), fixed(r.psi_error() / kDeg));
  out += fmt::format("clock_drift_mps {}\nyaw_residual_rms_mps {}\n", fixed(r.yaw.drift_rate),
                     fixed(r.yaw.residual_rms));
  out += fmt::format("anchor_coarse_error_m {}\nanchor_refined_error_m {}\n", fixed(r.coarse_anchor_error()),
                     fixed(r.refined_anchor_error()));
  out += fmt::format("anchor_cost_initial {}\nanchor_cost_final {}\nanchor_iterations {}\n",
                     fixed(r.refined.initial_cost), fixed(r.refined.final_cost), r.refined.iterations);
  out += fmt::format("anchor_screened_error_m {}\n", r.screened ? fixed(r.screened_anchor_error()) : "n/a");
  out += "epoch_time kept rejected true_nlos correct error_unfiltered_m error_filtered_m\n";
  for (const auto& e : r.epochs) {
    out += fmt::format("{} {} {} {} {} {} {}\n", fixed(e.epoch_time), e.kept, e.rejected, e.true_nlos, e.correct,
                       fixed(e.unfiltered_error), fixed(e.filtered_error));
  }
  out += fmt::format("mean_error_unfiltered_m {}\nmean_error_filtered_m {}\n", fixed(r.mean_unfiltered_error()),
                     fixed(r.mean_filtered_error()));
  return out;
}

void write_pipeline_outputs(const PipelineResult& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "report.txt") << format_pipeline_report(r);

  std::ofstream epochs(out_dir / "epochs.csv");
  epochs << "epoch_time,kept,rejected,true_nlos,correct,error_unfiltered_m,error_filtered_m\n";
  for (const auto& e : r.epochs) {
    fmt::print(epochs, "{},{},{},{},{},{},{}\n", fixed(e.epoch_time), e.kept, e.rejected, e.true_nlos, e.correct,
               fixed(e.unfiltered_error), fixed(e.filtered_error));
  }

  // Trajectories in the ENU axes of the true anchor.
  const AnchorPointd frame = AnchorPointd::from_ecef(r.true_anchor);
  std::ofstream xy(out_dir / "trajectory_xy.csv");
  xy << "epoch_time,true_e,true_n,unfiltered_e,unfiltered_n,filtered_e,filtered_n\n";
  std::ofstream height(out_dir / "height_time.csv");
  height << "epoch_time,true_u,unfiltered_u,filtered_u\n";
  for (const auto& e : r.epochs) {
    const EnuCoordd t = ecef_to_enu_point(frame, e.truth);
    const EnuCoordd u = ecef_to_enu_point(frame, e.unfiltered);
    const EnuCoordd f = ecef_to_enu_point(frame, e.filtered);
    fmt::print(xy, "{},{},{},{},{},{},{}\n", fixed(e.epoch_time), fixed(t.east()), fixed(t.north()), fixed(u.east()),
               fixed(u.north()), fixed(f.east()), fixed(f.north()));
    fmt::print(height, "{},{},{},{}\n", fixed(e.epoch_time), fixed(t.up()), fixed(u.up()), fixed(f.up()));
  }
}

int cmd_pipeline(const std::optional<fs::path>& scene_file, const fs::path& out_dir, const RunConfig& config,
                 std::ostream& out, std::ostream& log) {
  try {
    const synth::SceneSpec scene = scene_file ? io::read_scene(*scene_file) : default_pipeline_scene(config.seed);
    const PipelineResult result = run_pipeline(scene, config);
    const std::string report = format_pipeline_report(result);
    out << report;
    if (!out_dir.empty()) write_pipeline_outputs(result, out_dir);
    return kExitOk;
  } catch (const Error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return exit_code_for(e.code());
  }
}

}  // namespace skynav::app
