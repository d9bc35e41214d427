#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "skynav/error.hpp"
#include "skynav/gnss.hpp"
#include "skynav/nlos.hpp"
#include "skynav/skyseg.hpp"
#include "skynav/synth.hpp"

namespace skynav::app {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitDegenerate = 3,
  kExitSync = 4,
  kExitUnderdetermined = 5,
  kExitDiverged = 6,
};

int exit_code_for(ErrorCode code);

struct RunConfig {
  int blur_kernel{5};
  SegmentationConfig::Method segmenter{SegmentationConfig::Method::Otsu};
  int local_window{31};
  int local_offset{5};
  double elevation_cutoff{15.0 * std::numbers::pi / 180.0};  // radians
  double timestamp_tolerance{0.5};                          // seconds
  int monte_carlo_trials{200};
  std::uint64_t seed{1};

  SegmentationConfig segmentation() const;
  NlosConfig nlos() const;
};

enum class FilterMode { None, Sky, Elevation };
FilterMode filter_mode_from_string(const std::string& name);

/// SPP with elevation weighting: a unit-weight pass fixes the geometry, then
/// observations at or below the horizon are dropped and the rest reweighted.
SppSolution weighted_spp(const std::vector<SatelliteObservation>& observations,
                         const std::optional<EcefCoordd>& initial = std::nullopt);

/// Horizontal (east-north) distance between two ECEF points in the ENU axes at `truth`.
double horizontal_error(const EcefCoordd& estimate, const EcefCoordd& truth);

// ---------------------------------------------------------------------------
// segment

struct SegmentReport {
  std::string image;
  OtsuResult otsu;
  int threshold{0};
  bool degenerate{false};
};

std::string format_segment_report(const SegmentReport& report);

/// Segments each image (directories expand to their .pgm/.ppm files) and
/// writes <stem>_mask.pgm, <stem>_overlay.ppm and <stem>_report.txt into
/// out_dir. Returns 2 when an input is unreadable, 3 when any image is
/// degenerate.
int cmd_segment(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
                const RunConfig& config, std::ostream& log);

// ---------------------------------------------------------------------------
// classify

struct ClassifyInputs {
  std::filesystem::path image;
  std::filesystem::path observations;
  std::filesystem::path calibration;
  std::filesystem::path anchor;
  std::filesystem::path poses;
  std::optional<double> image_time;  // defaults to the first observation epoch
  std::filesystem::path out_csv;
  std::filesystem::path out_overlay;  // empty: no overlay
};

inline constexpr const char* kClassifyHeader = "sat_id,u,v,elevation_deg,verdict,variance_pr,variance_dop";

int cmd_classify(const ClassifyInputs& inputs, const RunConfig& config, std::ostream& log);

// ---------------------------------------------------------------------------
// spp

struct SppInputs {
  std::filesystem::path observations;
  FilterMode filter{FilterMode::None};
  // Needed for FilterMode::Sky only.
  std::filesystem::path image;
  std::filesystem::path calibration;
  std::filesystem::path anchor;
  std::filesystem::path poses;
};

/// One report block per epoch in the observation file.
int cmd_spp(const SppInputs& inputs, const RunConfig& config, std::ostream& out, std::ostream& log);

// ---------------------------------------------------------------------------
// bench-seg

struct BenchRow {
  std::string method;
  double mean_iou{0};   // fraction
  double mean_time{0};  // seconds per image
};

struct BenchResult {
  std::size_t images{0};
  std::vector<BenchRow> rows;  // OTSU, Local
};

/// Pairs every <name>.pgm with <name>_mask.pgm. Throws Error(Parse) on an
/// unpaired file.
BenchResult bench_segmentation(const std::filesystem::path& dir, const RunConfig& config);
std::string format_bench_table(const BenchResult& result);
int cmd_bench_seg(const std::filesystem::path& dir, const RunConfig& config, std::ostream& out, std::ostream& log);

// ---------------------------------------------------------------------------
// synth

/// Writes `count` scenes as <prefix>_NNN.{pgm,_mask.pgm,_obs.csv,_calib.txt,
/// _anchor.csv,_pose.csv,_truth.csv,.scene}. With a scene file the first
/// scene is taken from it and later ones vary the seed.
int cmd_synth(const std::optional<std::filesystem::path>& scene_file, int count,
              const std::filesystem::path& out_dir, const RunConfig& config, std::ostream& log);

/// Scene used by the pipeline when no scene file is given.
synth::SceneSpec default_pipeline_scene(std::uint64_t seed);

// ---------------------------------------------------------------------------
// pipeline

struct EpochResult {
  double epoch_time{0};
  std::size_t kept{0};
  std::size_t rejected{0};
  std::size_t true_nlos{0};
  std::size_t correct{0};  // verdicts matching the synthetic truth
  EcefCoordd truth;
  EcefCoordd unfiltered;
  EcefCoordd filtered;
  double unfiltered_error{0};  // horizontal, meters
  double filtered_error{0};
};

struct PipelineResult {
  std::uint64_t seed{0};
  double true_psi{0};
  YawCalibration yaw;
  EcefCoordd true_anchor;
  EcefCoordd coarse_anchor;
  RefinedAnchor refined;
  // Second refinement over the observations the sky filter kept; empty when
  // that window is underdetermined.
  std::optional<RefinedAnchor> screened;
  std::vector<EpochResult> epochs;

  double psi_error() const;
  double coarse_anchor_error() const;
  double refined_anchor_error() const;
  double screened_anchor_error() const;  // NaN without a screened anchor
  double mean_unfiltered_error() const;
  double mean_filtered_error() const;
};

/// synth -> coarse SPP -> yaw -> anchor refinement -> per-epoch segmentation,
/// filtering and SPP -> anchor refinement on the kept observations. Solver
/// errors propagate as skynav::Error.
PipelineResult run_pipeline(const synth::SceneSpec& scene, const RunConfig& config);

/// Fixed-precision text report; identical for identical results.
std::string format_pipeline_report(const PipelineResult& result);

/// Writes report.txt, epochs.csv, trajectory_xy.csv and height_time.csv.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& out_dir);

int cmd_pipeline(const std::optional<std::filesystem::path>& scene_file, const std::filesystem::path& out_dir,
                 const RunConfig& config, std::ostream& out, std::ostream& log);

}  // namespace skynav::app
