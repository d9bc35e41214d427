#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "skynav/app.hpp"

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

struct Flags {
  skynav::app::RunConfig config;
  std::string segmenter{"otsu"};
  double cutoff_deg{15.0};
};

void add_config_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--blur-kernel", f.config.blur_kernel, "Mean blur kernel size (odd)")->capture_default_str();
  cmd->add_option("--segmenter", f.segmenter, "otsu or local")
      ->check(CLI::IsMember({"otsu", "local"}))
      ->capture_default_str();
  cmd->add_option("--local-window", f.config.local_window, "Local threshold window")->capture_default_str();
  cmd->add_option("--local-offset", f.config.local_offset, "Local threshold offset")->capture_default_str();
  cmd->add_option("--elevation-cutoff-deg", f.cutoff_deg, "Fallback elevation cutoff")->capture_default_str();
  cmd->add_option("--timestamp-tolerance", f.config.timestamp_tolerance, "Seconds")->capture_default_str();
  cmd->add_option("--trials", f.config.monte_carlo_trials, "Monte Carlo trials")->capture_default_str();
  cmd->add_option("--seed", f.config.seed, "Random seed")->capture_default_str();
}

void finalize(Flags& f) {
  f.config.segmenter = f.segmenter == "local" ? skynav::SegmentationConfig::Method::Local
                                              : skynav::SegmentationConfig::Method::Otsu;
  f.config.elevation_cutoff = f.cutoff_deg * kDeg;
}

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace skynav::app;

  CLI::App app{"Sky-image NLOS screening for GNSS positioning"};
  app.require_subcommand(1);
  Flags flags;

  std::vector<fs::path> seg_inputs;
  fs::path seg_out{"."};
  auto* segment = app.add_subcommand("segment", "Segment sky images with Otsu or local thresholding");
  segment->add_option("inputs", seg_inputs, "Images or directories")->required();
  segment->add_option("-o,--out", seg_out, "Output directory")->capture_default_str();
  add_config_flags(segment, flags);

  ClassifyInputs classify_in;
  auto* classify = app.add_subcommand("classify", "Label satellites LOS/NLOS against a sky mask");
  classify->add_option("--image", classify_in.image)->required();
  classify->add_option("--observations", classify_in.observations)->required();
  classify->add_option("--calibration", classify_in.calibration)->required();
  classify->add_option("--anchor", classify_in.anchor)->required();
  classify->add_option("--poses", classify_in.poses)->required();
  classify->add_option("--image-time", classify_in.image_time, "Image timestamp (s)");
  classify->add_option("-o,--out", classify_in.out_csv, "Verdict CSV")->required();
  classify->add_option("--overlay", classify_in.out_overlay, "Annotated PPM");
  add_config_flags(classify, flags);

  SppInputs spp_in;
  std::string filter{"none"};
  auto* spp = app.add_subcommand("spp", "Single point positioning per epoch");
  spp->add_option("--observations", spp_in.observations)->required();
  spp->add_option("--filter", filter, "none, sky or elevation")
      ->check(CLI::IsMember({"none", "sky", "elevation"}))
      ->capture_default_str();
  spp->add_option("--image", spp_in.image, "Sky image (sky filter)");
  spp->add_option("--calibration", spp_in.calibration, "Calibration (sky filter)");
  spp->add_option("--anchor", spp_in.anchor, "Anchor (sky filter)");
  spp->add_option("--poses", spp_in.poses, "Poses (sky filter)");
  add_config_flags(spp, flags);

  fs::path bench_dir;
  auto* bench = app.add_subcommand("bench-seg", "Mean IoU and time of OTSU vs Local on a mask dataset");
  bench->add_option("dir", bench_dir, "Directory of <name>.pgm and <name>_mask.pgm")->required();
  add_config_flags(bench, flags);

  std::optional<fs::path> synth_scene;
  int synth_count = 1;
  fs::path synth_out{"."};
  auto* synth = app.add_subcommand("synth", "Write synthetic scenes and their ground truth");
  synth->add_option("--scene", synth_scene, "Scene description file");
  synth->add_option("--count", synth_count, "Number of scenes")->capture_default_str();
  synth->add_option("-o,--out", synth_out, "Output directory")->capture_default_str();
  add_config_flags(synth, flags);

  std::optional<fs::path> pipeline_scene;
  fs::path pipeline_out;
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end run on a synthetic scene");
  pipeline->add_option("--scene", pipeline_scene, "Scene description file (default: random from --seed)");
  pipeline->add_option("-o,--out", pipeline_out, "Directory for report and plot data");
  add_config_flags(pipeline, flags);

  CLI11_PARSE(app, argc, argv);
  finalize(flags);
  const RunConfig& config = flags.config;

  if (*segment) return cmd_segment(seg_inputs, seg_out, config, std::cerr);
  if (*classify) return cmd_classify(classify_in, config, std::cerr);
  if (*spp) {
    spp_in.filter = filter_mode_from_string(filter);
    if (spp_in.filter == FilterMode::Sky &&
        (spp_in.image.empty() || spp_in.calibration.empty() || spp_in.anchor.empty() || spp_in.poses.empty())) {
      std::cerr << "error: --filter sky needs --image, --calibration, --anchor and --poses\n";
      return kExitParse;
    }
    return cmd_spp(spp_in, config, std::cout, std::cerr);
  }
  if (*bench) return cmd_bench_seg(bench_dir, config, std::cout, std::cerr);
  if (*synth) return cmd_synth(synth_scene, synth_count, synth_out, config, std::cerr);
  if (*pipeline) return cmd_pipeline(pipeline_scene, pipeline_out, config, std::cout, std::cerr);
  return kExitFailure;
}
