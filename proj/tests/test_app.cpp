#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "skynav/app.hpp"
#include "skynav/io.hpp"

using namespace skynav;
using namespace skynav::app;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "skynav_test_app" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

ClassifyInputs classify_inputs(const fs::path& dir, const std::string& stem) {
  ClassifyInputs in;
  in.image = dir / (stem + ".pgm");
  in.observations = dir / (stem + "_obs.csv");
  in.calibration = dir / (stem + "_calib.txt");
  in.anchor = dir / (stem + "_anchor.csv");
  in.poses = dir / (stem + "_pose.csv");
  in.out_csv = dir / (stem + "_verdicts.csv");
  in.out_overlay = dir / (stem + "_verdicts.ppm");
  return in;
}

// Writes one synthetic scene from a scene file so tests can adjust it.
fs::path write_scene_set(const fs::path& dir, const synth::SceneSpec& scene) {
  const fs::path file = dir / "input.scene";
  std::ofstream out(file);
  io::write_scene(out, scene);
  out.close();
  std::ostringstream log;
  REQUIRE(cmd_synth(file, 1, dir, RunConfig{}, log) == kExitOk);
  return file;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ErrorCode::Parse) == 2);
  CHECK(exit_code_for(ErrorCode::EvenKernel) == 2);
  CHECK(exit_code_for(ErrorCode::EmptyHistogram) == 3);
  CHECK(exit_code_for(ErrorCode::TimestampMismatch) == 4);
  CHECK(exit_code_for(ErrorCode::Underdetermined) == 5);
  CHECK(exit_code_for(ErrorCode::Unobservable) == 5);
  CHECK(exit_code_for(ErrorCode::Diverged) == 6);
  CHECK(filter_mode_from_string("sky") == FilterMode::Sky);
  CHECK_THROWS_AS(filter_mode_from_string("median"), Error);
}

TEST_CASE("segment: constant image is degenerate but still reported") {
  const fs::path dir = fresh_dir("segment_constant");
  io::write_pgm(dir / "flat.pgm", GrayImage::Constant(40, 60, 128));
  std::ostringstream log;
  CHECK(cmd_segment({dir / "flat.pgm"}, dir / "out", RunConfig{}, log) == kExitDegenerate);
  const std::string report = slurp(dir / "out" / "flat_report.txt");
  CHECK(report.find("degenerate=1") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "flat_mask.pgm"));
}

TEST_CASE("segment: unreadable input") {
  const fs::path dir = fresh_dir("segment_missing");
  write_text(dir / "junk.pgm", "not an image");
  std::ostringstream log;
  CHECK(cmd_segment({dir / "junk.pgm"}, dir / "out", RunConfig{}, log) == kExitParse);
  CHECK(cmd_segment({dir / "nothing.pgm"}, dir / "out", RunConfig{}, log) == kExitParse);
}

TEST_CASE("segment: synthetic bimodal image") {
  const fs::path dir = fresh_dir("segment_synth");
  RunConfig config;
  config.seed = 3;
  std::ostringstream log;
  REQUIRE(cmd_synth(std::nullopt, 3, dir / "data", config, log) == kExitOk);
  REQUIRE(cmd_segment({dir / "data" / "scene_000.pgm"}, dir / "single", config, log) == kExitOk);
  const SkyMask truth = io::image_to_mask(io::read_gray_image(dir / "data" / "scene_000_mask.pgm"));
  const SkyMask mask = io::image_to_mask(io::read_gray_image(dir / "single" / "scene_000_mask.pgm"));
  CHECK(iou(mask, truth) >= 0.99);
  const std::string report = slurp(dir / "single" / "scene_000_report.txt");
  const int t = std::stoi(report.substr(report.find("threshold=") + 10));
  CHECK(t > 60);
  CHECK(t <= 200);
  const RgbImage overlay = io::read_color_image(dir / "single" / "scene_000_overlay.ppm");
  CHECK(((overlay.g.array() == 255) && (overlay.r.array() == 0)).any());

  // A directory run gives the same per-image reports as single runs.
  fs::create_directories(dir / "images");
  for (int i = 0; i < 3; ++i) {
    const std::string name = "scene_00" + std::to_string(i) + ".pgm";
    fs::copy_file(dir / "data" / name, dir / "images" / name);
  }
  REQUIRE(cmd_segment({dir / "images"}, dir / "batch", config, log) == kExitOk);
  CHECK(slurp(dir / "batch" / "scene_000_report.txt") == report);
  int reports = 0;
  for (const auto& e : fs::directory_iterator(dir / "batch")) reports += e.path().string().ends_with("_report.txt");
  CHECK(reports == 3);
}

TEST_CASE("classify: synthetic scene against ground truth") {
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const fs::path dir = fresh_dir("classify_" + std::to_string(seed));
    RunConfig config;
    config.seed = seed;
    std::ostringstream log;
    REQUIRE(cmd_synth(std::nullopt, 1, dir, config, log) == kExitOk);
    const ClassifyInputs in = classify_inputs(dir, "scene_000");
    REQUIRE(cmd_classify(in, config, log) == kExitOk);
    CHECK(fs::exists(in.out_overlay));
    CHECK(slurp(in.out_csv).rfind(kClassifyHeader, 0) == 0);

    std::map<std::string, std::string> truth;
    for (const auto& row : csv_rows(dir / "scene_000_truth.csv")) {
      if (std::stod(row[0]) == 0.0) truth[row[1]] = row[2];
    }
    const SkyMask mask = io::image_to_mask(io::read_gray_image(dir / "scene_000_mask.pgm"));
    const auto rows = csv_rows(in.out_csv);
    CHECK(rows.size() == truth.size());
    for (const auto& row : rows) {
      REQUIRE(row.size() == 7);
      if (row[1].empty()) continue;
      if (oracle::near_boundary(mask.bits, std::stod(row[1]), std::stod(row[2]), 2.0)) continue;
      ++total;
      agree += row[4] == truth.at(row[0]);
    }
  }
  CHECK(total >= 20);
  CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(total));
}

TEST_CASE("classify: empty, malformed and unsynchronized inputs") {
  const fs::path dir = fresh_dir("classify_errors");
  std::ostringstream log;
  REQUIRE(cmd_synth(std::nullopt, 1, dir, RunConfig{}, log) == kExitOk);
  ClassifyInputs in = classify_inputs(dir, "scene_000");

  const fs::path full = in.observations;
  in.observations = dir / "empty.csv";
  write_text(in.observations, std::string(io::kObservationHeader) + "\n");
  CHECK(cmd_classify(in, RunConfig{}, log) == kExitOk);
  CHECK(slurp(in.out_csv) == std::string(kClassifyHeader) + "\n");

  in.observations = dir / "bad.csv";
  std::string text = slurp(full);
  text.insert(text.find('\n', text.find('\n') + 1) + 1, "0,G99,G,1,2,3\n");
  write_text(in.observations, text);
  std::ostringstream bad_log;
  CHECK(cmd_classify(in, RunConfig{}, bad_log) == kExitParse);
  CHECK(bad_log.str().find("line 3") != std::string::npos);

  in.observations = full;
  in.image_time = 100.0;
  CHECK(cmd_classify(in, RunConfig{}, log) == kExitSync);
}

TEST_CASE("spp: too few satellites") {
  const fs::path dir = fresh_dir("spp_few");
  std::ostringstream log;
  REQUIRE(cmd_synth(std::nullopt, 1, dir, RunConfig{}, log) == kExitOk);
  auto obs = io::read_observations(dir / "scene_000_obs.csv");
  std::vector<SatelliteObservation> three;
  for (const auto& o : obs) {
    if (o.epoch_time == 0.0 && o.constellation == obs.front().constellation && three.size() < 3) three.push_back(o);
  }
  std::ofstream out(dir / "three.csv");
  io::write_observations(out, three);
  out.close();
  SppInputs in;
  in.observations = dir / "three.csv";
  std::ostringstream report;
  CHECK(cmd_spp(in, RunConfig{}, report, log) == kExitUnderdetermined);
}

TEST_CASE("spp: sky filter is a no-op on an all-LOS epoch") {
  const fs::path dir = fresh_dir("spp_open");
  synth::SceneSpec scene = default_pipeline_scene(9);
  scene.occluders.clear();
  scene.noise = synth::SceneNoise{};
  scene.motion.epochs = 1;
  for (auto& s : scene.satellites) s.direction.elevation = std::max(s.direction.elevation, 25 * oracle::kDeg);
  write_scene_set(dir, scene);

  SppInputs in;
  in.observations = dir / "scene_000_obs.csv";
  std::ostringstream none, sky, log;
  REQUIRE(cmd_spp(in, RunConfig{}, none, log) == kExitOk);
  in.filter = FilterMode::Sky;
  in.image = dir / "scene_000.pgm";
  in.calibration = dir / "scene_000_calib.txt";
  in.anchor = dir / "scene_000_anchor.csv";
  in.poses = dir / "scene_000_pose.csv";
  REQUIRE(cmd_spp(in, RunConfig{}, sky, log) == kExitOk);
  CHECK(sky.str() == none.str());
  CHECK(sky.str().find("rejected 0") != std::string::npos);

  // The solver itself agrees to well under a micrometre.
  const auto obs = io::read_observations(in.observations);
  const SppSolution s = weighted_spp(obs);
  CHECK((s.position_ecef.xyz - synth::receiver_ecef_at(scene, 0).xyz).norm() < 1e-6);
}

TEST_CASE("bench-seg: pairing and table") {
  const fs::path dir = fresh_dir("bench");
  RunConfig config;
  config.seed = 21;
  std::ostringstream log;
  REQUIRE(cmd_synth(std::nullopt, 3, dir, config, log) == kExitOk);
  const BenchResult a = bench_segmentation(dir, config);
  const BenchResult b = bench_segmentation(dir, config);
  REQUIRE(a.rows.size() == 2);
  CHECK(a.images == 3);
  CHECK(a.rows[0].method == "OTSU");
  CHECK(a.rows[0].mean_iou >= 0.95);
  CHECK(a.rows[0].mean_iou > a.rows[1].mean_iou);
  CHECK(a.rows[0].mean_iou == b.rows[0].mean_iou);
  CHECK(a.rows[1].mean_iou == b.rows[1].mean_iou);
  const std::string table = format_bench_table(a);
  CHECK(table.find("IoU(%)") != std::string::npos);
  CHECK(table.find("Local") != std::string::npos);

  io::write_pgm(dir / "lonely.pgm", GrayImage::Constant(8, 8, 10));
  std::ostringstream out;
  CHECK(cmd_bench_seg(dir, config, out, log) == kExitParse);
}

TEST_CASE("pipeline: default scene") {
  const PipelineResult r = run_pipeline(default_pipeline_scene(4), RunConfig{});
  CHECK(r.epochs.size() == 10);
  CHECK(r.psi_error() < 2 * oracle::kDeg);
  CHECK(r.mean_filtered_error() < r.mean_unfiltered_error());
  REQUIRE(r.screened.has_value());
  CHECK(r.screened_anchor_error() < r.refined_anchor_error());
  const std::string report = format_pipeline_report(r);
  for (const char* key : {"psi", "anchor", "filtered", "unfiltered"}) CHECK(report.find(key) != std::string::npos);
}

TEST_CASE("pipeline: fixed seed reruns are identical") {
  const fs::path dir = fresh_dir("pipeline");
  RunConfig config;
  config.seed = 12;
  std::ostringstream a, b, log;
  REQUIRE(cmd_pipeline(std::nullopt, dir / "a", config, a, log) == kExitOk);
  REQUIRE(cmd_pipeline(std::nullopt, dir / "b", config, b, log) == kExitOk);
  CHECK(a.str() == b.str());
  for (const char* f : {"report.txt", "epochs.csv", "trajectory_xy.csv", "height_time.csv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
}

TEST_CASE("pipeline: no occluders leaves little to filter") {
  synth::SceneSpec scene = default_pipeline_scene(6);
  scene.occluders.clear();
  const PipelineResult r = run_pipeline(scene, RunConfig{});
  std::size_t nlos = 0;
  for (const auto& e : r.epochs) nlos += e.true_nlos;
  CHECK(nlos == 0);
  CHECK(std::abs(r.mean_filtered_error() - r.mean_unfiltered_error()) < 1.0);
}
