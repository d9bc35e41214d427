#include "skynav/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Geometry>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace skynav::io {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + what);
}

double to_double(const std::string& s, std::size_t line) {
  double value = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || s.empty()) parse_error(line, "'" + s + "' is not a number");
  return value;
}

std::vector<double> to_doubles(const std::string& s, std::size_t line) {
  std::vector<double> out;
  for (const auto& f : split(s, ',')) out.push_back(to_double(f, line));
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + path.string());
  return in;
}

// Reads `key = value` lines; '#' starts a comment. Keys may repeat.
std::vector<std::tuple<std::string, std::string, std::size_t>> read_key_values(std::istream& in) {
  std::vector<std::tuple<std::string, std::string, std::size_t>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_error(number, "expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number);
  }
  return out;
}

std::string format_matrix(const Eigen::Matrix3d& m) {
  return fmt::format("{},{},{},{},{},{},{},{},{}", m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0),
                     m(2, 1), m(2, 2));
}

Eigen::Matrix3d parse_matrix(const std::string& value, std::size_t line) {
  const auto v = to_doubles(value, line);
  if (v.size() != 9) parse_error(line, "rotation needs 9 values");
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  if (!(m.transpose() * m).isIdentity(1e-6) || std::abs(m.determinant() - 1.0) > 1e-6) {
    parse_error(line, "rotation is not orthonormal with determinant +1");
  }
  return m;
}

std::string read_header_line(std::istream& in, const char* expected, const char* what) {
  std::string header;
  if (!std::getline(in, header)) parse_error(1, std::string("missing ") + what + " header");
  header = trim(header);
  if (header != expected) parse_error(1, std::string("header must be '") + expected + "'");
  return header;
}

// Netpbm header: magic, width, height, maxval, with '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  while (in >> token) {
    if (token[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return token;
  }
  throw Error(ErrorCode::Parse, "truncated image header");
}

struct RawImage {
  std::string magic;
  int width{0}, height{0};
  std::vector<std::uint8_t> data;
};

RawImage read_netpbm(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  RawImage img;
  img.magic = next_token(in);
  if (img.magic != "P5" && img.magic != "P6") throw Error(ErrorCode::Parse, path.string() + ": not a P5/P6 image");
  try {
    img.width = std::stoi(next_token(in));
    img.height = std::stoi(next_token(in));
    if (std::stoi(next_token(in)) != 255) throw Error(ErrorCode::Parse, path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::Parse, path.string() + ": malformed header");
  }
  in.get();  // single whitespace before the raster
  const std::size_t channels = img.magic == "P6" ? 3 : 1;
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw Error(ErrorCode::Parse, path.string() + ": truncated raster");
  }
  return img;
}

}  // namespace

// ---------------------------------------------------------------------------
// Observations

std::vector<SatelliteObservation> read_observations(std::istream& in) {
  read_header_line(in, kObservationHeader, "observation");
  std::vector<SatelliteObservation> out;
  std::string line;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 14) parse_error(number, "expected 14 columns, got " + std::to_string(f.size()));
    SatelliteObservation o;
    o.epoch_time = to_double(f[0], number);
    o.sat_id = f[1];
    if (f[2].size() != 1) parse_error(number, "constellation must be one of G, R, E, C");
    try {
      o.constellation = constellation_from_letter(f[2][0]);
    } catch (const Error&) {
      parse_error(number, "constellation must be one of G, R, E, C");
    }
    o.pos_ecef = EcefCoordd(to_double(f[3], number), to_double(f[4], number), to_double(f[5], number));
    o.vel_ecef = Eigen::Vector3d(to_double(f[6], number), to_double(f[7], number), to_double(f[8], number));
    o.pseudorange = to_double(f[9], number);
    o.doppler_range_rate = to_double(f[10], number);
    o.n_si = to_double(f[11], number);
    o.n_p = to_double(f[12], number);
    o.n_d = to_double(f[13], number);
    if (!(o.n_si > 0 && o.n_p > 0 && o.n_d > 0)) parse_error(number, "noise indices must be positive");
    if (!(o.pseudorange > 1e6)) parse_error(number, "pseudorange must exceed 1e6 m");
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<SatelliteObservation> read_observations(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_observations(in);
}

void write_observations(std::ostream& out, const std::vector<SatelliteObservation>& observations) {
  out << kObservationHeader << '\n';
  for (const auto& o : observations) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", o.epoch_time, o.sat_id,
               constellation_letter(o.constellation), o.pos_ecef.xyz.x(), o.pos_ecef.xyz.y(), o.pos_ecef.xyz.z(),
               o.vel_ecef.x(), o.vel_ecef.y(), o.vel_ecef.z(), o.pseudorange, o.doppler_range_rate, o.n_si, o.n_p,
               o.n_d);
  }
}

EpochBatch group_epochs(const std::vector<SatelliteObservation>& observations) {
  std::map<double, std::vector<SatelliteObservation>> by_time;
  for (const auto& o : observations) by_time[o.epoch_time].push_back(o);
  EpochBatch batch;
  for (auto& [t, obs] : by_time) batch.epochs.push_back(Epoch{t, std::move(obs)});
  return batch;
}

// ---------------------------------------------------------------------------
// Calibration

Calibration read_calibration(std::istream& in) {
  Calibration cal;
  auto& intr = cal.intrinsics;
  for (const auto& [key, value, line] : read_key_values(in)) {
    if (key == "fx") intr.fx = to_double(value, line);
    else if (key == "fy") intr.fy = to_double(value, line);
    else if (key == "cx") intr.cx = to_double(value, line);
    else if (key == "cy") intr.cy = to_double(value, line);
    else if (key == "alpha") intr.alpha = to_double(value, line);
    else if (key == "k1") intr.k[0] = to_double(value, line);
    else if (key == "k2") intr.k[1] = to_double(value, line);
    else if (key == "k3") intr.k[2] = to_double(value, line);
    else if (key == "k4") intr.k[3] = to_double(value, line);
    else if (key == "width") intr.image_width = static_cast<int>(to_double(value, line));
    else if (key == "height") intr.image_height = static_cast<int>(to_double(value, line));
    else if (key == "valid_radius") intr.valid_radius = to_double(value, line);
    else if (key == "r_sky_i") cal.r_sky_to_body = parse_matrix(value, line);
    else parse_error(line, "unknown calibration key '" + key + "'");
  }
  try {
    intr.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  return cal;
}

Calibration read_calibration(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_calibration(in);
}

void write_calibration(std::ostream& out, const Calibration& cal) {
  const auto& i = cal.intrinsics;
  fmt::print(out, "fx={}\nfy={}\ncx={}\ncy={}\nalpha={}\nk1={}\nk2={}\nk3={}\nk4={}\nwidth={}\nheight={}\n", i.fx,
             i.fy, i.cx, i.cy, i.alpha, i.k[0], i.k[1], i.k[2], i.k[3], i.image_width, i.image_height);
  fmt::print(out, "valid_radius={}\nr_sky_i={}\n", i.valid_radius, format_matrix(cal.r_sky_to_body));
}

// ---------------------------------------------------------------------------
// Poses and anchors

std::vector<TimedPose> read_poses(std::istream& in) {
  read_header_line(in, kPoseHeader, "pose");
  std::vector<TimedPose> out;
  std::string line;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto v = to_doubles(trim(line), number);
    if (v.size() != 8) parse_error(number, "expected 8 columns");
    const Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
    if (!(q.norm() > 1e-9)) parse_error(number, "zero quaternion");
    TimedPose p;
    p.epoch_time = v[0];
    p.pose.t_body_in_world = Eigen::Vector3d(v[1], v[2], v[3]);
    p.pose.r_body_to_world = q.normalized().toRotationMatrix();
    out.push_back(p);
  }
  return out;
}

std::vector<TimedPose> read_poses(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_poses(in);
}

void write_poses(std::ostream& out, const std::vector<TimedPose>& poses) {
  out << kPoseHeader << '\n';
  for (const auto& p : poses) {
    const Eigen::Quaterniond q(p.pose.r_body_to_world);
    const auto& t = p.pose.t_body_in_world;
    fmt::print(out, "{},{},{},{},{},{},{},{}\n", p.epoch_time, t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z());
  }
}

AnchorRecord read_anchor(std::istream& in) {
  read_header_line(in, kAnchorHeader, "anchor");
  std::string line;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto v = to_doubles(trim(line), number);
    if (v.size() != 4) parse_error(number, "expected 4 columns");
    if (std::abs(v[0]) > 90.0) parse_error(number, "latitude outside [-90, 90]");
    AnchorRecord a;
    a.geodetic = GeodeticCoordd{v[0] * kDeg, wrap_pi(v[1] * kDeg), v[2]};
    a.psi = wrap_pi(v[3] * kDeg);
    return a;
  }
  parse_error(number, "anchor file has no data row");
}

AnchorRecord read_anchor(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_anchor(in);
}

void write_anchor(std::ostream& out, const AnchorRecord& a) {
  out << kAnchorHeader << '\n';
  fmt::print(out, "{},{},{},{}\n", a.geodetic.latitude / kDeg, a.geodetic.longitude / kDeg, a.geodetic.height,
             a.psi / kDeg);
}

// ---------------------------------------------------------------------------
// Rasters

GrayImage read_gray_image(const std::filesystem::path& path) {
  const RawImage raw = read_netpbm(path);
  if (raw.magic == "P5") {
    return Eigen::Map<const GrayImage>(raw.data.data(), raw.height, raw.width);
  }
  return to_grayscale(read_color_image(path));
}

RgbImage read_color_image(const std::filesystem::path& path) {
  const RawImage raw = read_netpbm(path);
  RgbImage rgb;
  if (raw.magic == "P5") {
    rgb.r = Eigen::Map<const GrayImage>(raw.data.data(), raw.height, raw.width);
    rgb.g = rgb.r;
    rgb.b = rgb.r;
    return rgb;
  }
  using Strided = Eigen::Map<const GrayImage, 0, Eigen::Stride<Eigen::Dynamic, 3>>;
  const Eigen::Stride<Eigen::Dynamic, 3> stride(3 * raw.width, 3);
  rgb.r = Strided(raw.data.data() + 0, raw.height, raw.width, stride);
  rgb.g = Strided(raw.data.data() + 1, raw.height, raw.width, stride);
  rgb.b = Strided(raw.data.data() + 2, raw.height, raw.width, stride);
  return rgb;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Parse, "cannot write " + path.string());
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Parse, "cannot write " + path.string());
  out << "P6\n" << image.r.cols() << ' ' << image.r.rows() << "\n255\n";
  std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(image.r.size()) * 3);
  for (Eigen::Index i = 0; i < image.r.size(); ++i) {
    interleaved[3 * i + 0] = image.r.data()[i];
    interleaved[3 * i + 1] = image.g.data()[i];
    interleaved[3 * i + 2] = image.b.data()[i];
  }
  out.write(reinterpret_cast<const char*>(interleaved.data()), static_cast<std::streamsize>(interleaved.size()));
}

GrayImage mask_to_image(const SkyMask& mask) {
  return mask.bits.unaryExpr([](bool b) -> std::uint8_t { return b ? 255 : 0; });
}

SkyMask image_to_mask(const GrayImage& image) {
  SkyMask mask;
  mask.bits = (image.array() >= std::uint8_t{128}).matrix();
  mask.threshold = 128;
  return mask;
}

// ---------------------------------------------------------------------------
// Scene description

synth::SceneSpec read_scene(std::istream& in) {
  const auto entries = read_key_values(in);
  std::map<std::string, std::pair<std::string, std::size_t>> last;
  for (const auto& [key, value, line] : entries) last[key] = {value, line};
  auto get = [&last](const std::string& key) -> const std::pair<std::string, std::size_t>* {
    const auto it = last.find(key);
    return it == last.end() ? nullptr : &it->second;
  };

  std::uint64_t seed = 1;
  if (const auto* s = get("seed")) seed = static_cast<std::uint64_t>(to_double(s->first, s->second));

  synth::SceneSpec scene;
  if (const auto* base = get("base"); base && base->first == "random") {
    synth::RandomSceneOptions options;
    if (const auto* v = get("width")) options.width = static_cast<int>(to_double(v->first, v->second));
    if (const auto* v = get("height")) options.height = static_cast<int>(to_double(v->first, v->second));
    if (const auto* v = get("random_satellites")) options.satellites = static_cast<int>(to_double(v->first, v->second));
    if (const auto* v = get("nlos_count")) options.nlos_count = static_cast<int>(to_double(v->first, v->second));
    scene = synth::random_scene(seed, options);
  } else if (base) {
    parse_error(base->second, "base must be 'random' when given");
  } else {
    int width = 1280, height = 1024;
    if (const auto* v = get("width")) width = static_cast<int>(to_double(v->first, v->second));
    if (const auto* v = get("height")) height = static_cast<int>(to_double(v->first, v->second));
    scene.intrinsics = synth::default_intrinsics(width, height);
  }
  scene.seed = seed;

  bool occluders_reset = false, satellites_reset = false;
  for (const auto& [key, value, line] : entries) {
    auto number = [&, &value = value, &line = line]() { return to_double(value, line); };
    auto numbers = [&, &value = value, &line = line](std::size_t n) {
      const auto v = to_doubles(value, line);
      if (v.size() != n) parse_error(line, key + " needs " + std::to_string(n) + " values");
      return v;
    };
    if (key == "seed" || key == "base" || key == "width" || key == "height" || key == "random_satellites" ||
        key == "nlos_count") {
      continue;
    } else if (key == "anchor") {
      const auto v = numbers(3);
      scene.anchor = GeodeticCoordd{v[0] * kDeg, wrap_pi(v[1] * kDeg), v[2]};
    } else if (key == "psi_deg") {
      scene.rig.yaw_offset = wrap_pi(number() * kDeg);
    } else if (key == "occluder") {
      if (!occluders_reset) scene.occluders.clear();
      occluders_reset = true;
      const auto v = numbers(3);
      scene.occluders.push_back(synth::Occluder{v[0] * kDeg, v[1] * kDeg, v[2] * kDeg});
    } else if (key == "satellite") {
      if (!satellites_reset) scene.satellites.clear();
      satellites_reset = true;
      const auto f = split(value, ',');
      if (f.size() != 8 || f[1].size() != 1) parse_error(line, "satellite = id, system, az, el, range, vx, vy, vz");
      synth::SceneSatellite s;
      s.sat_id = f[0];
      s.constellation = constellation_from_letter(f[1][0]);
      s.direction = AzEld{to_double(f[2], line) * kDeg, to_double(f[3], line) * kDeg};
      s.range = to_double(f[4], line);
      s.vel_ecef = Eigen::Vector3d(to_double(f[5], line), to_double(f[6], line), to_double(f[7], line));
      scene.satellites.push_back(s);
    } else if (key == "fx") scene.intrinsics.fx = number();
    else if (key == "fy") scene.intrinsics.fy = number();
    else if (key == "cx") scene.intrinsics.cx = number();
    else if (key == "cy") scene.intrinsics.cy = number();
    else if (key == "alpha") scene.intrinsics.alpha = number();
    else if (key == "k1") scene.intrinsics.k[0] = number();
    else if (key == "k2") scene.intrinsics.k[1] = number();
    else if (key == "k3") scene.intrinsics.k[2] = number();
    else if (key == "k4") scene.intrinsics.k[3] = number();
    else if (key == "valid_radius") scene.intrinsics.valid_radius = number();
    else if (key == "r_sky_i") scene.rig.r_sky_to_body = parse_matrix(value, line);
    else if (key == "body_quaternion") {
      const auto v = numbers(4);
      scene.rig.body_pose.r_body_to_world = Eigen::Quaterniond(v[0], v[1], v[2], v[3]).normalized().toRotationMatrix();
    } else if (key == "body_position") {
      const auto v = numbers(3);
      scene.rig.body_pose.t_body_in_world = Eigen::Vector3d(v[0], v[1], v[2]);
    } else if (key == "anchor_world") {
      const auto v = numbers(3);
      scene.rig.anchor_world = Eigen::Vector3d(v[0], v[1], v[2]);
    } else if (key == "pixel_sigma") scene.noise.pixel_sigma = number();
    else if (key == "pr_sigma") scene.noise.pr_sigma = number();
    else if (key == "dop_sigma") scene.noise.dop_sigma = number();
    else if (key == "nlos_delay") scene.nlos_delay = number();
    else if (key == "epochs") scene.motion.epochs = static_cast<int>(number());
    else if (key == "interval") scene.motion.interval = number();
    else if (key == "start_time") scene.motion.start_time = number();
    else if (key == "velocity") {
      const auto v = numbers(3);
      scene.motion.velocity_world = Eigen::Vector3d(v[0], v[1], v[2]);
    } else if (key == "clock_bias") {
      const auto v = numbers(4);
      for (int c = 0; c < kConstellationCount; ++c) scene.clock_bias[c] = v[c];
    } else if (key == "clock_drift") scene.clock_drift = number();
    else if (key == "sky_intensity") scene.sky_intensity = number();
    else if (key == "occluder_intensity") scene.occluder_intensity = number();
    else parse_error(line, "unknown scene key '" + key + "'");
  }
  try {
    scene.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  return scene;
}

synth::SceneSpec read_scene(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_scene(in);
}

void write_scene(std::ostream& out, const synth::SceneSpec& s) {
  const auto& i = s.intrinsics;
  fmt::print(out, "seed = {}\nanchor = {}, {}, {}\npsi_deg = {}\n", s.seed, s.anchor.latitude / kDeg,
             s.anchor.longitude / kDeg, s.anchor.height, s.rig.yaw_offset / kDeg);
  fmt::print(out, "width = {}\nheight = {}\nfx = {}\nfy = {}\ncx = {}\ncy = {}\nalpha = {}\n", i.image_width,
             i.image_height, i.fx, i.fy, i.cx, i.cy, i.alpha);
  fmt::print(out, "k1 = {}\nk2 = {}\nk3 = {}\nk4 = {}\nvalid_radius = {}\n", i.k[0], i.k[1], i.k[2], i.k[3],
             i.valid_radius);
  fmt::print(out, "r_sky_i = {}\n", format_matrix(s.rig.r_sky_to_body));
  const Eigen::Quaterniond q(s.rig.body_pose.r_body_to_world);
  const auto& t = s.rig.body_pose.t_body_in_world;
  const auto& a = s.rig.anchor_world;
  fmt::print(out, "body_quaternion = {}, {}, {}, {}\nbody_position = {}, {}, {}\nanchor_world = {}, {}, {}\n", q.w(),
             q.x(), q.y(), q.z(), t.x(), t.y(), t.z(), a.x(), a.y(), a.z());
  for (const auto& o : s.occluders) {
    fmt::print(out, "occluder = {}, {}, {}\n", o.az_begin / kDeg, o.az_end / kDeg, o.max_elevation / kDeg);
  }
  for (const auto& sat : s.satellites) {
    fmt::print(out, "satellite = {}, {}, {}, {}, {}, {}, {}, {}\n", sat.sat_id, constellation_letter(sat.constellation),
               sat.direction.azimuth / kDeg, sat.direction.elevation / kDeg, sat.range, sat.vel_ecef.x(),
               sat.vel_ecef.y(), sat.vel_ecef.z());
  }
  fmt::print(out, "pixel_sigma = {}\npr_sigma = {}\ndop_sigma = {}\nnlos_delay = {}\n", s.noise.pixel_sigma,
             s.noise.pr_sigma, s.noise.dop_sigma, s.nlos_delay);
  const auto& v = s.motion.velocity_world;
  fmt::print(out, "epochs = {}\ninterval = {}\nstart_time = {}\nvelocity = {}, {}, {}\n", s.motion.epochs,
             s.motion.interval, s.motion.start_time, v.x(), v.y(), v.z());
  fmt::print(out, "clock_bias = {}, {}, {}, {}\nclock_drift = {}\n", s.clock_bias[0], s.clock_bias[1],
             s.clock_bias[2], s.clock_bias[3], s.clock_drift);
  fmt::print(out, "sky_intensity = {}\noccluder_intensity = {}\n", s.sky_intensity, s.occluder_intensity);
}

}  // namespace skynav::io
