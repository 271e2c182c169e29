#include "flowpersp/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "flowpersp/errors.hpp"

namespace flowpersp {

void CameraModel::validate() const {
  if (!(f_u > 0.0) || !(f_v > 0.0)) {
    throw ArgumentError("focal lengths must be positive");
  }
  if (!(mount_height > 0.0)) {
    throw ArgumentError("camera height must be positive");
  }
  if (!(tilt >= 0.0 && tilt < std::numbers::pi / 2)) {
    throw ArgumentError("tilt must lie in [0, pi/2)");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw ArgumentError("image dimensions must be positive");
  }
  if (!(principal_u >= 0.0 && principal_u <= image_width &&
        principal_v >= 0.0 && principal_v <= image_height)) {
    throw ArgumentError("principal point must lie inside the image");
  }
}

Vec3 level_to_camera(const CameraModel& cam, const Vec3& level) {
  const double c = std::cos(cam.tilt);
  const double s = std::sin(cam.tilt);
  return Vec3{level.x, level.y * c - level.z * s, level.z * c + level.y * s};
}

ImagePoint project_camera_point(const CameraModel& cam, const Vec3& p) {
  if (!(p.z > 0.0)) {
    throw BehindCameraError("point has non-positive camera depth " +
                            std::to_string(p.z));
  }
  return ImagePoint{cam.f_u * p.x / p.z + cam.principal_u,
                    cam.f_v * p.y / p.z + cam.principal_v};
}

ImagePoint project_point(const CameraModel& cam, const Vec3& level) {
  return project_camera_point(cam, level_to_camera(cam, level));
}

namespace {

// For the ray through row v, camera depth per unit of level-frame drop:
// a point on the ray at depth z sits z * denom below the focal point.
double ray_drop_rate(const CameraModel& cam, double v) {
  const double y_n = (v - cam.principal_v) / cam.f_v;
  const double denom = y_n * std::cos(cam.tilt) + std::sin(cam.tilt);
  if (!(denom > 0.0)) {
    throw HorizonError("image row " + std::to_string(v) +
                       " is at or above the horizon");
  }
  return denom;
}

}  // namespace

double ground_depth(const CameraModel& cam, double v) {
  return cam.mount_height / ray_drop_rate(cam, v);
}

double oracle_zeta(const CameraModel& cam, double v) {
  // z(v) = H / (y_n cos + sin)  =>  -(dz/dv)/z = cos / (f_v (y_n cos + sin)).
  return std::cos(cam.tilt) / (cam.f_v * ray_drop_rate(cam, v));
}

void SceneScript::validate() const {
  try {
    camera.validate();
  } catch (const ArgumentError& e) {
    throw ScriptError(std::string("camera: ") + e.what());
  }
  if (!(duration > 0.0)) throw ScriptError("duration must be positive");
  if (!(frame_rate > 0.0)) throw ScriptError("frame_rate must be positive");
  if (!(noise_std >= 0.0)) throw ScriptError("noise_std must be non-negative");
  if (!(threshold > 0.0)) throw ScriptError("threshold must be positive");
  if (plane == MotionPlane::kFrontoParallel) {
    if (camera.tilt != 0.0) {
      throw ScriptError("a fronto-parallel motion plane needs tilt 0");
    }
    if (!(fronto_depth > 0.0)) {
      throw ScriptError("fronto_depth must be positive");
    }
  }
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& o = objects[k];
    if (!(o.end > o.start)) {
      throw ScriptError("object " + std::to_string(k) +
                        ": end must be after start");
    }
    if (!(o.repeat >= 0.0) || !(o.lateral_spread >= 0.0)) {
      throw ScriptError("object " + std::to_string(k) +
                        ": repeat and lateral_spread must be non-negative");
    }
  }
  if (outlier) {
    const auto& r = *outlier;
    if (!(r.u_min >= 0.0 && r.v_min >= 0.0 && r.u_max <= camera.image_width &&
          r.v_max <= camera.image_height && r.u_min < r.u_max &&
          r.v_min < r.v_max)) {
      throw ScriptError("outlier region must be a non-empty rectangle inside "
                        "the image");
    }
    if (!(r.factor > 0.0)) {
      throw ScriptError("outlier factor must be positive");
    }
  }
}

Vec3 SceneScript::to_level(const PlaneVec& p) const {
  if (plane == MotionPlane::kFrontoParallel) {
    return Vec3{p.lateral, camera.mount_height - p.along, fronto_depth};
  }
  return Vec3{p.lateral, camera.mount_height, p.along};
}

double reference_zeta(const SceneScript& script, double v) {
  if (script.plane == MotionPlane::kFrontoParallel) return 0.0;
  return oracle_zeta(script.camera, v);
}

SimulationResult simulate(const SceneScript& script, std::uint64_t seed) {
  script.validate();
  const CameraModel& cam = script.camera;
  const double dt = 1.0 / script.frame_rate;
  const auto frame_count = static_cast<std::int64_t>(
      std::ceil(script.duration * script.frame_rate - 1e-9));
  const double width = cam.image_width;
  const double height = cam.image_height;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<MotionVector> all;

  auto project = [&](const PlaneVec& p, std::size_t object) {
    try {
      return project_point(cam, script.to_level(p));
    } catch (const BehindCameraError& e) {
      throw ScriptError("object " + std::to_string(object) +
                        " leaves the space in front of the camera: " +
                        e.what());
    }
  };

  for (std::size_t k = 0; k < script.objects.size(); ++k) {
    const WorldObject& obj = script.objects[k];
    const double stop = std::min(obj.end, script.duration);
    for (std::int64_t pass = 0;; ++pass) {
      const double pass_start =
          obj.start + (obj.repeat > 0.0 ? static_cast<double>(pass) * obj.repeat
                                        : 0.0);
      if (pass_start >= stop || (obj.repeat == 0.0 && pass > 0)) break;
      const double pass_end =
          obj.repeat > 0.0 ? std::min(pass_start + obj.repeat, stop) : stop;

      PlaneVec pos = obj.position;
      if (obj.lateral_spread > 0.0) {
        std::uniform_real_distribution<double> jitter(-obj.lateral_spread,
                                                      obj.lateral_spread);
        pos.lateral += jitter(rng);
      }
      auto frame = static_cast<std::int64_t>(
          std::ceil(pass_start * script.frame_rate - 1e-9));
      const double lead = static_cast<double>(frame) * dt - pass_start;
      pos.lateral += obj.velocity.lateral * lead;
      pos.along += obj.velocity.along * lead;

      for (; frame < frame_count &&
             static_cast<double>(frame) * dt < pass_end - 1e-12;
           ++frame) {
        const ImagePoint a = project(pos, k);
        const double gain =
            script.outlier && script.outlier->contains(a.u, a.v)
                ? script.outlier->factor
                : 1.0;
        const PlaneVec next{pos.lateral + obj.velocity.lateral * gain * dt,
                            pos.along + obj.velocity.along * gain * dt};
        const ImagePoint b = project(next, k);
        pos = next;

        const double u = quantize(a.u);
        const double v = quantize(a.v);
        if (!(u >= 0.0 && v >= 0.0 && u < width && v < height)) continue;
        double du = b.u - a.u;
        double dv = b.v - a.v;
        if (script.noise_std > 0.0) {
          du += script.noise_std * noise(rng);
          dv += script.noise_std * noise(rng);
        }
        MotionVector mv{frame, u, v, quantize(du), quantize(dv)};
        if (mv.magnitude() <= script.threshold) continue;
        all.push_back(mv);
      }
    }
  }

  std::sort(all.begin(), all.end(),
            [](const MotionVector& x, const MotionVector& y) {
              if (x.t != y.t) return x.t < y.t;
              return canonical_less(x, y);
            });
  std::vector<Frame> frames;
  for (const auto& mv : all) {
    if (frames.empty() || frames.back().index != mv.t) {
      frames.push_back(Frame{mv.t, {}});
    }
    frames.back().vectors.push_back(mv);
  }

  double reference = 0.0;
  try {
    reference = reference_zeta(script, height / 2.0);
  } catch (const HorizonError& e) {
    throw ScriptError(std::string("reference row: ") + e.what());
  }
  return SimulationResult{FlowSequence(cam.image_width, cam.image_height,
                                       script.frame_rate, std::move(frames)),
                          reference};
}

// --- Script parsing ---------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view text, std::size_t line) {
  double out = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  if (text == "inf") return std::numeric_limits<double>::infinity();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(out)) {
    throw FormatError(line, "invalid number '" + std::string(text) + "'");
  }
  return out;
}

int to_int(std::string_view text, std::size_t line) {
  int out = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(line, "invalid integer '" + std::string(text) + "'");
  }
  return out;
}

}  // namespace

SceneScript parse_scene_script(std::istream& in) {
  SceneScript script;
  std::map<int, WorldObject> objects;
  OutlierRegion region;
  bool has_outlier = false;
  bool principal_u_set = false;
  bool principal_v_set = false;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(line_no, "expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw FormatError(line_no, "expected 'key = value'");
    }

    auto& cam = script.camera;
    if (key == "camera.f_u") {
      cam.f_u = to_double(value, line_no);
    } else if (key == "camera.f_v") {
      cam.f_v = to_double(value, line_no);
    } else if (key == "camera.mount_height") {
      cam.mount_height = to_double(value, line_no);
    } else if (key == "camera.tilt_deg") {
      cam.tilt = to_double(value, line_no) * std::numbers::pi / 180.0;
    } else if (key == "camera.image_width") {
      cam.image_width = to_int(value, line_no);
    } else if (key == "camera.image_height") {
      cam.image_height = to_int(value, line_no);
    } else if (key == "camera.principal_u") {
      cam.principal_u = to_double(value, line_no);
      principal_u_set = true;
    } else if (key == "camera.principal_v") {
      cam.principal_v = to_double(value, line_no);
      principal_v_set = true;
    } else if (key == "scene.plane") {
      if (value == "ground") {
        script.plane = MotionPlane::kGround;
      } else if (value == "fronto") {
        script.plane = MotionPlane::kFrontoParallel;
      } else {
        throw FormatError(line_no, "scene.plane must be ground or fronto");
      }
    } else if (key == "scene.fronto_depth") {
      script.fronto_depth = to_double(value, line_no);
    } else if (key == "duration") {
      script.duration = to_double(value, line_no);
    } else if (key == "frame_rate") {
      script.frame_rate = to_double(value, line_no);
    } else if (key == "noise_std") {
      script.noise_std = to_double(value, line_no);
    } else if (key == "threshold") {
      script.threshold = to_double(value, line_no);
    } else if (key.starts_with("outlier.")) {
      has_outlier = true;
      const std::string field = key.substr(8);
      const double x = to_double(value, line_no);
      if (field == "u_min") {
        region.u_min = x;
      } else if (field == "v_min") {
        region.v_min = x;
      } else if (field == "u_max") {
        region.u_max = x;
      } else if (field == "v_max") {
        region.v_max = x;
      } else if (field == "factor") {
        region.factor = x;
      } else {
        throw FormatError(line_no, "unknown key '" + key + "'");
      }
    } else if (key.starts_with("object.")) {
      const auto dot = key.find('.', 7);
      if (dot == std::string::npos) {
        throw FormatError(line_no, "expected object.N.field");
      }
      const int index = to_int(std::string_view(key).substr(7, dot - 7), line_no);
      const std::string field = key.substr(dot + 1);
      WorldObject& o = objects[index];
      const double x = to_double(value, line_no);
      if (field == "lateral") {
        o.position.lateral = x;
      } else if (field == "along") {
        o.position.along = x;
      } else if (field == "v_lateral") {
        o.velocity.lateral = x;
      } else if (field == "v_along") {
        o.velocity.along = x;
      } else if (field == "start") {
        o.start = x;
      } else if (field == "end") {
        o.end = x;
      } else if (field == "repeat") {
        o.repeat = x;
      } else if (field == "lateral_spread") {
        o.lateral_spread = x;
      } else {
        throw FormatError(line_no, "unknown key '" + key + "'");
      }
    } else {
      throw FormatError(line_no, "unknown key '" + key + "'");
    }
  }

  if (!principal_u_set) script.camera.principal_u = script.camera.image_width / 2.0;
  if (!principal_v_set) script.camera.principal_v = script.camera.image_height / 2.0;
  for (auto& [index, obj] : objects) script.objects.push_back(obj);
  if (has_outlier) script.outlier = region;
  script.validate();
  return script;
}

SceneScript parse_scene_script(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_scene_script(in);
}

SceneScript read_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_scene_script(in);
}

}  // namespace flowpersp
