// Pinhole ground-plane scene simulator and the analytic perspective oracle.
//
// Coordinates. The "level frame" is centred on the camera's focal point with
// x to the right, y pointing down and z pointing forward horizontally. The
// ground plane is y = mount_height. The camera frame is the level frame
// pitched down by `tilt` about the x axis. Image rows grow downward.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowpersp/flow.hpp"

namespace flowpersp {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
};

// Pinhole intrinsics (focal length already folded with the pixel scale
// factors) and a tilt-only pose.
struct CameraModel {
  double f_u = 800.0;
  double f_v = 800.0;
  double mount_height = 10.0;  // metres above the ground plane
  double tilt = 0.0;           // downward pitch, radians
  int image_width = 352;
  int image_height = 288;
  double principal_u = 176.0;
  double principal_v = 144.0;

  // Throws ArgumentError on a violated invariant.
  void validate() const;
};

Vec3 level_to_camera(const CameraModel& cam, const Vec3& level);

// Projects a camera-frame point. Throws BehindCameraError when z <= 0.
ImagePoint project_camera_point(const CameraModel& cam, const Vec3& p);

// Rotates a level-frame point by the tilt, then projects it.
ImagePoint project_point(const CameraModel& cam, const Vec3& level);

// Camera-frame depth z of the ground point seen at image row v. Throws
// HorizonError if the viewing ray does not hit the ground ahead.
double ground_depth(const CameraModel& cam, double v);

// Relative scale change per pixel at image row v for the ground plane:
// -(dz/dv) / z with z = ground_depth(cam, v). Positive for a downward-tilted
// camera: things get bigger further down the image.
double oracle_zeta(const CameraModel& cam, double v);

enum class MotionPlane {
  kGround,          // in-plane coords: (lateral x, forward distance w)
  kFrontoParallel,  // in-plane coords: (lateral x, elevation above ground)
};

struct PlaneVec {
  double lateral = 0.0;
  double along = 0.0;
};

// A point object moving at constant in-plane velocity. With repeat > 0 the
// object re-enters at `position` every `repeat` seconds, its lateral
// coordinate jittered uniformly by +-lateral_spread.
struct WorldObject {
  PlaneVec position;
  PlaneVec velocity;  // metres per second
  double start = 0.0;
  double end = std::numeric_limits<double>::infinity();
  double repeat = 0.0;
  double lateral_spread = 0.0;
};

// Image rectangle in which objects move `factor` times their nominal speed.
struct OutlierRegion {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;
  double factor = 0.5;

  bool contains(double u, double v) const noexcept {
    return u >= u_min && u < u_max && v >= v_min && v < v_max;
  }
  double area() const noexcept { return (u_max - u_min) * (v_max - v_min); }
};

struct SceneScript {
  CameraModel camera;
  MotionPlane plane = MotionPlane::kGround;
  double fronto_depth = 20.0;  // metres, fronto-parallel plane only
  std::vector<WorldObject> objects;
  double duration = 60.0;  // seconds
  double frame_rate = 15.0;
  double noise_std = 0.05;  // pixels, per displacement component
  double threshold = kDefaultThreshold;
  std::optional<OutlierRegion> outlier;

  // Throws ScriptError on a violated invariant.
  void validate() const;

  Vec3 to_level(const PlaneVec& p) const;
};

// Ground truth for the scene at image row v: oracle_zeta for the ground
// plane, zero for a fronto-parallel plane (depth does not change).
double reference_zeta(const SceneScript& script, double v);

struct SimulationResult {
  FlowSequence flow;
  double reference_zeta = 0.0;  // at the image centre row
};

// Renders every active object at each frame time and at one frame interval
// later; the displacement becomes a motion vector positioned at the first
// projection. Gaussian noise is added to both displacement components, the
// result is held at stream resolution, and vectors at or below the script's
// threshold or leaving the frame are dropped. Pure in (script, seed).
SimulationResult simulate(const SceneScript& script, std::uint64_t seed);

// Key-value scene description, one `key = value` per line, '#' comments.
//
//   camera.f_u camera.f_v camera.mount_height camera.tilt_deg
//   camera.image_width camera.image_height camera.principal_u
//   camera.principal_v
//   scene.plane (ground|fronto) scene.fronto_depth
//   duration frame_rate noise_std threshold
//   object.N.lateral object.N.along object.N.v_lateral object.N.v_along
//   object.N.start object.N.end object.N.repeat object.N.lateral_spread
//   outlier.u_min outlier.v_min outlier.u_max outlier.v_max outlier.factor
SceneScript parse_scene_script(std::istream& in);
SceneScript parse_scene_script(std::string_view text);
SceneScript read_scene_file(const std::string& path);

}  // namespace flowpersp
