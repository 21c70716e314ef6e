#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dreamsplat/scene.hpp"

namespace dreamsplat {

/// Camera frame convention: +x right, +y down, +z forward (viewing direction).
/// Pixel (x, y) is sampled at continuous coordinate (x, y), so the pixel whose
/// center is nearest to (u, v) is (round(u), round(v)).

constexpr double kNearPlane = 1e-6;
constexpr double kDefaultLowpass = 0.3;
/// Covariance linearization points are clamped to this fraction of the image
/// size beyond each edge.
constexpr double kGuardBand = 0.15;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws std::invalid_argument on non-positive focal lengths or an
  /// out-of-image principal point.
  void validate() const;
  bool operator==(const Intrinsics &) const = default;
};

/// World-from-camera rotation; `translation` is the camera center in world coordinates.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Eigen::Matrix3d world_from_camera() const { return rotation.toRotationMatrix(); }
  Vec3 forward() const { return rotation * Vec3::UnitZ(); }
  void validate() const;
};

struct Camera {
  Intrinsics intrinsics;
  Pose pose;

  void validate() const {
    intrinsics.validate();
    pose.validate();
  }
};

struct PoseSchedule {
  Pose base;
  std::vector<double> angles_deg;

  std::size_t size() const noexcept { return angles_deg.size(); }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Ordered near-to-far: -10, 10, -20, 20, -30, 30.
std::vector<double> default_yaw_angles();

/// Rotates the viewing direction by `angle_deg` about the camera's own up
/// axis, pivoting at the camera center. Positive angles turn toward +x.
Pose yaw_pose(const Pose &base, double angle_deg);

PoseSchedule schedule_from_config(const Pose &base, std::vector<double> angles_deg);
PoseSchedule schedule_from_config(const Pose &base);

Vec3 world_to_camera(const Pose &pose, const Vec3 &p_world);
Vec3 camera_to_world(const Pose &pose, const Vec3 &p_camera);

/// Throws BehindCameraError when the camera-frame depth is <= kNearPlane.
Projection project_point(const Camera &cam, const Vec3 &p_world);

/// Jacobian of (u, v) with respect to the camera-frame point.
Eigen::Matrix<double, 2, 3> perspective_jacobian(const Intrinsics &k, const Vec3 &p_camera);

/// perspective_jacobian with x/z and y/z clamped to the guard band around the
/// image. Used for screen covariances so that Gaussians far outside the view
/// at grazing depth do not smear across the whole image.
Eigen::Matrix<double, 2, 3> covariance_jacobian(const Intrinsics &k, const Vec3 &p_camera);

/// Screen-space covariance J W S W^T J^T + lowpass * I, in px^2, with J from covariance_jacobian.
/// Throws BehindCameraError for Gaussians at or behind the near plane.
Eigen::Matrix2d project_covariance(const Camera &cam, const Gaussian3D &g, double lowpass = kDefaultLowpass);

/// Multiplies every mean and scale by `factor` (> 0, finite).
GaussianScene rescale_scene(const GaussianScene &scene, double factor);

/// Maps a scene expressed in the camera frame of `pose` into world coordinates.
GaussianScene transform_scene_to_world(const GaussianScene &scene, const Pose &pose);

/// Inverse of transform_scene_to_world.
GaussianScene transform_scene_to_camera(const GaussianScene &scene, const Pose &pose);

} // namespace dreamsplat
