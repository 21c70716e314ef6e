#include "dreamsplat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dreamsplat/errors.hpp"

namespace dreamsplat {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
    throw std::invalid_argument("Intrinsics: focal lengths must be positive and finite");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("Intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("Intrinsics: principal point must lie inside the image");
}

void Pose::validate() const {
  const double n = rotation.coeffs().norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6)
    throw std::invalid_argument("Pose: rotation must be a unit quaternion");
  if (!translation.allFinite())
    throw std::invalid_argument("Pose: translation must be finite");
}

std::vector<double> default_yaw_angles() { return {-10.0, 10.0, -20.0, 20.0, -30.0, 30.0}; }

Pose yaw_pose(const Pose &base, double angle_deg) {
  if (!std::isfinite(angle_deg))
    throw std::invalid_argument("yaw_pose: angle must be finite");
  const double rad = angle_deg * std::numbers::pi / 180.0;
  // Camera up is -y; rotating about the camera's own y axis keeps the pivot at
  // the center and turns +z toward +x for positive angles.
  const Quat yaw(Eigen::AngleAxisd(rad, Vec3::UnitY()));
  Pose out;
  out.rotation = (base.rotation * yaw).normalized();
  out.translation = base.translation;
  return out;
}

PoseSchedule schedule_from_config(const Pose &base, std::vector<double> angles_deg) {
  return PoseSchedule{base, std::move(angles_deg)};
}

PoseSchedule schedule_from_config(const Pose &base) { return schedule_from_config(base, default_yaw_angles()); }

Vec3 world_to_camera(const Pose &pose, const Vec3 &p_world) {
  return pose.rotation.conjugate() * (p_world - pose.translation);
}

Vec3 camera_to_world(const Pose &pose, const Vec3 &p_camera) { return pose.rotation * p_camera + pose.translation; }

Projection project_point(const Camera &cam, const Vec3 &p_world) {
  const Vec3 pc = world_to_camera(cam.pose, p_world);
  if (!(pc.z() > kNearPlane))
    throw BehindCameraError("project_point: point is behind the camera");
  const Intrinsics &k = cam.intrinsics;
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy, pc.z()};
}

Eigen::Matrix<double, 2, 3> perspective_jacobian(const Intrinsics &k, const Vec3 &pc) {
  const double iz = 1.0 / pc.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * iz, 0.0, -k.fx * pc.x() * iz2, //
      0.0, k.fy * iz, -k.fy * pc.y() * iz2;
  return j;
}

Eigen::Matrix<double, 2, 3> covariance_jacobian(const Intrinsics &k, const Vec3 &pc) {
  const double gx = kGuardBand * k.width, gy = kGuardBand * k.height;
  const double tx = std::clamp(pc.x() / pc.z(), (-k.cx - gx) / k.fx, (k.width - k.cx + gx) / k.fx);
  const double ty = std::clamp(pc.y() / pc.z(), (-k.cy - gy) / k.fy, (k.height - k.cy + gy) / k.fy);
  return perspective_jacobian(k, Vec3(tx * pc.z(), ty * pc.z(), pc.z()));
}

Eigen::Matrix2d project_covariance(const Camera &cam, const Gaussian3D &g, double lowpass) {
  const Vec3 pc = world_to_camera(cam.pose, g.mean);
  if (!(pc.z() > kNearPlane))
    throw BehindCameraError("project_covariance: gaussian is behind the camera");
  const Eigen::Matrix3d w = cam.pose.world_from_camera().transpose();
  const Eigen::Matrix<double, 2, 3> jw = covariance_jacobian(cam.intrinsics, pc) * w;
  Eigen::Matrix2d cov = jw * g.covariance() * jw.transpose();
  // Exact symmetry; the product above can differ in the last bit.
  cov(1, 0) = cov(0, 1);
  cov(0, 0) += lowpass;
  cov(1, 1) += lowpass;
  return cov;
}

GaussianScene rescale_scene(const GaussianScene &scene, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw std::invalid_argument("rescale_scene: factor must be positive and finite");
  std::vector<Gaussian3D> out(scene.gaussians().begin(), scene.gaussians().end());
  for (Gaussian3D &g : out) {
    g.mean *= factor;
    g.scale *= factor;
  }
  return GaussianScene(std::move(out), std::vector<std::size_t>(scene.provenance().begin(), scene.provenance().end()));
}

GaussianScene transform_scene_to_world(const GaussianScene &scene, const Pose &pose) {
  std::vector<Gaussian3D> out(scene.gaussians().begin(), scene.gaussians().end());
  for (Gaussian3D &g : out) {
    g.mean = camera_to_world(pose, g.mean);
    g.rotation = (pose.rotation * g.rotation).normalized();
  }
  return GaussianScene(std::move(out), std::vector<std::size_t>(scene.provenance().begin(), scene.provenance().end()));
}

GaussianScene transform_scene_to_camera(const GaussianScene &scene, const Pose &pose) {
  std::vector<Gaussian3D> out(scene.gaussians().begin(), scene.gaussians().end());
  const Quat inv = pose.rotation.conjugate();
  for (Gaussian3D &g : out) {
    g.mean = world_to_camera(pose, g.mean);
    g.rotation = (inv * g.rotation).normalized();
  }
  return GaussianScene(std::move(out), std::vector<std::size_t>(scene.provenance().begin(), scene.provenance().end()));
}

} // namespace dreamsplat
