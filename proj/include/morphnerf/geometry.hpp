#pragma once

// Pinhole cameras, rays, and ray-point sampling. Convention (fixed repo-wide):
// right-handed frames, the camera looks down +z in its own frame, pixel x
// grows with camera-frame x and pixel y with camera-frame y. `rotation` maps
// world to camera directions; `translation` is the camera origin in world
// units, so x_cam = rotation * (x_world - translation). Continuous pixel
// coordinates place the center of pixel (i, j) at (i + 0.5, j + 0.5).

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "morphnerf/errors.hpp"

namespace mnrf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraPose {
  Mat3 rotation;          // world-to-camera
  Vec3 translation;       // camera origin, world units
  double focal = 0.0;     // pixels
  Vec2 principal_point;   // pixels
  int width = 0, height = 0;

  CameraPose() = default;
  CameraPose(const Mat3& rotation, const Vec3& translation, double focal,
             const Vec2& principal_point, int width, int height);

  Vec3 origin() const { return translation; }
  /// Unit forward axis (+z of the camera frame) in world coordinates.
  Vec3 optical_axis() const { return rotation.row(2).transpose(); }

  /// Camera at `eye` looking toward `target`, world up hint `up`.
  static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                            int width, int height);

  std::string to_json() const;
  static CameraPose from_json(const std::string& text);
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length

  Ray(const Vec3& origin, const Vec3& direction);
  Vec3 at(double s) const { return origin + s * direction; }
};

struct RayPointSet {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;  // M x 3
  Eigen::VectorXd depths;                           // strictly increasing
  double delta = 0.0;                               // (z_far - z_near) / (M - 1)
};

/// Back-projects a continuous pixel coordinate into a unit-direction ray from
/// the camera origin. Throws DomainError if the pixel is out of bounds.
Ray pixel_to_ray(const CameraPose& camera, const Vec2& pixel);

/// Evenly spaced sample points between the near and far bounds (inclusive).
RayPointSet ray_points(const Ray& ray, double z_near, double z_far, int sample_count);

struct Projection {
  Vec2 pixel;
  bool in_frame = false;  // out-of-frame projections are a signal, not an error
};

/// Projects a world point to continuous pixel coordinates. Throws DomainError
/// if the point is at or behind the camera plane.
Projection project(const CameraPose& camera, const Vec3& point);

}  // namespace mnrf
