#include "morphnerf/geometry.hpp"

#include <cmath>

#include "json.hpp"

namespace mnrf {

namespace {
constexpr double kOrthonormalTol = 1e-9;
}

CameraPose::CameraPose(const Mat3& rotation_in, const Vec3& translation_in, double focal_in,
                       const Vec2& principal_point_in, int width_in, int height_in)
    : rotation(rotation_in),
      translation(translation_in),
      focal(focal_in),
      principal_point(principal_point_in),
      width(width_in),
      height(height_in) {
  if (width <= 0 || height <= 0) throw DomainError("CameraPose: non-positive image size");
  if (!(focal > 0.0)) throw DomainError("CameraPose: focal must be positive");
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > kOrthonormalTol)
    throw DomainError("CameraPose: rotation is not orthonormal");
  if (principal_point.x() < 0.0 || principal_point.x() >= width || principal_point.y() < 0.0 ||
      principal_point.y() >= height)
    throw DomainError("CameraPose: principal point outside image bounds");
}

CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                               int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 y0 = -up;
  y0 -= y0.dot(forward) * forward;
  if (y0.norm() < 1e-12) throw DomainError("look_at: up is parallel to the view direction");
  y0.normalize();
  const Vec3 x_axis = y0.cross(forward).normalized();
  const Vec3 y_axis = forward.cross(x_axis).normalized();
  Mat3 rotation;
  rotation.row(0) = x_axis.transpose();
  rotation.row(1) = y_axis.transpose();
  rotation.row(2) = forward.transpose();
  return CameraPose(rotation, eye, focal, Vec2(width * 0.5, height * 0.5), width, height);
}

std::string CameraPose::to_json() const {
  nlohmann::json j;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(i * 3 + k)] = rotation(i, k);
  j["rotation"] = r;
  j["translation"] = std::vector<double>{translation.x(), translation.y(), translation.z()};
  j["focal"] = focal;
  j["principal_point"] = std::vector<double>{principal_point.x(), principal_point.y()};
  j["width"] = width;
  j["height"] = height;
  return j.dump(2);
}

CameraPose CameraPose::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("camera json: ") + e.what());
  }
  try {
    const auto r = j.at("rotation").get<std::vector<double>>();
    if (r.size() != 9) throw DataError("camera json: rotation must have 9 entries");
    Mat3 rotation;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) rotation(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
    const auto t = j.at("translation").get<std::vector<double>>();
    if (t.size() != 3) throw DataError("camera json: translation must have 3 entries");
    const auto pp = j.at("principal_point").get<std::vector<double>>();
    if (pp.size() != 2) throw DataError("camera json: principal_point must have 2 entries");
    return CameraPose(rotation, Vec3(t[0], t[1], t[2]), j.at("focal").get<double>(),
                      Vec2(pp[0], pp[1]), j.at("width").get<int>(), j.at("height").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("camera json: ") + e.what());
  }
}

Ray::Ray(const Vec3& origin_in, const Vec3& direction_in)
    : origin(origin_in), direction(direction_in) {
  if (std::abs(direction.norm() - 1.0) > 1e-12)
    throw DomainError("Ray: direction must be unit length");
}

Ray pixel_to_ray(const CameraPose& camera, const Vec2& pixel) {
  if (pixel.x() < 0.0 || pixel.x() >= camera.width || pixel.y() < 0.0 ||
      pixel.y() >= camera.height)
    throw DomainError("pixel_to_ray: pixel out of bounds");
  const Vec3 dir_cam((pixel.x() - camera.principal_point.x()) / camera.focal,
                     (pixel.y() - camera.principal_point.y()) / camera.focal, 1.0);
  const Vec3 dir_world = camera.rotation.transpose() * dir_cam;
  return Ray(camera.origin(), dir_world.normalized());
}

RayPointSet ray_points(const Ray& ray, double z_near, double z_far, int sample_count) {
  if (sample_count < 2) throw DomainError("ray_points: need at least 2 samples");
  if (!(z_far > z_near) || !(z_near > 0.0))
    throw DomainError("ray_points: require z_far > z_near > 0");
  RayPointSet set;
  const int m = sample_count;
  set.delta = (z_far - z_near) / static_cast<double>(m - 1);
  set.points.resize(m, 3);
  set.depths.resize(m);
  for (int i = 0; i < m; ++i) {
    const double z = z_near + static_cast<double>(i) * set.delta;
    set.depths(i) = z;
    set.points.row(i) = ray.at(z).transpose();
  }
  return set;
}

Projection project(const CameraPose& camera, const Vec3& point) {
  const Vec3 cam = camera.rotation * (point - camera.translation);
  if (!(cam.z() > 0.0)) throw DomainError("project: point at or behind the camera");
  Projection p;
  p.pixel = Vec2(camera.focal * cam.x() / cam.z() + camera.principal_point.x(),
                 camera.focal * cam.y() / cam.z() + camera.principal_point.y());
  p.in_frame = p.pixel.x() >= 0.0 && p.pixel.x() < camera.width && p.pixel.y() >= 0.0 &&
               p.pixel.y() < camera.height;
  return p;
}

}  // namespace mnrf
