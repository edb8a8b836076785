#include "doctest.h"

#include <cmath>

#include "morphnerf/geometry.hpp"
#include "morphnerf/rng.hpp"
#include "morphnerf/scenegen.hpp"

using namespace mnrf;

namespace {

CameraPose random_camera(Rng& rng, int size = 64) {
  const double az = rng.uniform(-1.0, 1.0), el = rng.uniform(-0.5, 0.5);
  const double r = rng.uniform(3.0, 5.0);
  const Vec3 eye(r * std::sin(az) * std::cos(el), r * std::sin(el),
                 r * std::cos(az) * std::cos(el));
  return CameraPose::look_at(eye, Vec3::Zero(), Vec3(0, 1, 0), rng.uniform(60.0, 120.0), size,
                             size);
}

}  // namespace

TEST_CASE("ray through the principal point runs along the optical axis") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const CameraPose cam = random_camera(rng);
    const Ray ray = pixel_to_ray(cam, cam.principal_point);
    CHECK((ray.direction - cam.optical_axis()).norm() < 1e-12);
    CHECK((ray.origin - cam.origin()).norm() == 0.0);
  }
}

TEST_CASE("identity camera maps the principal point to +z") {
  const CameraPose cam(Mat3::Identity(), Vec3::Zero(), 100.0, Vec2(32, 32), 64, 64);
  const Ray ray = pixel_to_ray(cam, Vec2(32, 32));
  CHECK((ray.direction - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("project and pixel_to_ray round-trip to sub-pixel precision") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const CameraPose cam = random_camera(rng);
    const Vec2 pixel(rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0));
    const Ray ray = pixel_to_ray(cam, pixel);
    const double s = rng.uniform(1.0, 8.0);
    const Projection proj = project(cam, ray.at(s));
    CHECK((proj.pixel - pixel).norm() < 1e-6);
  }
}

TEST_CASE("pixel out of bounds is a domain error") {
  const CameraPose cam(Mat3::Identity(), Vec3::Zero(), 100.0, Vec2(32, 32), 64, 64);
  CHECK_THROWS_AS(pixel_to_ray(cam, Vec2(-1, 10)), DomainError);
  CHECK_THROWS_AS(pixel_to_ray(cam, Vec2(10, 64)), DomainError);
}

TEST_CASE("ray_points reproduces the endpoint and spacing arithmetic") {
  const Ray ray(Vec3(1, 2, 3), Vec3(0, 0, 1));
  const RayPointSet set = ray_points(ray, 2.0, 6.0, 5);
  CHECK(set.delta == doctest::Approx(1.0));
  for (int i = 0; i < 5; ++i) CHECK(set.depths(i) == doctest::Approx(2.0 + i));
  CHECK((set.points.row(0).transpose() - ray.at(2.0)).norm() < 1e-15);
  CHECK((set.points.row(4).transpose() - ray.at(6.0)).norm() < 1e-15);

  // consecutive depth spacing is exactly (z_far - z_near) / (M - 1)
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const double z_near = rng.uniform(0.5, 2.0);
    const double z_far = z_near + rng.uniform(1.0, 5.0);
    const int m = 2 + static_cast<int>(rng.below(63));
    const RayPointSet s = ray_points(ray, z_near, z_far, m);
    const double expected = (z_far - z_near) / (m - 1);
    for (int i = 1; i < m; ++i)
      CHECK(s.depths(i) - s.depths(i - 1) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("ray_points rejects degenerate inputs") {
  const Ray ray(Vec3::Zero(), Vec3(0, 0, 1));
  CHECK_THROWS_AS(ray_points(ray, 2.0, 6.0, 1), DomainError);
  CHECK_THROWS_AS(ray_points(ray, 6.0, 2.0, 8), DomainError);
  CHECK_THROWS_AS(ray_points(ray, -1.0, 2.0, 8), DomainError);
}

TEST_CASE("points on the optical axis project to the principal point") {
  Rng rng(21);
  for (int i = 0; i < 10; ++i) {
    const CameraPose cam = random_camera(rng);
    const Projection proj = project(cam, cam.origin() + 3.0 * cam.optical_axis());
    CHECK((proj.pixel - cam.principal_point).norm() < 1e-9);
  }
}

TEST_CASE("points behind the camera raise an error") {
  const CameraPose cam(Mat3::Identity(), Vec3::Zero(), 100.0, Vec2(32, 32), 64, 64);
  CHECK_THROWS_AS(project(cam, Vec3(0, 0, -1.0)), DomainError);
  CHECK_THROWS_AS(project(cam, Vec3(0.5, 0.5, 0.0)), DomainError);
}

TEST_CASE("projections outside the image signal out-of-frame without throwing") {
  const CameraPose cam(Mat3::Identity(), Vec3::Zero(), 100.0, Vec2(32, 32), 64, 64);
  const Projection proj = project(cam, Vec3(5.0, 0.0, 1.0));
  CHECK_FALSE(proj.in_frame);
}

TEST_CASE("camera constructors enforce the invariants") {
  Mat3 skewed = Mat3::Identity();
  skewed(0, 1) = 1e-3;
  CHECK_THROWS_AS(CameraPose(skewed, Vec3::Zero(), 100.0, Vec2(32, 32), 64, 64), DomainError);
  CHECK_THROWS_AS(CameraPose(Mat3::Identity(), Vec3::Zero(), -5.0, Vec2(32, 32), 64, 64),
                  DomainError);
  CHECK_THROWS_AS(CameraPose(Mat3::Identity(), Vec3::Zero(), 100.0, Vec2(99, 32), 64, 64),
                  DomainError);

  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const CameraPose cam = random_camera(rng);
    const Mat3 gram = cam.rotation.transpose() * cam.rotation;
    CHECK((gram - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("unit direction invariant on rays") {
  CHECK_THROWS_AS(Ray(Vec3::Zero(), Vec3(0, 0, 2)), DomainError);
  const Ray r(Vec3::Zero(), Vec3(1, 1, 1).normalized());
  CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
}

TEST_CASE("camera JSON round trip preserves every field") {
  Rng rng(33);
  const CameraPose cam = random_camera(rng);
  const CameraPose back = CameraPose::from_json(cam.to_json());
  CHECK((back.rotation - cam.rotation).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.translation - cam.translation).norm() == 0.0);
  CHECK(back.focal == cam.focal);
  CHECK((back.principal_point - cam.principal_point).norm() == 0.0);
  CHECK(back.width == cam.width);
  CHECK(back.height == cam.height);
  CHECK_THROWS_AS(CameraPose::from_json("{ not json"), DataError);
}

TEST_CASE("two cameras see the same analytic color at a shared surface point") {
  // Lambertian ground truth: color depends only on the surface point, so rays
  // from different cameras through its projections return identical colors.
  const SyntheticSubject subject = generate_subject(7);
  const ExpressionDeformation expr = expression_deformation(0);
  const Vec3 axes = deformed_axes(subject, expr);

  const CameraPose cam_a =
      CameraPose::look_at(Vec3(0.5, 0.3, 4.0), Vec3::Zero(), Vec3(0, 1, 0), 80.0, 64, 64);
  const CameraPose cam_b =
      CameraPose::look_at(Vec3(-0.8, -0.2, 3.9), Vec3::Zero(), Vec3(0, 1, 0), 80.0, 64, 64);

  Rng rng(2);
  int checked = 0;
  for (int i = 0; i < 200 && checked < 25; ++i) {
    const Vec3 u = Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 1.0).normalized();
    const Vec3 p = axes.cwiseProduct(u);  // front surface point
    const Projection pa = project(cam_a, p);
    const Projection pb = project(cam_b, p);
    if (!pa.in_frame || !pb.in_frame) continue;
    const Ray ra = pixel_to_ray(cam_a, pa.pixel);
    const Ray rb = pixel_to_ray(cam_b, pb.pixel);
    const auto ta = intersect_ellipsoid(axes, ra);
    const auto tb = intersect_ellipsoid(axes, rb);
    REQUIRE(ta.has_value());
    REQUIRE(tb.has_value());
    const Vec3 ca = surface_color(subject, expr, ra.at(*ta));
    const Vec3 cb = surface_color(subject, expr, rb.at(*tb));
    CHECK((ca - cb).cwiseAbs().maxCoeff() < 1e-6);
    ++checked;
  }
  CHECK(checked >= 25);
}
