#include "doctest.h"

#include <cmath>

#include "morphnerf/renderer.hpp"
#include "morphnerf/scenegen.hpp"

#include "test_helpers.hpp"

using namespace mnrf;
using ad::Mat;
using ad::Var;

namespace {

RaySamples random_samples(Rng& rng, int m, double delta, double sigma_scale = 3.0) {
  RaySamples s;
  s.delta = delta;
  s.colors.resize(m, 3);
  s.sigmas.resize(m);
  s.depths.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int c = 0; c < 3; ++c) s.colors(i, c) = rng.uniform();
    s.sigmas(i) = sigma_scale * rng.uniform();
    s.depths(i) = 2.0 + i * delta;
  }
  return s;
}

}  // namespace

TEST_CASE("zero density composites to pure background") {
  RaySamples s;
  s.delta = 0.1;
  s.colors = Eigen::Matrix<double, Eigen::Dynamic, 3>::Constant(8, 3, 0.2);
  s.sigmas = Eigen::VectorXd::Zero(8);
  const RenderOutput out = composite(s, Vec3(1.0, 0.5, 0.25));
  CHECK(out.weights.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.transmittance_residual == doctest::Approx(1.0));
  CHECK((out.color - Vec3(1.0, 0.5, 0.25)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(out.surface_index == kNoSurface);
}

TEST_CASE("an opaque first sample swallows the ray") {
  Rng rng(1);
  RaySamples s = random_samples(rng, 6, 0.5);
  s.sigmas(0) = 1e6;
  const RenderOutput out = composite(s, Vec3(1, 1, 1));
  CHECK(out.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((out.color - s.colors.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(out.surface_index == 0);
  CHECK(out.depth == doctest::Approx(s.depths(0)));
}

TEST_CASE("uniform density matches the closed form and the brute-force oracle") {
  const int m = 8;
  const double sigma = 1.7, delta = 0.35;
  RaySamples s;
  s.delta = delta;
  s.colors = Eigen::Matrix<double, Eigen::Dynamic, 3>::Constant(m, 3, 0.5);
  s.sigmas = Eigen::VectorXd::Constant(m, sigma);
  const RenderOutput out = composite(s, Vec3::Zero());
  const double alpha = 1.0 - std::exp(-sigma * delta);
  for (int i = 0; i < m; ++i) {
    const double closed_form = std::exp(-i * sigma * delta) * alpha;
    CHECK(out.weights(i) == doctest::Approx(closed_form).epsilon(1e-12));
  }
  const Eigen::VectorXd brute = test::brute_force_weights(s.sigmas, delta);
  CHECK((out.weights - brute).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("composite matches brute force on 1000 random 8-sample rays") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    RaySamples s = random_samples(rng, 8, rng.uniform(0.05, 0.5), rng.uniform(0.1, 20.0));
    const RenderOutput out = composite(s, Vec3(1, 1, 1));
    const Eigen::VectorXd brute = test::brute_force_weights(s.sigmas, s.delta);
    CHECK((out.weights - brute).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(out.weights.sum() + out.transmittance_residual - 1.0) < 1e-9);
  }
}

TEST_CASE("compositing is sensitive to sample order") {
  RaySamples s;
  s.delta = 0.4;
  s.colors.resize(4, 3);
  s.colors << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0;
  s.sigmas.resize(4);
  s.sigmas << 5.0, 0.5, 0.1, 2.0;
  RaySamples reversed = s;
  reversed.colors = s.colors.colwise().reverse().eval();
  reversed.sigmas = s.sigmas.reverse().eval();
  const RenderOutput a = composite(s, Vec3::Zero());
  const RenderOutput b = composite(reversed, Vec3::Zero());
  CHECK((a.color - b.color).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("surface index follows the argmax with first-index ties") {
  Eigen::VectorXd w(3);
  w << 0.0, 0.7, 0.1;
  CHECK(surface_index(w) == 1);  // the second sample
  Eigen::VectorXd tie(2);
  tie << 0.4, 0.4;
  CHECK(surface_index(tie) == 0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
  CHECK(surface_index(zero) == kNoSurface);
  CHECK_THROWS_AS(surface_index(Eigen::VectorXd()), DomainError);
}

TEST_CASE("graph compositing agrees with the eager path and differentiates") {
  Rng rng(5);
  const int n = 3, m = 6;
  const double delta = 0.3;
  Mat colors0(n * m, 3), sigmas0(n * m, 1);
  Eigen::VectorXd depths(n * m);
  for (int i = 0; i < n * m; ++i) {
    for (int c = 0; c < 3; ++c) colors0(i, c) = rng.uniform();
    sigmas0(i, 0) = 2.0 * rng.uniform() + 0.05;
    depths(i) = 2.0 + (i % m) * delta;
  }
  const Vec3 bg(1, 1, 1);

  ad::Tape tape;
  Var colors = tape.leaf(colors0);
  Var sigmas = tape.leaf(sigmas0);
  const CompositeGraph graph = composite_rays(tape, colors, sigmas, m, delta, bg, depths);

  for (int r = 0; r < n; ++r) {
    RaySamples s;
    s.delta = delta;
    s.colors = colors0.middleRows(r * m, m);
    s.sigmas = sigmas0.col(0).segment(r * m, m);
    s.depths = depths.segment(r * m, m);
    const RenderOutput eager = composite(s, bg);
    CHECK((graph.color.val().row(r).transpose() - eager.color).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(graph.surface[static_cast<std::size_t>(r)] == eager.surface_index);
    const double residual = 1.0 - graph.weight_sum.val()(r, 0);
    CHECK(std::abs(residual - eager.transmittance_residual) < 1e-12);
  }

  // gradient of a random projection of the composited colors
  const Mat proj = Mat::NullaryExpr(n, 3, [&] { return rng.normal(); });
  Var loss = ad::sum(ad::mul(graph.color, tape.constant(proj)));
  tape.backward(loss);
  const Mat g_colors = tape.grad(colors);
  const Mat g_sigmas = tape.grad(sigmas);

  ParameterStore probe;
  probe.add("colors", colors0);
  probe.add("sigmas", sigmas0);
  const auto loss_value = [&]() {
    ad::Tape t(false);
    Var c = t.constant(probe.value("colors"));
    Var s = t.constant(probe.value("sigmas"));
    const CompositeGraph gg = composite_rays(t, c, s, m, delta, bg, depths);
    return gg.color.val().cwiseProduct(proj).sum();
  };
  for (int i = 0; i < n * m; i += 2) {
    for (int c = 0; c < 3; ++c) {
      const double fd = test::fd_coordinate(probe, "colors", i, c, loss_value, 1e-5);
      CHECK(test::rel_error(g_colors(i, c), fd) < 1e-4);
    }
    const double fd = test::fd_coordinate(probe, "sigmas", i, 0, loss_value, 1e-5);
    CHECK(test::rel_error(g_sigmas(i, 0), fd) < 1e-4);
  }
}

TEST_CASE("indicator densities recover analytic sphere depth within one bin") {
  // opaque unit sphere at the origin, camera 4 units out
  const CameraPose cam =
      CameraPose::look_at(Vec3(0, 0, -4), Vec3::Zero(), Vec3(0, 1, 0), 80.0, 32, 32);
  const Vec3 axes(1.0, 1.0, 1.0);
  const int m = 64;
  const double z_near = 2.0, z_far = 6.0;
  const double delta = (z_far - z_near) / (m - 1);

  int hits = 0, within = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const Ray ray = pixel_to_ray(cam, Vec2(x + 0.5, y + 0.5));
      const auto t = intersect_ellipsoid(axes, ray);
      RaySamples s;
      s.delta = delta;
      s.colors = Eigen::Matrix<double, Eigen::Dynamic, 3>::Constant(m, 3, 0.5);
      s.sigmas.resize(m);
      s.depths.resize(m);
      for (int i = 0; i < m; ++i) {
        const double z = z_near + i * delta;
        s.depths(i) = z;
        s.sigmas(i) = ray.at(z).norm() <= 1.0 ? 500.0 : 0.0;
      }
      const RenderOutput out = composite(s, Vec3(1, 1, 1));
      if (!t) {
        CHECK(out.surface_index == kNoSurface);  // background stays surfaceless
        continue;
      }
      ++hits;
      if (out.surface_index != kNoSurface && std::abs(out.depth - *t) <= delta) ++within;
    }
  REQUIRE(hits > 100);
  CHECK(static_cast<double>(within) / hits >= 0.95);
}

TEST_CASE("dollying the camera back shifts center depth by the same amount") {
  const Vec3 axes(1.0, 1.0, 1.0);
  const int m = 128;
  const auto center_depth = [&](double distance) {
    const CameraPose cam = CameraPose::look_at(Vec3(0, 0, -distance), Vec3::Zero(),
                                               Vec3(0, 1, 0), 80.0, 33, 33);
    const Ray ray = pixel_to_ray(cam, Vec2(16.5, 16.5));
    const double z_near = distance - 2.0, z_far = distance + 2.0;
    const double delta = (z_far - z_near) / (m - 1);
    RaySamples s;
    s.delta = delta;
    s.colors = Eigen::Matrix<double, Eigen::Dynamic, 3>::Constant(m, 3, 0.5);
    s.sigmas.resize(m);
    s.depths.resize(m);
    for (int i = 0; i < m; ++i) {
      const double z = z_near + i * delta;
      s.depths(i) = z;
      s.sigmas(i) = ray.at(z).norm() <= 1.0 ? 500.0 : 0.0;
    }
    return composite(s, Vec3(1, 1, 1)).depth;
  };
  const double d4 = center_depth(4.0);
  const double d5 = center_depth(5.0);
  CHECK(d4 == doctest::Approx(3.0).epsilon(0.02));
  CHECK(d5 - d4 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("render_depth_map emits the sentinel when the field is empty") {
  FieldModelConfig cfg;
  cfg.width_divisor = 4;
  cfg.subjects = 1;
  cfg.expressions = 2;
  cfg.seed = 3;
  FieldModel model = FieldModel::create(cfg);
  // null the density path so sigma == 0 everywhere
  for (const LayerSpec* l : model.arch().all_layers()) {
    model.store().value("base/" + l->name).setZero();
    model.store().value("hyper/" + l->name + "/w2").setZero();
    model.store().value("hyper/" + l->name + "/b2").setZero();
  }
  const CodeSet codes = model.resolve(model.codes_for_subject(0, 0));
  const CameraPose cam =
      CameraPose::look_at(Vec3(0, 0, -4), Vec3::Zero(), Vec3(0, 1, 0), 40.0, 16, 16);
  RenderOptions opts;
  opts.samples_per_ray = 8;
  const DepthMap depth = render_depth_map(model, codes, cam, opts);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK_FALSE(depth.has_surface(x, y));
}
