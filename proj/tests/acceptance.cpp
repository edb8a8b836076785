// Acceptance suite: nine numbered criteria, one pass/fail line each.
// Criteria 5, 6, and 9 share one desk-scale training run. Pass a subset of
// names (e.g. "AC1 AC4") to run only those.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <map>
#include <thread>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "morphnerf/cli.hpp"
#include "morphnerf/losses.hpp"
#include "morphnerf/sampler.hpp"
#include "morphnerf/trainer.hpp"

#include "test_helpers.hpp"

using namespace mnrf;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> g_outcomes;

void report(const std::string& name, bool pass, const std::string& detail) {
  g_outcomes.push_back({name, pass, detail});
  std::printf("%s %s — %s\n", name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// AC-1: gradient soundness of the full stage-1 loss
// ---------------------------------------------------------------------------

void run_ac1() {
  const auto start = Clock::now();

  DataGenConfig dc;
  dc.subjects = 2;
  dc.expressions = 2;
  dc.views = 2;
  dc.holdout_views = 0;
  dc.resolution = 16;
  dc.seed = 404;
  const SceneDataset data = generate_dataset(dc);

  TrainConfig cfg;
  cfg.seed = 31;
  cfg.width_divisor = 4;
  cfg.samples_per_ray = 8;
  cfg.rays_per_view = 2;  // 4-ray micro-batch across the two views
  cfg.z_near = dc.z_near();
  cfg.z_far = dc.z_far();

  FieldModelConfig mc;
  mc.width_divisor = cfg.width_divisor;
  mc.subjects = dc.subjects;
  mc.expressions = dc.expressions;
  mc.hypernetwork = true;
  mc.seed = cfg.seed;
  FieldModel model = FieldModel::create(mc);

  const SceneItem& v1 = data.find(0, 1, 0);
  const SceneItem& v2 = data.find(0, 1, 1);
  // pixels on the subject so the surface term is active
  const std::vector<Eigen::Vector2i> px1 = {{8, 8}, {7, 9}};
  const std::vector<Eigen::Vector2i> px2 = {{8, 7}, {9, 8}};

  const auto loss_value = [&]() {
    ad::Tape tape(false);
    GraphBinding binding;
    return build_stage1_loss(tape, binding, model, 0, 1, v1, v2, px1, px2, cfg).total.scalar();
  };

  ad::Tape tape;
  GraphBinding binding;
  const BatchLossGraph batch =
      build_stage1_loss(tape, binding, model, 0, 1, v1, v2, px1, px2, cfg);
  if (batch.surface_all_dropped) {
    report("AC-1", false, "surface term inactive in the micro-batch (no surfaces at init)");
    return;
  }
  tape.backward(batch.total);
  const GradientReport grads = binding.collect(tape);

  // every trainable tensor must appear in the report
  for (const auto& [name, tensor] : model.store().tensors()) {
    if (!grads.grads.count(name)) {
      report("AC-1", false, "tensor '" + name + "' missing from the gradient report");
      return;
    }
  }

  // A central difference at step h carries roundoff of about eps*|L|/h
  // (~1e-11 here), so coordinates whose true derivative sits below ~1e-7
  // cannot be resolved to 1e-4 relative by the difference itself. The
  // comparison therefore uses a denominator floored at 1e-6: genuine errors
  // on any consequential coordinate still blow past the bound, and
  // well-scaled coordinates are additionally held to the strict ratio.
  constexpr double kDenominatorFloor = 1e-6;
  constexpr double kStrictScale = 1e-5;
  double max_rel = 0.0, max_rel_strict = 0.0;
  std::string worst;
  int checked = 0;
  Rng pick(99, "ac1/coords");
  const auto check_coord = [&](const std::string& name, Eigen::Index r, Eigen::Index c,
                               double analytic) {
    const double fd = test::fd_coordinate(model.store(), name, r, c, loss_value, 1e-5);
    const double rel = test::rel_error(analytic, fd, kDenominatorFloor);
    ++checked;
    if (rel > max_rel) {
      max_rel = rel;
      worst = name;
    }
    if (std::abs(fd) > kStrictScale)
      max_rel_strict = std::max(max_rel_strict, test::rel_error(analytic, fd));
  };
  const int latent_rows[4] = {0, 0, 0, 1};  // subject 0 rows, expression row 1
  const char* latent_names[4] = {"latent/identity", "latent/appearance", "latent/shape",
                                 "latent/expression"};
  for (int t = 0; t < 4; ++t) {
    const ad::Mat& g = grads.grads.at(latent_names[t]);
    for (Eigen::Index i = 0; i < g.cols(); ++i)
      check_coord(latent_names[t], latent_rows[t], i, g(latent_rows[t], i));
  }
  for (const auto& [name, tensor] : model.store().tensors()) {
    if (name.rfind("latent/", 0) == 0) continue;
    const ad::Mat& g = grads.grads.at(name);
    for (int k = 0; k < 12; ++k) {
      const Eigen::Index r = static_cast<Eigen::Index>(pick.below(tensor.value.rows()));
      const Eigen::Index c = static_cast<Eigen::Index>(pick.below(tensor.value.cols()));
      check_coord(name, r, c, g(r, c));
    }
  }

  const double elapsed = seconds_since(start);
  const bool pass = max_rel < 1e-4 && max_rel_strict < 1e-4 && elapsed < 60.0;
  report("AC-1", pass,
         format("all four loss terms active; %d coordinates vs central differences: max rel err "
                "%.3g (noise-floored), %.3g on well-scaled coordinates (worst: %s), %.1f s",
                checked, max_rel, max_rel_strict, worst.c_str(), elapsed));
}

// ---------------------------------------------------------------------------
// AC-2: compositing against a brute-force transmittance oracle
// ---------------------------------------------------------------------------

void run_ac2() {
  const auto start = Clock::now();
  Rng rng(202);
  double max_err = 0.0, max_residual_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 8;
    RaySamples s;
    s.delta = rng.uniform(0.05, 0.5);
    s.colors.resize(m, 3);
    s.sigmas.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < 3; ++c) s.colors(i, c) = rng.uniform();
      s.sigmas(i) = rng.uniform(0.0, 25.0);
    }
    const RenderOutput out = composite(s, Vec3(1, 1, 1));
    const Eigen::VectorXd brute = test::brute_force_weights(s.sigmas, s.delta);
    max_err = std::max(max_err, (out.weights - brute).cwiseAbs().maxCoeff());
    max_residual_err = std::max(
        max_residual_err, std::abs(out.weights.sum() + out.transmittance_residual - 1.0));
  }
  const double elapsed = seconds_since(start);
  const bool pass = max_err < 1e-10 && max_residual_err < 1e-9 && elapsed < 5.0;
  report("AC-2", pass,
         format("1000 random 8-sample rays: max |omega - oracle| %.2e, max |sum+residual-1| "
                "%.2e, %.2f s",
                max_err, max_residual_err, elapsed));
}

// ---------------------------------------------------------------------------
// AC-3: sampler distributions, normalization, and reset policy
// ---------------------------------------------------------------------------

void run_ac3() {
  const auto start = Clock::now();
  bool pass = true;
  std::string detail;

  // TV distance: checked on a 4x4 map; at 1e5 draws the expected TV of a
  // K-cell histogram is ~0.4*sqrt(K/n), which crosses 0.01 already at K=64.
  {
    ProbabilityMap map = init_uniform(4, 4);
    Rng shape(7);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) map.probs(y, x) = 0.2 + shape.uniform();
    map.probs /= map.probs.sum();
    Rng rng(301);
    const auto draws = sample_pixels(map, {}, 100000, 0.0, 1.0, rng);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& p : draws) counts(p.y(), p.x()) += 1.0;
    counts /= static_cast<double>(draws.size());
    const double tv = 0.5 * (counts - map.probs).cwiseAbs().sum();
    pass = pass && tv < 0.01;
    detail += format("TV %.4f", tv);
  }

  // chi-square on an 8x8 uniform map
  {
    ProbabilityMap map = init_uniform(8, 8);
    Rng rng(302);
    const int n = 100000;
    const auto draws = sample_pixels(map, {}, n, 0.0, 1.0, rng);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(8, 8);
    for (const auto& p : draws) counts(p.y(), p.x()) += 1.0;
    double stat = 0.0;
    const double expected = n / 64.0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        stat += (counts(y, x) - expected) * (counts(y, x) - expected) / expected;
    const double p_value = test::chi_square_p_value(stat, 63);
    pass = pass && p_value > 0.001;
    detail += format(", chi-square p %.3f", p_value);
  }

  // normalization after every update
  {
    ProbabilityMap map = init_uniform(32, 32);
    Rng rng(303);
    double worst = 0.0;
    for (int round = 0; round < 50; ++round) {
      std::vector<SampledPixel> sampled;
      for (int i = 0; i < 16; ++i)
        sampled.push_back(SampledPixel{static_cast<int>(rng.below(32)),
                                       static_cast<int>(rng.below(32)), rng.uniform()});
      update_map(map, sampled, 0.3, 8.0, 0.5, rng);
      worst = std::max(worst, std::abs(map.probs.sum() - 1.0));
      if (map.probs.minCoeff() < 0.0) pass = false;
      maybe_reset(map, 10);
      worst = std::max(worst, std::abs(map.probs.sum() - 1.0));
    }
    pass = pass && worst < 1e-9;
    detail += format(", max |sum-1| %.1e", worst);
  }

  // exactly one reset per 10 visits
  {
    ProbabilityMap map = init_uniform(4, 4);
    int resets = 0;
    for (int i = 0; i < 100; ++i) {
      const int before = map.sample_visit_count;
      maybe_reset(map, 10);
      if (before == 9 && map.sample_visit_count == 0) ++resets;
    }
    pass = pass && resets == 10;
    detail += format(", %d resets in 100 visits", resets);
  }

  const double elapsed = seconds_since(start);
  pass = pass && elapsed < 30.0;
  report("AC-3", pass, detail + format(", %.2f s", elapsed));
}

// ---------------------------------------------------------------------------
// AC-4: the surface constraint vanishes on analytic ground truth
// ---------------------------------------------------------------------------

void run_ac4() {
  const auto start = Clock::now();

  const SyntheticSubject subject = generate_subject(42);
  const ExpressionDeformation expr = expression_deformation(0);
  const Vec3 axes = deformed_axes(subject, expr);
  const int res = 64;
  const double focal = 80.0;
  const auto camera_at = [&](double az) {
    const Vec3 eye(4.0 * std::sin(az), 0.3, 4.0 * std::cos(az));
    return CameraPose::look_at(eye, Vec3::Zero(), Vec3(0, 1, 0), focal, res, res);
  };
  const CameraPose cams[2] = {camera_at(-0.13), camera_at(0.13)};  // ~15 degrees apart

  Image truths[2];
  DepthMap depths[2];
  for (int i = 0; i < 2; ++i) {
    GroundTruthView v = render_groundtruth(subject, expr, cams[i], 8);
    truths[i] = std::move(v.image);
    depths[i] = std::move(v.depth);
  }

  // a correspondence is usable when the point is seen by both cameras and its
  // bilinear neighborhood in the other view stays on the surface
  const auto visible_in = [&](const Vec3& point, int view) -> std::optional<Vec2> {
    Projection proj;
    try {
      proj = project(cams[view], point);
    } catch (const DomainError&) {
      return std::nullopt;
    }
    if (!proj.in_frame) return std::nullopt;
    const Ray ray = pixel_to_ray(cams[view], proj.pixel);
    const auto t = intersect_ellipsoid(axes, ray);
    if (!t || (ray.at(*t) - point).norm() > 1e-6) return std::nullopt;
    const int x0 = static_cast<int>(proj.pixel.x() - 0.5), y0 = static_cast<int>(proj.pixel.y() - 0.5);
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const int x = std::clamp(x0 + dx, 0, res - 1), y = std::clamp(y0 + dy, 0, res - 1);
        if (!depths[view].has_surface(x, y)) return std::nullopt;
      }
    return proj.pixel;
  };

  const int m = 2;  // minimal ray: the surface sample plus one filler
  ad::Tape tape;
  SurfaceViewInputs views[2];
  int collected[2] = {0, 0};
  Rng rng(404);
  for (int i = 0; i < 2; ++i) {
    std::vector<Eigen::Vector2i> pixels;
    std::vector<Vec3> points;
    std::vector<Vec3> colors;
    while (static_cast<int>(pixels.size()) < 256) {
      const int x = static_cast<int>(rng.below(res)), y = static_cast<int>(rng.below(res));
      const Ray ray = pixel_to_ray(cams[i], Vec2(x + 0.5, y + 0.5));
      const auto t = intersect_ellipsoid(axes, ray);
      if (!t) continue;
      const Vec3 s = ray.at(*t);
      if (!visible_in(s, 1 - i)) continue;
      pixels.emplace_back(x, y);
      points.push_back(s);
      colors.push_back(surface_color(subject, expr, s));  // ground-truth surface color
    }
    collected[i] = static_cast<int>(pixels.size());
    ad::Mat sample_colors = ad::Mat::Zero(static_cast<Eigen::Index>(pixels.size()) * m, 3);
    for (std::size_t p = 0; p < pixels.size(); ++p)
      sample_colors.row(static_cast<Eigen::Index>(p) * m) = colors[p].transpose();
    views[i].sample_colors = tape.constant(sample_colors);
    views[i].samples_per_ray = m;
    views[i].surface.assign(pixels.size(), 0);
    views[i].surface_points = points;
    views[i].pixels = pixels;
    views[i].truth = &truths[i];
    views[i].camera = &cams[i];
  }

  const SurfaceLossResult result = surface_loss(tape, views[0], views[1]);
  const double value = result.value.scalar();
  const double elapsed = seconds_since(start);
  const bool pass =
      !result.all_dropped && value < 1e-3 && collected[0] == 256 && collected[1] == 256 &&
      elapsed < 30.0;
  report("AC-4", pass,
         format("L_sur %.2e on 2x256 analytic correspondences (%d terms kept), %.2f s", value,
                result.kept_terms, elapsed));
}

// ---------------------------------------------------------------------------
// AC-5/6/9 shared desk-scale run
// ---------------------------------------------------------------------------

struct DeskRun {
  SceneDataset dataset;
  TrainResult train;
  EvalSummary eval;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

DataGenConfig desk_data_config() {
  DataGenConfig dc;
  dc.subjects = 2;
  dc.expressions = 4;
  dc.views = 8;
  dc.holdout_views = 1;
  dc.resolution = 64;
  dc.seed = 1001;
  return dc;
}

TrainConfig desk_train_config() {
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.iterations = 9000;
  cfg.rays_per_view = 96;
  cfg.samples_per_ray = 64;
  cfg.width_divisor = 4;
  cfg.lr_network = 1e-3;
  cfg.lr_latent = 5e-3;
  cfg.log_every = 500;
  cfg.snapshot_every = 1000;
  cfg.threads = 8;
  return cfg;
}

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    DeskRun r;
    std::printf("  [desk run: S=2 E=4 V=8 at 64x64, M=64 ... this takes a while]\n");
    std::fflush(stdout);
    r.dataset = generate_dataset(desk_data_config());
    auto t0 = Clock::now();
    r.train = train_stage1(desk_train_config(), r.dataset);
    r.train_seconds = seconds_since(t0);
    t0 = Clock::now();
    const FieldModel model = model_from_checkpoint(r.train.checkpoint);
    r.eval = evaluate(model, r.dataset, "train", r.train.checkpoint.train_config);
    r.eval_seconds = seconds_since(t0);
    std::printf("  [desk run done: %.1f min train, %.1f min eval]\n", r.train_seconds / 60.0,
                r.eval_seconds / 60.0);
    std::fflush(stdout);
    return r;
  }();
  return run;
}

void run_ac5() {
  const DeskRun& r = desk_run();
  const bool pass = !r.train.aborted && r.eval.psnr_mean >= 26.0 && r.eval.ssim_mean >= 0.90 &&
                    r.train.checkpoint.iteration <= 20000;
  report("AC-5", pass,
         format("train-view PSNR %.2f dB (>= 26), SSIM %.4f (>= 0.90) after %lld iterations, "
                "%.1f min train on %u core(s)",
                r.eval.psnr_mean, r.eval.ssim_mean,
                static_cast<long long>(r.train.checkpoint.iteration), r.train_seconds / 60.0,
                std::max(1u, std::thread::hardware_concurrency())));
}

void run_ac6() {
  const DeskRun& r = desk_run();
  const FieldModel model = model_from_checkpoint(r.train.checkpoint);
  const RenderOptions opts = render_options_from(r.train.checkpoint.train_config);
  const DataGenConfig& dc = r.dataset.config;
  const double z_far = r.train.checkpoint.train_config.z_far;
  const int eval_views[2] = {0, 4};

  // analytic depth maps per (subject, expression, view)
  std::map<std::tuple<int, int, int>, DepthMap> analytic;
  for (int s = 0; s < dc.subjects; ++s) {
    const SyntheticSubject subject =
        generate_subject(hash_combine(dc.seed, static_cast<std::uint64_t>(s)));
    for (int e = 0; e < dc.expressions; ++e)
      for (const int v : eval_views)
        analytic[{s, e, v}] =
            render_groundtruth(subject, expression_deformation(e), dataset_camera(dc, v), 1)
                .depth;
  }

  int pairs = 0, improved = 0;
  double worst_ratio = 0.0;
  for (int s = 0; s < dc.subjects; ++s) {
    for (int e_src = 0; e_src < dc.expressions; ++e_src) {
      for (int e_tgt = 0; e_tgt < dc.expressions; ++e_tgt) {
        if (e_src == e_tgt) continue;
        // subject s wearing e_src, expression row swapped for e_tgt
        CodeSet codes = model.resolve(model.codes_for_subject(s, e_src));
        codes = edit_swap(codes, model.resolve(model.codes_for_subject(s, e_tgt)),
                          SwapComponent::Expression);
        double rmse_tgt = 0.0, rmse_src = 0.0;
        for (const int v : eval_views) {
          const DepthMap rendered = render_depth_map(model, codes, dataset_camera(dc, v), opts);
          rmse_tgt += depth_rmse(rendered, analytic.at({s, e_tgt, v}), z_far);
          rmse_src += depth_rmse(rendered, analytic.at({s, e_src, v}), z_far);
        }
        ++pairs;
        const double ratio = rmse_tgt / rmse_src;
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio <= 0.7) ++improved;
      }
    }
  }
  const bool pass = improved == pairs;
  report("AC-6", pass,
         format("expression swaps: %d/%d pairs moved depth >= 30%% toward the target geometry "
                "(worst RMSE ratio %.3f, need <= 0.70)",
                improved, pairs, worst_ratio));
}

void run_ac9() {
  const DeskRun& r = desk_run();
  const FieldModel model = model_from_checkpoint(r.train.checkpoint);

  // held-out view of a trained subject
  const SceneItem& held = r.dataset.find(0, 1, r.dataset.config.views);
  if (held.split != "test") {
    report("AC-9", false, "expected a held-out test view");
    return;
  }

  std::map<std::string, ad::Mat> before;
  for (const auto& [name, tensor] : model.store().tensors()) before[name] = tensor.value;

  FitOptions opts;
  opts.iterations = 500;
  opts.lr = 1e-2;
  opts.rays_per_iteration = 256;
  opts.seed = 17;
  const auto t0 = Clock::now();
  const FitResult fit = fit_latents(model, held.image, held.camera,
                                    r.train.checkpoint.train_config, opts);
  const double fit_seconds = seconds_since(t0);

  bool frozen = true;
  for (const auto& [name, tensor] : model.store().tensors())
    if ((tensor.value - before.at(name)).cwiseAbs().maxCoeff() != 0.0) frozen = false;

  const RenderOptions ropts = render_options_from(r.train.checkpoint.train_config);
  const ViewRender fitted = render_view(model, fit.codes, held.camera, ropts);
  const double psnr_fit = psnr(fitted.image, held.image);

  // random-latent baseline from the init distribution
  Rng rng(23);
  CodeSet random_codes;
  const MlpArchitecture& arch = model.arch();
  random_codes.theta_appearance = normal_init(rng, arch.dim_identity, 1, 0.1);
  random_codes.theta_shape = random_codes.theta_appearance;
  random_codes.alpha = normal_init(rng, arch.dim_appearance, 1, 0.1);
  random_codes.beta = normal_init(rng, arch.dim_shape, 1, 0.1);
  random_codes.epsilon = normal_init(rng, arch.dim_expression, 1, 0.1);
  const ViewRender baseline = render_view(model, random_codes, held.camera, ropts);
  const double psnr_random = psnr(baseline.image, held.image);

  const bool pass = frozen && !fit.diverged && (psnr_fit - psnr_random) >= 5.0;
  report("AC-9", pass,
         format("fit PSNR %.2f dB vs random-latent %.2f dB (margin %.2f, need >= 5); network "
                "tensors %s; %.1f s",
                psnr_fit, psnr_random, psnr_fit - psnr_random,
                frozen ? "bit-identical" : "MODIFIED", fit_seconds));
}

// ---------------------------------------------------------------------------
// AC-7: adaptive sampling vs uniform at equal budget
// ---------------------------------------------------------------------------

void run_ac7() {
  const auto start = Clock::now();
  DataGenConfig dc;
  dc.subjects = 1;
  dc.expressions = 1;
  dc.views = 3;
  dc.holdout_views = 0;
  dc.resolution = 32;
  dc.camera_radius = 8.0;  // subject small in frame
  dc.seed = 2077;
  const SceneDataset data = generate_dataset(dc);

  // textured (non-background) fraction of the frame must stay <= 25%
  double textured = 0.0;
  for (const SceneItem& item : data.items) {
    int fg = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (item.depth.has_surface(x, y)) ++fg;
    textured = std::max(textured, fg / 1024.0);
  }

  double psnr_adaptive = 0.0, psnr_uniform = 0.0;
  for (const std::uint64_t seed : {1, 2, 3}) {
    for (const bool adaptive : {true, false}) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.iterations = 800;
      cfg.rays_per_view = 48;
      cfg.samples_per_ray = 32;
      cfg.width_divisor = 4;
      cfg.lr_network = 1e-3;
      cfg.lr_latent = 5e-3;
      cfg.sampler.adaptive = adaptive;
      cfg.snapshot_every = 0;
      const TrainResult result = train_stage1(cfg, data);
      const FieldModel model = model_from_checkpoint(result.checkpoint);
      const EvalSummary summary =
          evaluate(model, data, "train", result.checkpoint.train_config);
      (adaptive ? psnr_adaptive : psnr_uniform) += summary.psnr_mean / 3.0;
    }
  }

  const double elapsed = seconds_since(start);
  const bool pass = textured <= 0.25 && psnr_adaptive >= psnr_uniform;
  report("AC-7", pass,
         format("textured fraction %.1f%%; PSNR adaptive %.2f dB vs uniform %.2f dB over 3 "
                "seeds, %.1f min",
                100.0 * textured, psnr_adaptive, psnr_uniform, elapsed / 60.0));
}

// ---------------------------------------------------------------------------
// AC-8: hypernetwork vs shared weights on dissimilar subjects
// ---------------------------------------------------------------------------

void run_ac8() {
  const auto start = Clock::now();
  DataGenConfig dc;
  dc.subjects = 4;
  dc.expressions = 2;
  dc.views = 4;
  dc.holdout_views = 0;
  dc.resolution = 32;
  dc.dissimilar_subjects = true;
  dc.seed = 3003;
  const SceneDataset data = generate_dataset(dc);

  double psnr_hyper = 0.0, psnr_shared = 0.0;
  for (const std::uint64_t seed : {1, 2, 3}) {
    for (const bool hypernetwork : {true, false}) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.iterations = 1500;
      cfg.rays_per_view = 48;
      cfg.samples_per_ray = 32;
      cfg.width_divisor = 4;
      cfg.hypernetwork = hypernetwork;
      cfg.lr_network = 1e-3;
      cfg.lr_latent = 5e-3;
      cfg.snapshot_every = 0;
      const TrainResult result = train_stage1(cfg, data);
      const FieldModel model = model_from_checkpoint(result.checkpoint);
      const EvalSummary summary =
          evaluate(model, data, "train", result.checkpoint.train_config);
      (hypernetwork ? psnr_hyper : psnr_shared) += summary.psnr_mean / 3.0;
    }
  }

  const double elapsed = seconds_since(start);
  const bool pass = psnr_hyper > psnr_shared;
  report("AC-8", pass,
         format("mean train PSNR: hypernetwork %.2f dB vs shared weights %.2f dB (margin %+.2f) "
                "over 3 seeds at divisor 4, %.1f min",
                psnr_hyper, psnr_shared, psnr_hyper - psnr_shared, elapsed / 60.0));
}

}  // namespace

int main(int argc, char** argv) {
  set_compute_threads(8);  // capped at the machine's core count
  std::set<std::string> filter;
  for (int i = 1; i < argc; ++i) filter.insert(argv[i]);
  const auto wants = [&](const char* name) {
    return filter.empty() || filter.count(name) != 0;
  };

  if (wants("AC1")) run_ac1();
  if (wants("AC2")) run_ac2();
  if (wants("AC3")) run_ac3();
  if (wants("AC4")) run_ac4();
  if (wants("AC5")) run_ac5();
  if (wants("AC6")) run_ac6();
  if (wants("AC7")) run_ac7();
  if (wants("AC8")) run_ac8();
  if (wants("AC9")) run_ac9();

  int failures = 0;
  for (const Outcome& o : g_outcomes)
    if (!o.pass) ++failures;
  std::printf("acceptance: %zu criteria run, %d failed\n", g_outcomes.size(), failures);
  return failures == 0 ? 0 : 1;
}
