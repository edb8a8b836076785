#include "morphnerf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "morphnerf/losses.hpp"
#include "morphnerf/sampler.hpp"

namespace mnrf {

RenderOptions render_options_from(const TrainConfig& config) {
  RenderOptions opts;
  opts.samples_per_ray = config.samples_per_ray;
  opts.z_near = config.z_near;
  opts.z_far = config.z_far;
  opts.background = config.background;
  return opts;
}

void set_compute_threads(int threads) {
  if (threads <= 0) return;
  // more threads than cores makes Eigen's spin-waiting GEMM barriers thrash
  const int cap = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cap);
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  Eigen::setNbThreads(threads);
}

namespace {

struct ViewGroup {
  int subject = 0, expression = 0;
  std::vector<const SceneItem*> views;
};

std::vector<ViewGroup> group_views(const SceneDataset& dataset) {
  std::map<std::pair<int, int>, ViewGroup> groups;
  for (const SceneItem* item : dataset.split_items("train")) {
    ViewGroup& g = groups[{item->subject, item->expression}];
    g.subject = item->subject;
    g.expression = item->expression;
    g.views.push_back(item);
  }
  std::vector<ViewGroup> out;
  for (auto& [key, g] : groups)
    if (g.views.size() >= 2) out.push_back(std::move(g));
  if (out.empty())
    throw DomainError("train: need at least 2 training views per (subject, expression)");
  return out;
}

struct ViewGraph {
  ad::Var rgb;  // [N*M x 3]
  CompositeGraph comp;
  ReconResult recon;
  ad::Var dssim;
  ad::Var gradient;
  SurfaceViewInputs surface;
};

/// Marches the sampled rays of one view through the field and assembles the
/// per-view loss terms.
ViewGraph build_view_graph(ad::Tape& tape, const FieldModel& model, const LayerMap& layers_a,
                           const LayerMap& layers_s, ad::Var alpha, ad::Var beta, ad::Var eps,
                           ad::Var identity, const SceneItem& item,
                           const std::vector<Eigen::Vector2i>& pixels, const TrainConfig& cfg,
                           Rng* jitter_rng) {
  const int n = static_cast<int>(pixels.size());
  const int m = cfg.samples_per_ray;
  const double delta = (cfg.z_far - cfg.z_near) / static_cast<double>(m - 1);

  Eigen::Matrix<double, Eigen::Dynamic, 3> points(n * m, 3), dirs(n * m, 3);
  Eigen::VectorXd depths(n * m);
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& px = pixels[static_cast<std::size_t>(i)];
    const Ray ray = pixel_to_ray(item.camera, Vec2(px.x() + 0.5, px.y() + 0.5));
    const double jitter = cfg.depth_jitter && jitter_rng ? jitter_rng->uniform(0.0, delta) : 0.0;
    for (int j = 0; j < m; ++j) {
      const double z = cfg.z_near + j * delta + jitter;
      depths(i * m + j) = z;
      points.row(i * m + j) = ray.at(z).transpose();
      dirs.row(i * m + j) = ray.direction.transpose();
    }
    rays.push_back(ray);
  }

  ViewGraph out;
  const ad::Mat pe_x = encode_positions(points);
  const ad::Mat pe_d = encode_positions(dirs);
  out.rgb = model.appearance_rgb(tape, layers_a, alpha, pe_x, pe_d, identity);
  ad::Var sigma = model.density_sigma(tape, layers_s, alpha, beta, eps, pe_x, identity);
  out.comp = composite_rays(tape, out.rgb, sigma, m, delta, cfg.background, depths);

  ad::Mat truth(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      truth(i, c) = item.image.at(pixels[static_cast<std::size_t>(i)].x(),
                                  pixels[static_cast<std::size_t>(i)].y(), c);
  out.recon = recon_loss(tape, out.comp.color, truth);
  ad::Var replaced = build_replaced_image(tape, item.image, pixels, out.comp.color);
  out.dssim = dssim_loss(tape, item.image, replaced);
  out.gradient = gradient_loss(tape, item.image, replaced, n);

  out.surface.sample_colors = out.rgb;
  out.surface.samples_per_ray = m;
  out.surface.surface = out.comp.surface;
  out.surface.pixels = pixels;
  out.surface.truth = &item.image;
  out.surface.camera = &item.camera;
  out.surface.surface_points.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (out.comp.surface[static_cast<std::size_t>(i)] != kNoSurface)
      out.surface.surface_points[static_cast<std::size_t>(i)] =
          rays[static_cast<std::size_t>(i)].at(out.comp.surface_depth(i));
  }
  return out;
}

}  // namespace

BatchLossGraph build_stage1_loss(ad::Tape& tape, GraphBinding& binding, const FieldModel& model,
                                 int subject, int expression, const SceneItem& view1,
                                 const SceneItem& view2,
                                 const std::vector<Eigen::Vector2i>& pixels1,
                                 const std::vector<Eigen::Vector2i>& pixels2,
                                 const TrainConfig& cfg, Rng* jitter_rng) {
  ad::Var theta = binding.use_row(tape, model.store(), "latent/identity", subject);
  ad::Var alpha = binding.use_row(tape, model.store(), "latent/appearance", subject);
  ad::Var beta = binding.use_row(tape, model.store(), "latent/shape", subject);
  ad::Var eps = binding.use_row(tape, model.store(), "latent/expression", expression);

  LayerMap layers_a, layers_s;
  if (model.config().hypernetwork) {
    layers_a = model.generate_layers(tape, binding, theta, model.arch().appearance);
    layers_s = model.generate_layers(tape, binding, theta, model.arch().shape);
  } else {
    layers_a = model.direct_layers(tape, binding, model.arch().appearance);
    layers_s = model.direct_layers(tape, binding, model.arch().shape);
  }

  ViewGraph views[2] = {build_view_graph(tape, model, layers_a, layers_s, alpha, beta, eps, theta,
                                         view1, pixels1, cfg, jitter_rng),
                        build_view_graph(tape, model, layers_a, layers_s, alpha, beta, eps, theta,
                                         view2, pixels2, cfg, jitter_rng)};

  BatchLossGraph out;
  out.recon = ad::affine(ad::add(views[0].recon.value, views[1].recon.value), 0.5, 0.0);
  out.dssim = ad::affine(ad::add(views[0].dssim, views[1].dssim), 0.5, 0.0);
  out.gradient = ad::affine(ad::add(views[0].gradient, views[1].gradient), 0.5, 0.0);
  const SurfaceLossResult surface = surface_loss(tape, views[0].surface, views[1].surface);
  out.surface = surface.value;
  out.surface_all_dropped = surface.all_dropped;
  out.total = total_loss(tape, out.recon, out.dssim, out.gradient, out.surface, cfg.loss_weights);
  out.per_pixel_recon[0] = views[0].recon.per_pixel;
  out.per_pixel_recon[1] = views[1].recon.per_pixel;
  return out;
}

TrainResult train_stage1(const TrainConfig& config_in, const SceneDataset& dataset,
                         const std::string& log_csv_path) {
  TrainConfig cfg = config_in;
  if (cfg.batch_views != 2)
    throw DomainError("train: batch_views must be 2 (the surface constraint pairs views)");
  if (cfg.rays_per_view < 2) throw DomainError("train: rays_per_view must be at least 2");
  if (cfg.samples_per_ray < 2) throw DomainError("train: samples_per_ray must be at least 2");
  if (cfg.z_near == 0.0 && cfg.z_far == 0.0) {
    cfg.z_near = dataset.config.z_near();
    cfg.z_far = dataset.config.z_far();
  }
  set_compute_threads(cfg.threads);

  FieldModelConfig mc;
  mc.width_divisor = cfg.width_divisor;
  mc.subjects = dataset.config.subjects;
  mc.expressions = dataset.config.expressions;
  mc.hypernetwork = cfg.hypernetwork;
  mc.seed = cfg.seed;
  FieldModel model = FieldModel::create(mc);

  const std::vector<ViewGroup> groups = group_views(dataset);

  std::map<const SceneItem*, ProbabilityMap> maps;
  std::map<const SceneItem*, Rng> pixel_rngs;
  const auto rng_for = [&](const SceneItem* item) -> Rng& {
    auto it = pixel_rngs.find(item);
    if (it == pixel_rngs.end()) {
      const std::string stem = std::to_string(item->subject) + "/" +
                               std::to_string(item->expression) + "/" +
                               std::to_string(item->view);
      it = pixel_rngs.emplace(item, Rng(cfg.seed, "sampler/" + stem)).first;
    }
    return it->second;
  };

  Adam adam;
  const auto lr_for = [&](const std::string& name) {
    return name.rfind("latent/", 0) == 0 ? cfg.lr_latent : cfg.lr_network;
  };

  Rng pick_rng(cfg.seed, "train/pick");
  Rng jitter_rng(cfg.seed, "train/jitter");

  std::ofstream csv;
  if (!log_csv_path.empty()) {
    csv.open(log_csv_path);
    if (!csv) throw DataError("train: cannot open log file " + log_csv_path);
    csv << "iteration,recon,dssim,gradient,surface,total\n";
  }

  TrainResult result;
  ParameterStore snapshot = model.store();
  std::int64_t snapshot_iter = 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    try {
      const ViewGroup& group = groups[pick_rng.below(groups.size())];
      const std::size_t v1 = pick_rng.below(group.views.size());
      std::size_t v2 = pick_rng.below(group.views.size() - 1);
      if (v2 >= v1) ++v2;
      const SceneItem* items[2] = {group.views[v1], group.views[v2]};

      std::vector<Eigen::Vector2i> pixels[2];
      for (int v = 0; v < 2; ++v) {
        const SceneItem* item = items[v];
        auto mit = maps.find(item);
        if (mit == maps.end())
          mit = maps.emplace(item, init_uniform(item->image.height, item->image.width)).first;
        ProbabilityMap uniform_draws;
        const ProbabilityMap* draw_from = &mit->second;
        if (!cfg.sampler.adaptive) {
          uniform_draws = init_uniform(item->image.height, item->image.width);
          draw_from = &uniform_draws;
        }
        pixels[v] = sample_pixels(*draw_from, item->landmarks, cfg.rays_per_view,
                                  cfg.sampler.landmark_fraction, cfg.sampler.landmark_sigma,
                                  rng_for(item));
      }

      ad::Tape tape;
      GraphBinding binding;
      const BatchLossGraph batch =
          build_stage1_loss(tape, binding, model, group.subject, group.expression, *items[0],
                            *items[1], pixels[0], pixels[1], cfg, &jitter_rng);

      tape.backward(batch.total);
      const GradientReport grads = binding.collect(tape);
      adam.step(model.store(), grads, lr_for);

      TrainLogRow row;
      row.iteration = iter;
      row.losses.recon = batch.recon.scalar();
      row.losses.dssim = batch.dssim.scalar();
      row.losses.gradient = batch.gradient.scalar();
      row.losses.surface = batch.surface.scalar();
      row.losses.total = batch.total.scalar();
      row.losses.surface_all_dropped = batch.surface_all_dropped;
      result.log.push_back(row);
      if (csv.is_open() && (iter % std::max(1, cfg.log_every) == 0 || iter + 1 == cfg.iterations))
        csv << iter << "," << row.losses.recon << "," << row.losses.dssim << ","
            << row.losses.gradient << "," << row.losses.surface << "," << row.losses.total
            << "\n";

      if (cfg.sampler.adaptive) {
        for (int v = 0; v < 2; ++v) {
          const SceneItem* item = items[v];
          std::vector<SampledPixel> sampled(pixels[v].size());
          for (std::size_t i = 0; i < pixels[v].size(); ++i)
            sampled[i] = SampledPixel{pixels[v][i].x(), pixels[v][i].y(),
                                      batch.per_pixel_recon[v](static_cast<Eigen::Index>(i))};
          ProbabilityMap& map = maps.at(item);
          update_map(map, sampled, cfg.sampler.splat_fraction, cfg.sampler.splat_sigma,
                     cfg.sampler.blend, rng_for(item));
          maybe_reset(map, cfg.sampler.reset_period);
        }
      }

      if (cfg.snapshot_every > 0 && (iter + 1) % cfg.snapshot_every == 0) {
        snapshot = model.store();
        snapshot_iter = iter + 1;
      }
    } catch (const DivergenceError&) {
      result.aborted = true;
      result.checkpoint.store = snapshot;
      result.checkpoint.iteration = snapshot_iter;
      result.checkpoint.model_config = mc;
      result.checkpoint.train_config = cfg;
      return result;
    }
  }

  result.checkpoint.model_config = mc;
  result.checkpoint.train_config = cfg;
  result.checkpoint.iteration = cfg.iterations;
  result.checkpoint.store = model.store();
  return result;
}

namespace {

double probe_recon(const FieldModel& model, const Image& image, const CameraPose& camera,
                   const TrainConfig& cfg, const CodeSet& codes,
                   const std::vector<Eigen::Vector2i>& pixels) {
  ad::Tape tape(false);
  GraphBinding binding;
  ad::Var theta = tape.constant(codes.theta_shape.transpose());
  ad::Var alpha = tape.constant(codes.alpha.transpose());
  ad::Var beta = tape.constant(codes.beta.transpose());
  ad::Var eps = tape.constant(codes.epsilon.transpose());
  LayerMap layers_a, layers_s;
  if (model.config().hypernetwork) {
    layers_a = model.generate_layers(tape, binding, theta, model.arch().appearance, true);
    layers_s = model.generate_layers(tape, binding, theta, model.arch().shape, true);
  } else {
    layers_a = model.direct_layers(tape, binding, model.arch().appearance, true);
    layers_s = model.direct_layers(tape, binding, model.arch().shape, true);
  }
  SceneItem scratch;
  scratch.image = image;
  scratch.camera = camera;
  ViewGraph graph = build_view_graph(tape, model, layers_a, layers_s, alpha, beta, eps, theta,
                                     scratch, pixels, cfg, nullptr);
  return graph.recon.value.scalar();
}

}  // namespace

FitResult fit_latents(const FieldModel& model, const Image& image, const CameraPose& camera,
                      const TrainConfig& render_config, const FitOptions& options) {
  TrainConfig cfg = render_config;
  cfg.depth_jitter = false;
  const MlpArchitecture& arch = model.arch();
  const ParameterStore& net = model.store();

  CodeSet init;
  init.theta_appearance = net.value("latent/identity").colwise().mean().transpose();
  init.theta_shape = init.theta_appearance;
  init.alpha = net.value("latent/appearance").colwise().mean().transpose();
  init.beta = net.value("latent/shape").colwise().mean().transpose();

  Rng rng(options.seed, "fit/pixels");
  const ProbabilityMap uniform = init_uniform(image.height, image.width);
  const int probe_rays = std::min(std::max(2, options.rays_per_iteration), 256);
  const std::vector<Eigen::Vector2i> probe_pixels =
      sample_pixels(uniform, {}, probe_rays, 0.0, 1.0, rng);

  // nearest expression row by probe reconstruction loss
  const ad::Mat& table = net.value("latent/expression");
  int best_row = 0;
  double best_probe = std::numeric_limits<double>::infinity();
  for (int e = 0; e < table.rows(); ++e) {
    CodeSet probe = init;
    probe.epsilon = table.row(e).transpose();
    const double loss = probe_recon(model, image, camera, cfg, probe, probe_pixels);
    if (loss < best_probe) {
      best_probe = loss;
      best_row = e;
    }
  }
  init.epsilon = table.row(best_row).transpose();

  ParameterStore fit_store;
  fit_store.add("fit/identity", init.theta_appearance.transpose());
  fit_store.add("fit/appearance", init.alpha.transpose());
  fit_store.add("fit/shape", init.beta.transpose());
  fit_store.add("fit/expression", init.epsilon.transpose());

  Adam adam;
  FitResult result;
  result.codes = init;
  result.init_expression = best_row;
  result.initial_loss = best_probe;
  double best_loss = std::numeric_limits<double>::infinity();

  const auto codes_from_store = [&]() {
    CodeSet c;
    c.theta_appearance = fit_store.value("fit/identity").transpose();
    c.theta_shape = c.theta_appearance;
    c.alpha = fit_store.value("fit/appearance").transpose();
    c.beta = fit_store.value("fit/shape").transpose();
    c.epsilon = fit_store.value("fit/expression").transpose();
    return c;
  };

  for (int iter = 0; iter < options.iterations; ++iter) {
    try {
      const std::vector<Eigen::Vector2i> pixels =
          sample_pixels(uniform, {}, std::max(2, options.rays_per_iteration), 0.0, 1.0, rng);
      ad::Tape tape;
      GraphBinding binding;
      ad::Var theta = binding.use(tape, fit_store, "fit/identity");
      ad::Var alpha = binding.use(tape, fit_store, "fit/appearance");
      ad::Var beta = binding.use(tape, fit_store, "fit/shape");
      ad::Var eps = binding.use(tape, fit_store, "fit/expression");

      GraphBinding unused;
      LayerMap layers_a, layers_s;
      if (model.config().hypernetwork) {
        layers_a = model.generate_layers(tape, unused, theta, arch.appearance, true);
        layers_s = model.generate_layers(tape, unused, theta, arch.shape, true);
      } else {
        layers_a = model.direct_layers(tape, unused, arch.appearance, true);
        layers_s = model.direct_layers(tape, unused, arch.shape, true);
      }

      SceneItem scratch;
      scratch.image = image;
      scratch.camera = camera;
      ViewGraph graph = build_view_graph(tape, model, layers_a, layers_s, alpha, beta, eps, theta,
                                         scratch, pixels, cfg, nullptr);
      ad::Var total =
          ad::add(ad::add(cfg.loss_weights.recon * graph.recon.value,
                          cfg.loss_weights.dssim * graph.dssim),
                  cfg.loss_weights.gradient * graph.gradient);
      if (!std::isfinite(total.scalar())) throw DivergenceError("fit: non-finite loss");

      tape.backward(total);
      const GradientReport grads = binding.collect(tape);
      adam.step(fit_store, grads, options.lr);

      result.final_loss = total.scalar();
      if (result.final_loss < best_loss) {
        best_loss = result.final_loss;
        result.codes = codes_from_store();
      }
    } catch (const DivergenceError&) {
      result.diverged = true;
      return result;  // best-so-far codes
    }
  }
  if (options.iterations > 0) result.codes = codes_from_store();
  return result;
}

SwapComponent swap_component_from_string(const std::string& name) {
  if (name == "appearance") return SwapComponent::Appearance;
  if (name == "shape") return SwapComponent::Shape;
  if (name == "expression") return SwapComponent::Expression;
  throw UsageError("unknown component '" + name + "' (want appearance|shape|expression)");
}

CodeSet edit_swap(const CodeSet& base, const CodeSet& donor, SwapComponent component) {
  CodeSet out = base;
  switch (component) {
    case SwapComponent::Appearance:
      out.alpha = donor.alpha;
      out.theta_appearance = donor.theta_appearance;
      break;
    case SwapComponent::Shape:
      out.beta = donor.beta;
      out.theta_shape = donor.theta_shape;
      break;
    case SwapComponent::Expression:
      out.epsilon = donor.epsilon;
      break;
  }
  return out;
}

double depth_rmse(const DepthMap& rendered, const DepthMap& truth, double z_far) {
  if (rendered.width != truth.width || rendered.height != truth.height)
    throw DomainError("depth_rmse: size mismatch");
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < truth.height; ++y)
    for (int x = 0; x < truth.width; ++x) {
      if (!truth.has_surface(x, y)) continue;
      const double r = rendered.has_surface(x, y) ? rendered.values(y, x) : z_far;
      const double d = r - truth.values(y, x);
      sum += d * d;
      ++count;
    }
  return count > 0 ? std::sqrt(sum / count) : 0.0;
}

EvalSummary evaluate(const FieldModel& model, const SceneDataset& dataset,
                     const std::string& split, const TrainConfig& config) {
  TrainConfig cfg = config;
  if (cfg.z_near == 0.0 && cfg.z_far == 0.0) {
    cfg.z_near = dataset.config.z_near();
    cfg.z_far = dataset.config.z_far();
  }
  const RenderOptions opts = render_options_from(cfg);

  EvalSummary summary;
  for (const SceneItem* item : dataset.split_items(split)) {
    const CodeSet codes = model.resolve(model.codes_for_subject(item->subject, item->expression));
    const ViewRender render = render_view(model, codes, item->camera, opts);
    EvalRow row;
    row.subject = item->subject;
    row.expression = item->expression;
    row.view = item->view;
    row.split = item->split;
    row.psnr = psnr(render.image, item->image);
    row.ssim = ssim(item->image, render.image);
    row.depth_rmse = depth_rmse(render.depth, item->depth, cfg.z_far);
    summary.rows.push_back(row);
  }

  const auto stats = [&](auto getter, double& mean, double& stddev) {
    if (summary.rows.empty()) return;
    double sum = 0.0;
    for (const EvalRow& r : summary.rows) sum += getter(r);
    mean = sum / static_cast<double>(summary.rows.size());
    double sq = 0.0;
    for (const EvalRow& r : summary.rows) sq += (getter(r) - mean) * (getter(r) - mean);
    stddev = summary.rows.size() > 1 ? std::sqrt(sq / static_cast<double>(summary.rows.size() - 1))
                                     : 0.0;
  };
  stats([](const EvalRow& r) { return r.psnr; }, summary.psnr_mean, summary.psnr_std);
  stats([](const EvalRow& r) { return r.ssim; }, summary.ssim_mean, summary.ssim_std);
  stats([](const EvalRow& r) { return r.depth_rmse; }, summary.depth_rmse_mean,
        summary.depth_rmse_std);
  return summary;
}

void write_eval_csv(const EvalSummary& summary, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("eval: cannot open report file " + path);
  f << "subject,expression,view,split,psnr,ssim,depth_rmse\n";
  for (const EvalRow& r : summary.rows)
    f << r.subject << "," << r.expression << "," << r.view << "," << r.split << "," << r.psnr
      << "," << r.ssim << "," << r.depth_rmse << "\n";
  f << "# mean,,,all," << summary.psnr_mean << "," << summary.ssim_mean << ","
    << summary.depth_rmse_mean << "\n";
  f << "# std,,,all," << summary.psnr_std << "," << summary.ssim_std << ","
    << summary.depth_rmse_std << "\n";
}

}  // namespace mnrf
