#include "morphnerf/renderer.hpp"

#include <cmath>
#include <limits>

namespace mnrf {

int surface_index(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) throw DomainError("surface_index: empty weights");
  int best = kNoSurface;
  double best_w = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    if (weights(i) > best_w) {
      best_w = weights(i);
      best = i;
    }
  }
  return best;  // stays kNoSurface when every weight is zero
}

RenderOutput composite(const RaySamples& samples, const Vec3& background) {
  const int m = static_cast<int>(samples.sigmas.size());
  if (samples.colors.rows() != m) throw DomainError("composite: colors/sigmas length mismatch");
  RenderOutput out;
  out.weights.resize(m);
  double transmittance = 1.0;
  Vec3 color = Vec3::Zero();
  for (int i = 0; i < m; ++i) {
    const double alpha = 1.0 - std::exp(-samples.sigmas(i) * samples.delta);
    const double w = transmittance * alpha;
    out.weights(i) = w;
    color += w * samples.colors.row(i).transpose();
    transmittance *= 1.0 - alpha;
  }
  out.transmittance_residual = 1.0 - out.weights.sum();
  out.color = color + out.transmittance_residual * background;
  out.surface_index = surface_index(out.weights);
  if (out.surface_index == kNoSurface || samples.depths.size() == 0)
    out.depth = std::numeric_limits<double>::quiet_NaN();
  else
    out.depth = samples.depths(out.surface_index);
  return out;
}

CompositeGraph composite_rays(ad::Tape& tape, ad::Var colors, ad::Var sigmas, int samples_per_ray,
                              double delta, const Vec3& background,
                              const Eigen::VectorXd& sample_depths) {
  const Eigen::Index total = sigmas.rows();
  if (samples_per_ray < 1 || total % samples_per_ray != 0)
    throw DomainError("composite_rays: row count not a multiple of samples_per_ray");
  if (colors.rows() != total || colors.cols() != 3)
    throw DomainError("composite_rays: colors must be [N*M x 3]");
  const Eigen::Index rays = total / samples_per_ray;

  ad::Var scaled = ad::affine(sigmas, delta, 0.0);
  ad::Var alpha = ad::affine(ad::exp(ad::neg(scaled)), -1.0, 1.0);  // 1 - exp(-sigma*delta)
  ad::Var transmittance = ad::exp(ad::neg(ad::exclusive_cumsum_segments(scaled, samples_per_ray)));
  ad::Var weights = ad::mul(transmittance, alpha);

  ad::Var weighted = ad::row_scale(colors, weights);
  ad::Var color_sum = ad::segment_sum(weighted, samples_per_ray);  // [N x 3]
  ad::Var weight_sum = ad::segment_sum(weights, samples_per_ray);  // [N x 1]
  ad::Var residual = ad::affine(weight_sum, -1.0, 1.0);
  ad::Var bg_rows = tape.constant(background.transpose().replicate(rays, 1));
  ad::Var color = ad::add(color_sum, ad::row_scale(bg_rows, residual));

  CompositeGraph graph;
  graph.color = color;
  graph.weights = weights;
  graph.weight_sum = weight_sum;
  graph.surface.resize(static_cast<std::size_t>(rays), kNoSurface);
  graph.surface_depth.resize(rays);
  const ad::Mat& w = weights.val();
  for (Eigen::Index r = 0; r < rays; ++r) {
    int best = kNoSurface;
    double best_w = 0.0;
    for (int j = 0; j < samples_per_ray; ++j) {
      const double wv = w(r * samples_per_ray + j, 0);
      if (wv > best_w) {
        best_w = wv;
        best = j;
      }
    }
    graph.surface[static_cast<std::size_t>(r)] = best;
    graph.surface_depth(r) =
        best == kNoSurface || sample_depths.size() == 0
            ? std::numeric_limits<double>::quiet_NaN()
            : sample_depths(r * samples_per_ray + best);
  }
  return graph;
}

namespace {

struct ChunkGeometry {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;  // [n*M x 3]
  Eigen::Matrix<double, Eigen::Dynamic, 3> dirs;    // [n*M x 3]
  Eigen::VectorXd depths;                           // [n*M]
};

ChunkGeometry chunk_geometry(const CameraPose& camera, const std::vector<Vec2>& pixels,
                             const RenderOptions& options) {
  const int m = options.samples_per_ray;
  const Eigen::Index n = static_cast<Eigen::Index>(pixels.size());
  ChunkGeometry g;
  g.points.resize(n * m, 3);
  g.dirs.resize(n * m, 3);
  g.depths.resize(n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Ray ray = pixel_to_ray(camera, pixels[static_cast<std::size_t>(i)]);
    const RayPointSet set = ray_points(ray, options.z_near, options.z_far, m);
    g.points.middleRows(i * m, m) = set.points;
    g.dirs.middleRows(i * m, m) = ray.direction.transpose().replicate(m, 1);
    g.depths.segment(i * m, m) = set.depths;
  }
  return g;
}

}  // namespace

ViewRender render_view(const FieldModel& model, const CodeSet& codes, const CameraPose& camera,
                       const RenderOptions& options) {
  ViewRender out;
  out.image = Image(camera.width, camera.height);
  out.depth.width = camera.width;
  out.depth.height = camera.height;
  out.depth.sentinel = options.depth_sentinel;
  out.depth.values = Eigen::MatrixXd::Constant(camera.height, camera.width,
                                               static_cast<double>(options.depth_sentinel));

  // Generated weights depend only on the identity codes; compute them once.
  GeneratedWeights gen_appearance, gen_shape;
  if (model.config().hypernetwork) {
    gen_appearance = model.hypernet_forward(codes.theta_appearance).first;
    gen_shape = model.hypernet_forward(codes.theta_shape).second;
  }

  const int m = options.samples_per_ray;
  const std::size_t total_pixels = static_cast<std::size_t>(camera.width) * camera.height;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, options.chunk_rays));

  for (std::size_t start = 0; start < total_pixels; start += chunk) {
    const std::size_t count = std::min(chunk, total_pixels - start);
    std::vector<Vec2> pixels(count);
    for (std::size_t k = 0; k < count; ++k) {
      const int x = static_cast<int>((start + k) % camera.width);
      const int y = static_cast<int>((start + k) / camera.width);
      pixels[k] = Vec2(x + 0.5, y + 0.5);
    }
    const ChunkGeometry g = chunk_geometry(camera, pixels, options);

    ad::Tape tape(false);
    GraphBinding binding;
    LayerMap layers_a, layers_s;
    ad::Var identity_a, identity_s;
    if (model.config().hypernetwork) {
      layers_a = bind_generated(tape, gen_appearance, model.arch().appearance);
      layers_s = bind_generated(tape, gen_shape, model.arch().shape);
    } else {
      layers_a = model.direct_layers(tape, binding, model.arch().appearance);
      layers_s = model.direct_layers(tape, binding, model.arch().shape);
      identity_a = tape.constant(codes.theta_appearance.transpose());
      identity_s = tape.constant(codes.theta_shape.transpose());
    }
    ad::Var alpha = tape.constant(codes.alpha.transpose());
    ad::Var beta = tape.constant(codes.beta.transpose());
    ad::Var eps = tape.constant(codes.epsilon.transpose());
    const ad::Mat pe_x = encode_positions(g.points);
    const ad::Mat pe_d = encode_positions(g.dirs);
    ad::Var rgb = model.appearance_rgb(tape, layers_a, alpha, pe_x, pe_d, identity_a);
    ad::Var sigma = model.density_sigma(tape, layers_s, alpha, beta, eps, pe_x, identity_s);
    CompositeGraph comp =
        composite_rays(tape, rgb, sigma, m, (options.z_far - options.z_near) / (m - 1),
                       options.background, g.depths);

    for (std::size_t k = 0; k < count; ++k) {
      const int x = static_cast<int>((start + k) % camera.width);
      const int y = static_cast<int>((start + k) / camera.width);
      for (int c = 0; c < 3; ++c)
        out.image.at(x, y, c) = comp.color.val()(static_cast<Eigen::Index>(k), c);
      if (comp.surface[k] != kNoSurface)
        out.depth.values(y, x) = comp.surface_depth(static_cast<Eigen::Index>(k));
    }
  }
  return out;
}

DepthMap render_depth_map(const FieldModel& model, const CodeSet& codes, const CameraPose& camera,
                          const RenderOptions& options) {
  return render_view(model, codes, camera, options).depth;
}

}  // namespace mnrf
