#pragma once

// Volumetric compositing: T_i = exp(-sum_{j<i} sigma_j * delta),
// omega_i = T_i * (1 - exp(-sigma_i * delta)), pixel color
// C = sum omega_i c_i + (1 - sum omega) * background. The surface sample of a
// ray is the argmax of omega (ties toward the smaller index); rays whose
// weights are all zero have no surface. Depth is the z value at the surface
// sample, which equals distance along the ray because directions are unit.

#include <Eigen/Dense>

#include <vector>

#include "morphnerf/autodiff.hpp"
#include "morphnerf/field.hpp"
#include "morphnerf/geometry.hpp"
#include "morphnerf/image.hpp"

namespace mnrf {

inline constexpr int kNoSurface = -1;

struct RaySamples {
  Eigen::Matrix<double, Eigen::Dynamic, 3> colors;  // M x 3, entries in (0,1)
  Eigen::VectorXd sigmas;                           // M, non-negative
  double delta = 0.0;
  Eigen::VectorXd depths;  // optional z values; empty -> RenderOutput.depth is NaN
};

struct RenderOutput {
  Vec3 color;
  Eigen::VectorXd weights;
  int surface_index = kNoSurface;
  double transmittance_residual = 1.0;
  double depth = 0.0;
};

/// k = argmax of weights, first index on ties; kNoSurface when all are zero.
int surface_index(const Eigen::VectorXd& weights);

RenderOutput composite(const RaySamples& samples, const Vec3& background);

/// Graph compositing for a batch of rays laid out as consecutive blocks of
/// `samples_per_ray` rows.
struct CompositeGraph {
  ad::Var color;       // [N x 3], background already blended in
  ad::Var weights;     // [N*M x 1]
  ad::Var weight_sum;  // [N x 1]
  std::vector<int> surface;        // per-ray sample index, kNoSurface when none
  Eigen::VectorXd surface_depth;   // z at the surface sample (NaN when none)
};
CompositeGraph composite_rays(ad::Tape& tape, ad::Var colors, ad::Var sigmas, int samples_per_ray,
                              double delta, const Vec3& background,
                              const Eigen::VectorXd& sample_depths);

struct RenderOptions {
  int samples_per_ray = 64;
  double z_near = 2.0;
  double z_far = 6.0;
  Vec3 background{1.0, 1.0, 1.0};
  int chunk_rays = 2048;
  float depth_sentinel = -1.0f;
};

struct ViewRender {
  Image image;
  DepthMap depth;
};

/// Renders a full camera view with the model (no gradients, chunked).
ViewRender render_view(const FieldModel& model, const CodeSet& codes, const CameraPose& camera,
                       const RenderOptions& options);

/// Depth only; pixels without a surface carry options.depth_sentinel.
DepthMap render_depth_map(const FieldModel& model, const CodeSet& codes, const CameraPose& camera,
                          const RenderOptions& options);

}  // namespace mnrf
