#pragma once

// The stage-1 loss stack.
//   recon:    (1/3N) * sum_p |C_p - Chat_p|_1, per-pixel L1 values exported
//             for the adaptive sampler.
//   dssim:    (1 - SSIM(I, I')) / 2 on the "replaced image" I' (ground truth
//             with sampled pixels overwritten by predictions). SSIM uses an
//             11x11 Gaussian window, sigma 1.5, C1 = (0.01)^2, C2 = (0.03)^2
//             on unit-range images, valid-window mean over the 3 channels.
//   gradient: (1/3N) * |grad I - grad I'|_1 with forward differences in x and
//             y concatenated.
//   surface:  four-term multi-view L1 consistency at per-ray surface samples,
//             normalized by 1/(6N); terms whose ray lacks a surface or whose
//             cross-view projection leaves the frame are dropped and the
//             normalizer shrinks proportionally (1.5 * retained terms).
// Total is the weighted sum; all weights default to 1.

#include <Eigen/Dense>

#include <vector>

#include "morphnerf/autodiff.hpp"
#include "morphnerf/geometry.hpp"
#include "morphnerf/image.hpp"

namespace mnrf {

struct LossWeights {
  double recon = 1.0, dssim = 1.0, gradient = 1.0, surface = 1.0;
};

struct LossReport {
  double recon = 0.0, dssim = 0.0, gradient = 0.0, surface = 0.0, total = 0.0;
  bool surface_all_dropped = false;
};

struct ReconResult {
  ad::Var value;
  Eigen::VectorXd per_pixel;  // unnormalized 3-channel L1 per pixel
};

/// pred [N x 3] (graph), truth [N x 3] (constant). Throws on N == 0.
ReconResult recon_loss(ad::Tape& tape, ad::Var pred, const ad::Mat& truth);

/// Ground-truth image flattened to [H*W x 3] with sampled pixel rows replaced
/// by predicted colors. Duplicate pixels: last write wins.
ad::Var build_replaced_image(ad::Tape& tape, const Image& truth,
                             const std::vector<Eigen::Vector2i>& pixels, ad::Var pred);

/// Structural dissimilarity between the truth image and a replaced image
/// living on the tape as [H*W x 3]. Images must be at least 11x11.
ad::Var dssim_loss(ad::Tape& tape, const Image& truth, ad::Var replaced_flat);

/// Image-gradient preservation; `ray_count` is N in the 1/(3N) normalizer.
ad::Var gradient_loss(ad::Tape& tape, const Image& truth, ad::Var replaced_flat, int ray_count);

/// Everything the surface constraint needs to know about one view's batch.
struct SurfaceViewInputs {
  ad::Var sample_colors;  // [N*M x 3] per-sample predicted colors (graph)
  int samples_per_ray = 0;
  std::vector<int> surface;              // per-ray surface sample or kNoSurface
  std::vector<Vec3> surface_points;      // world-space surface points
  std::vector<Eigen::Vector2i> pixels;   // sampled pixel coordinates
  const Image* truth = nullptr;
  const CameraPose* camera = nullptr;
};

struct SurfaceLossResult {
  ad::Var value;
  bool all_dropped = false;
  int kept_terms = 0;
};

SurfaceLossResult surface_loss(ad::Tape& tape, const SurfaceViewInputs& view1,
                               const SurfaceViewInputs& view2);

/// Weighted sum; throws DivergenceError if the result is not finite.
ad::Var total_loss(ad::Tape& tape, ad::Var recon, ad::Var dssim, ad::Var gradient,
                   ad::Var surface, const LossWeights& weights);

/// Plain SSIM metric between two images (same windowing as dssim_loss).
double ssim(const Image& a, const Image& b);

/// The 11-tap Gaussian window (sigma 1.5) used by SSIM, normalized to sum 1.
ad::Vec ssim_window();

}  // namespace mnrf
