#pragma once

// Loss-guided adaptive pixel sampling. Each training image owns an H x W
// probability map that sums to 1. After an iteration, a uniformly chosen 30%
// of that iteration's sampled pixels deposit Gaussian splats weighted by
// their reconstruction loss; the splat field is normalized and blended into
// the old map. Maps reset to uniform every `reset_period` iterations in which
// their image was sampled. Pixel draws split between isotropic Gaussians
// around landmarks and i.i.d. draws from the map (with replacement).

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "morphnerf/geometry.hpp"
#include "morphnerf/rng.hpp"

namespace mnrf {

struct ProbabilityMap {
  Eigen::MatrixXd probs;  // height x width, non-negative, sums to 1
  int sample_visit_count = 0;

  int width() const { return static_cast<int>(probs.cols()); }
  int height() const { return static_cast<int>(probs.rows()); }
};

struct GaussianSplat {
  Vec2 mu;                 // pixel center
  Eigen::Matrix2d sigma;   // covariance, symmetric positive definite
  double scale = 0.0;      // per-pixel reconstruction loss value
};

struct SampledPixel {
  int x = 0, y = 0;
  double loss = 0.0;
};

ProbabilityMap init_uniform(int height, int width);

/// Dense evaluation of one splat's weight at pixel (x, y).
double splat_weight(const GaussianSplat& splat, double x, double y);

/// Deposits splats for a uniformly chosen ceil(fraction * n) subset of the
/// sampled pixels (isotropic covariance splat_sigma^2 * I), then blends the
/// normalized contribution into the map. A subset whose losses are all zero
/// leaves the map unchanged.
void update_map(ProbabilityMap& map, const std::vector<SampledPixel>& sampled, double fraction,
                double splat_sigma, double blend, Rng& rng);

/// floor(landmark_fraction * n) pixels from Gaussians around uniformly chosen
/// landmarks (rejection-sampled into bounds, clamped after 16 tries), the
/// rest i.i.d. from the map. An empty landmark set sends all n draws to the
/// map. Requires n >= 2.
std::vector<Eigen::Vector2i> sample_pixels(const ProbabilityMap& map,
                                           const std::vector<Vec2>& landmarks, int n,
                                           double landmark_fraction, double landmark_sigma,
                                           Rng& rng);

/// Counts a visit; on the `reset_period`-th visit the map becomes uniform and
/// the counter returns to zero.
void maybe_reset(ProbabilityMap& map, int reset_period = 10);

/// Debug dump: map scaled by its max value, written as grayscale PNG.
void dump_probability_map(const ProbabilityMap& map, const std::string& path);

}  // namespace mnrf
