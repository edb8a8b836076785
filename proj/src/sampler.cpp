#include "morphnerf/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "morphnerf/image.hpp"

namespace mnrf {

namespace {
constexpr double kTwoPi = 6.28318530717958647692528676656;

void renormalize(ProbabilityMap& map) {
  const double total = map.probs.sum();
  if (total <= 0.0) throw DomainError("probability map: non-positive total mass");
  map.probs /= total;
}
}  // namespace

ProbabilityMap init_uniform(int height, int width) {
  if (height < 1 || width < 1) throw DomainError("init_uniform: empty image");
  ProbabilityMap map;
  map.probs = Eigen::MatrixXd::Constant(height, width,
                                        1.0 / (static_cast<double>(height) * width));
  map.sample_visit_count = 0;
  return map;
}

double splat_weight(const GaussianSplat& splat, double x, double y) {
  const double det = splat.sigma.determinant();
  if (det <= 0.0) throw DomainError("splat_weight: covariance not positive definite");
  const Vec2 d(x - splat.mu.x(), y - splat.mu.y());
  const Vec2 solved = splat.sigma.ldlt().solve(d);
  const double quad = d.dot(solved);
  return splat.scale / (kTwoPi * std::sqrt(det)) * std::exp(-0.5 * quad);
}

void update_map(ProbabilityMap& map, const std::vector<SampledPixel>& sampled, double fraction,
                double splat_sigma, double blend, Rng& rng) {
  if (sampled.empty()) return;
  if (!(splat_sigma > 0.0)) throw DomainError("update_map: splat_sigma must be positive");
  const int n = static_cast<int>(sampled.size());
  const int k = std::min(n, static_cast<int>(std::ceil(fraction * n)));

  // uniform subset without replacement (partial Fisher-Yates)
  std::vector<int> order(sampled.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  bool any_loss = false;
  for (int i = 0; i < k; ++i)
    if (sampled[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].loss > 0.0)
      any_loss = true;
  if (!any_loss) return;

  const int h = map.height(), w = map.width();
  Eigen::MatrixXd contribution = Eigen::MatrixXd::Zero(h, w);
  const double inv_two_var = 1.0 / (2.0 * splat_sigma * splat_sigma);
  const double prefactor = 1.0 / (kTwoPi * splat_sigma * splat_sigma);
  for (int i = 0; i < k; ++i) {
    const SampledPixel& s = sampled[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    if (s.x < 0 || s.x >= w || s.y < 0 || s.y >= h)
      throw DomainError("update_map: sampled pixel out of bounds");
    if (s.loss < 0.0) throw DomainError("update_map: negative loss");
    if (s.loss == 0.0) continue;
    const double peak = s.loss * prefactor;
    for (int y = 0; y < h; ++y) {
      const double dy2 = static_cast<double>(y - s.y) * (y - s.y);
      for (int x = 0; x < w; ++x) {
        const double dx2 = static_cast<double>(x - s.x) * (x - s.x);
        contribution(y, x) += peak * std::exp(-(dx2 + dy2) * inv_two_var);
      }
    }
  }

  const double mass = contribution.sum();
  if (mass <= 0.0) return;
  contribution /= mass;
  map.probs = (1.0 - blend) * map.probs + blend * contribution;
  renormalize(map);
}

std::vector<Eigen::Vector2i> sample_pixels(const ProbabilityMap& map,
                                           const std::vector<Vec2>& landmarks, int n,
                                           double landmark_fraction, double landmark_sigma,
                                           Rng& rng) {
  if (n < 2) throw DomainError("sample_pixels: need at least 2 samples");
  const int h = map.height(), w = map.width();
  const int n_landmark =
      landmarks.empty() ? 0 : static_cast<int>(std::floor(landmark_fraction * n));

  std::vector<Eigen::Vector2i> out;
  out.reserve(static_cast<std::size_t>(n));

  for (int i = 0; i < n_landmark; ++i) {
    const Vec2& lm = landmarks[rng.below(landmarks.size())];
    int x = 0, y = 0;
    bool accepted = false;
    for (int attempt = 0; attempt < 16 && !accepted; ++attempt) {
      x = static_cast<int>(std::lround(lm.x() + landmark_sigma * rng.normal()));
      y = static_cast<int>(std::lround(lm.y() + landmark_sigma * rng.normal()));
      accepted = x >= 0 && x < w && y >= 0 && y < h;
    }
    if (!accepted) {
      x = std::clamp(x, 0, w - 1);
      y = std::clamp(y, 0, h - 1);
    }
    out.emplace_back(x, y);
  }

  // inverse-CDF multinomial draws from the map, with replacement
  std::vector<double> cdf(static_cast<std::size_t>(h) * w);
  double acc = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      acc += map.probs(y, x);
      cdf[static_cast<std::size_t>(y) * w + x] = acc;
    }
  const double total = acc;
  for (int i = n_landmark; i < n; ++i) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t idx = std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    out.emplace_back(static_cast<int>(idx % static_cast<std::size_t>(w)),
                     static_cast<int>(idx / static_cast<std::size_t>(w)));
  }
  return out;
}

void maybe_reset(ProbabilityMap& map, int reset_period) {
  if (reset_period < 1) throw DomainError("maybe_reset: period must be positive");
  ++map.sample_visit_count;
  if (map.sample_visit_count >= reset_period) {
    map = init_uniform(map.height(), map.width());
  }
}

void dump_probability_map(const ProbabilityMap& map, const std::string& path) {
  const double peak = map.probs.maxCoeff();
  save_png_gray(path, peak > 0.0 ? Eigen::MatrixXd(map.probs / peak) : map.probs);
}

}  // namespace mnrf
