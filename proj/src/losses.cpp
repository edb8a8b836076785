#include "morphnerf/losses.hpp"

#include <cmath>

#include "morphnerf/renderer.hpp"

namespace mnrf {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

ad::Mat image_channel(const Image& img, int c) {
  ad::Mat m(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) m(y, x) = img.at(x, y, c);
  return m;
}

ad::Mat image_flat(const Image& img) {
  ad::Mat m(static_cast<Eigen::Index>(img.pixel_count()), 3);
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(p), c) = img.data[p * 3 + c];
  return m;
}

/// Eager separable valid-mode blur for constant inputs.
ad::Mat blur_valid(const ad::Mat& x, const ad::Vec& kernel) {
  const Eigen::Index k = kernel.size();
  ad::Mat rows = ad::Mat::Zero(x.rows() - k + 1, x.cols());
  for (Eigen::Index u = 0; u < k; ++u) rows += kernel(u) * x.middleRows(u, rows.rows());
  ad::Mat out = ad::Mat::Zero(rows.rows(), rows.cols() - k + 1);
  for (Eigen::Index u = 0; u < k; ++u) out += kernel(u) * rows.middleCols(u, out.cols());
  return out;
}

ad::Var blur_valid_graph(ad::Var x, const ad::Vec& kernel) {
  return ad::conv_valid_cols(ad::conv_valid_rows(x, kernel), kernel);
}

}  // namespace

ad::Vec ssim_window() {
  ad::Vec k(kWindow);
  const int half = kWindow / 2;
  for (int i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i - half);
    k(i) = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
  }
  k /= k.sum();
  return k;
}

ReconResult recon_loss(ad::Tape& tape, ad::Var pred, const ad::Mat& truth) {
  const Eigen::Index n = pred.rows();
  if (n == 0) throw DomainError("recon_loss: empty batch");
  if (truth.rows() != n || truth.cols() != 3 || pred.cols() != 3)
    throw DomainError("recon_loss: shape mismatch");
  ad::Var diff = ad::sub(pred, tape.constant(truth));
  ad::Var l1 = ad::abs(diff);
  ReconResult out;
  out.value = ad::affine(ad::sum(l1), 1.0 / (3.0 * static_cast<double>(n)), 0.0);
  out.per_pixel = l1.val().rowwise().sum();
  return out;
}

ad::Var build_replaced_image(ad::Tape& tape, const Image& truth,
                             const std::vector<Eigen::Vector2i>& pixels, ad::Var pred) {
  if (pred.rows() != static_cast<Eigen::Index>(pixels.size()))
    throw DomainError("build_replaced_image: pixel/prediction count mismatch");
  std::vector<int> rows(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto& p = pixels[i];
    if (p.x() < 0 || p.x() >= truth.width || p.y() < 0 || p.y() >= truth.height)
      throw DomainError("build_replaced_image: pixel out of bounds");
    rows[i] = p.y() * truth.width + p.x();
  }
  return ad::scatter_rows(tape, image_flat(truth), std::move(rows), pred);
}

ad::Var dssim_loss(ad::Tape& tape, const Image& truth, ad::Var replaced_flat) {
  if (truth.width < kWindow || truth.height < kWindow)
    throw DomainError("dssim_loss: image smaller than the SSIM window");
  if (replaced_flat.rows() != static_cast<Eigen::Index>(truth.pixel_count()) ||
      replaced_flat.cols() != 3)
    throw DomainError("dssim_loss: replaced image shape mismatch");
  const ad::Vec window = ssim_window();

  ad::Var ssim_sum = tape.constant(ad::Mat::Zero(1, 1));
  for (int c = 0; c < 3; ++c) {
    const ad::Mat ref = image_channel(truth, c);
    const ad::Mat mu_x = blur_valid(ref, window);
    const ad::Mat var_x = blur_valid(ad::Mat(ref.cwiseProduct(ref)), window) - ad::Mat(mu_x.cwiseProduct(mu_x));

    ad::Var img = ad::reshape_rowmajor(ad::slice_cols(replaced_flat, c, 1), truth.height, truth.width);
    ad::Var mu_y = blur_valid_graph(img, window);
    ad::Var e_yy = blur_valid_graph(ad::mul(img, img), window);
    ad::Var e_xy = blur_valid_graph(ad::mul(tape.constant(ref), img), window);

    ad::Var mu_x_var = tape.constant(mu_x);
    ad::Var mu_xy = ad::mul(mu_x_var, mu_y);
    ad::Var var_y = ad::sub(e_yy, ad::mul(mu_y, mu_y));
    ad::Var cov_xy = ad::sub(e_xy, mu_xy);

    ad::Var num = ad::mul(ad::affine(mu_xy, 2.0, kC1), ad::affine(cov_xy, 2.0, kC2));
    ad::Var den1 = ad::add(tape.constant(ad::Mat(mu_x.cwiseProduct(mu_x))), ad::mul(mu_y, mu_y));
    ad::Var den2 = ad::add(tape.constant(var_x), var_y);
    ad::Var den = ad::mul(ad::affine(den1, 1.0, kC1), ad::affine(den2, 1.0, kC2));
    ssim_sum = ad::add(ssim_sum, ad::mean(ad::div(num, den)));
  }
  // dssim = (1 - ssim) / 2 with ssim averaged over channels
  return ad::affine(ssim_sum, -1.0 / 6.0, 0.5);
}

ad::Var gradient_loss(ad::Tape& tape, const Image& truth, ad::Var replaced_flat, int ray_count) {
  if (ray_count <= 0) throw DomainError("gradient_loss: ray count must be positive");
  const int w = truth.width, h = truth.height;
  const ad::Mat truth_flat = image_flat(truth);

  std::vector<int> left, right, up, down;
  left.reserve(static_cast<std::size_t>((w - 1) * h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      left.push_back(y * w + x);
      right.push_back(y * w + x + 1);
    }
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) {
      up.push_back(y * w + x);
      down.push_back((y + 1) * w + x);
    }

  const auto const_diff = [&](const std::vector<int>& a, const std::vector<int>& b) {
    ad::Mat d(static_cast<Eigen::Index>(a.size()), 3);
    for (std::size_t i = 0; i < a.size(); ++i)
      d.row(static_cast<Eigen::Index>(i)) = truth_flat.row(b[i]) - truth_flat.row(a[i]);
    return d;
  };

  ad::Var dx = ad::sub(ad::gather_rows(replaced_flat, right), ad::gather_rows(replaced_flat, left));
  ad::Var dy = ad::sub(ad::gather_rows(replaced_flat, down), ad::gather_rows(replaced_flat, up));
  ad::Var term_x = ad::sum(ad::abs(ad::sub(dx, tape.constant(const_diff(left, right)))));
  ad::Var term_y = ad::sum(ad::abs(ad::sub(dy, tape.constant(const_diff(up, down)))));
  return ad::affine(ad::add(term_x, term_y), 1.0 / (3.0 * static_cast<double>(ray_count)), 0.0);
}

namespace {

struct ViewTerms {
  ad::Var sum;       // own + masked cross contributions for one view
  int kept = 0;
};

ViewTerms view_surface_terms(ad::Tape& tape, const SurfaceViewInputs& own,
                             const SurfaceViewInputs& other) {
  const std::size_t rays = own.surface.size();
  if (own.pixels.size() != rays || own.surface_points.size() != rays)
    throw DomainError("surface_loss: per-ray array size mismatch");
  std::vector<int> rows;
  std::vector<Eigen::Index> ray_of_row;
  rows.reserve(rays);
  for (std::size_t p = 0; p < rays; ++p) {
    if (own.surface[p] == kNoSurface) continue;
    rows.push_back(static_cast<int>(p) * own.samples_per_ray + own.surface[p]);
    ray_of_row.push_back(static_cast<Eigen::Index>(p));
  }
  ViewTerms terms;
  terms.sum = tape.constant(ad::Mat::Zero(1, 1));
  if (rows.empty()) return terms;

  const Eigen::Index kept_rays = static_cast<Eigen::Index>(rows.size());
  ad::Mat own_targets(kept_rays, 3);
  ad::Mat cross_targets = ad::Mat::Zero(kept_rays, 3);
  ad::Mat cross_mask = ad::Mat::Zero(kept_rays, 1);
  for (Eigen::Index i = 0; i < kept_rays; ++i) {
    const std::size_t p = static_cast<std::size_t>(ray_of_row[i]);
    const auto& px = own.pixels[p];
    for (int c = 0; c < 3; ++c) own_targets(i, c) = own.truth->at(px.x(), px.y(), c);
    terms.kept += 1;  // own term always retained for surfaced rays
    try {
      const Projection proj = project(*other.camera, own.surface_points[p]);
      if (proj.in_frame) {
        cross_targets.row(i) =
            sample_bilinear(*other.truth, proj.pixel.x(), proj.pixel.y()).transpose();
        cross_mask(i, 0) = 1.0;
        terms.kept += 1;
      }
    } catch (const DomainError&) {
      // behind the other camera: dropped like an out-of-frame projection
    }
  }

  ad::Var colors = ad::gather_rows(own.sample_colors, rows);
  ad::Var own_term = ad::sum(ad::abs(ad::sub(colors, tape.constant(own_targets))));
  ad::Var cross_l1 = ad::row_sum(ad::abs(ad::sub(colors, tape.constant(cross_targets))));
  ad::Var cross_term = ad::sum(ad::mul(cross_l1, tape.constant(cross_mask)));
  terms.sum = ad::add(own_term, cross_term);
  return terms;
}

}  // namespace

SurfaceLossResult surface_loss(ad::Tape& tape, const SurfaceViewInputs& view1,
                               const SurfaceViewInputs& view2) {
  ViewTerms t1 = view_surface_terms(tape, view1, view2);
  ViewTerms t2 = view_surface_terms(tape, view2, view1);
  SurfaceLossResult out;
  out.kept_terms = t1.kept + t2.kept;
  if (out.kept_terms == 0) {
    out.value = tape.constant(ad::Mat::Zero(1, 1));
    out.all_dropped = true;
    return out;
  }
  // full retention gives 1.5 * 4N = 6N, the paper-scale normalizer
  out.value = ad::affine(ad::add(t1.sum, t2.sum), 1.0 / (1.5 * out.kept_terms), 0.0);
  return out;
}

ad::Var total_loss(ad::Tape& tape, ad::Var recon, ad::Var dssim, ad::Var gradient,
                   ad::Var surface, const LossWeights& weights) {
  (void)tape;
  ad::Var total = ad::add(ad::add(weights.recon * recon, weights.dssim * dssim),
                          ad::add(weights.gradient * gradient, weights.surface * surface));
  if (!std::isfinite(total.scalar()))
    throw DivergenceError("total loss is not finite");
  return total;
}

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw DomainError("ssim: image size mismatch");
  ad::Tape tape(false);
  ad::Var flat = tape.constant(image_flat(b));
  const double dssim = dssim_loss(tape, a, flat).scalar();
  return 1.0 - 2.0 * dssim;
}

}  // namespace mnrf
