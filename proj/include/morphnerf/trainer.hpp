#pragma once

// Stage-1 training loop, single-image latent fitting, code swapping,
// evaluation metrics, and checkpoint round-tripping.

#include <cstdint>
#include <string>
#include <vector>

#include "morphnerf/config.hpp"
#include "morphnerf/field.hpp"
#include "morphnerf/renderer.hpp"
#include "morphnerf/scenegen.hpp"

namespace mnrf {

struct Checkpoint {
  FieldModelConfig model_config;
  TrainConfig train_config;
  std::int64_t iteration = 0;
  ParameterStore store;
};

/// Binary container: magic "HMFC", version u32, header length u64, JSON
/// header (iteration, configs, tensor names/shapes/dtypes), then raw
/// little-endian float64 payloads in header order. Round-trips bit-exactly.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

FieldModel model_from_checkpoint(const Checkpoint& checkpoint);

/// Caps OpenMP/Eigen worker counts (no-op for values <= 0).
void set_compute_threads(int threads);
RenderOptions render_options_from(const TrainConfig& config);

/// One row of the CSV training log.
struct TrainLogRow {
  std::int64_t iteration = 0;
  LossReport losses;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
  bool aborted = false;  // NaN divergence: checkpoint holds the last snapshot
};

/// Each iteration draws one (subject, expression), two distinct views, N
/// pixels per view (landmark/adaptive split), marches and composites the
/// rays, applies the four-term loss, steps Adam, feeds per-pixel recon losses
/// back into the per-image probability maps, and applies the reset policy.
TrainResult train_stage1(const TrainConfig& config, const SceneDataset& dataset,
                         const std::string& log_csv_path = "");

/// The full stage-1 loss for one two-view batch, on the caller's tape. This
/// is the exact graph the training loop optimizes; exposed so numerical
/// checks can differentiate the production path.
struct BatchLossGraph {
  ad::Var recon, dssim, gradient, surface, total;
  bool surface_all_dropped = false;
  Eigen::VectorXd per_pixel_recon[2];
};
BatchLossGraph build_stage1_loss(ad::Tape& tape, GraphBinding& binding, const FieldModel& model,
                                 int subject, int expression, const SceneItem& view1,
                                 const SceneItem& view2,
                                 const std::vector<Eigen::Vector2i>& pixels1,
                                 const std::vector<Eigen::Vector2i>& pixels2,
                                 const TrainConfig& config, Rng* depth_jitter_rng = nullptr);

struct FitResult {
  CodeSet codes;
  double final_loss = 0.0;
  double initial_loss = 0.0;
  bool diverged = false;
  int init_expression = 0;  // table row used to initialize the free code
};

/// Optimizes identity/appearance/shape/expression codes against one image
/// with every network tensor frozen. The expression code is a free vector
/// initialized from the probe-best table row; the other codes start at the
/// training-table means.
FitResult fit_latents(const FieldModel& model, const Image& image, const CameraPose& camera,
                      const TrainConfig& render_config, const FitOptions& options);

enum class SwapComponent { Appearance, Shape, Expression };
SwapComponent swap_component_from_string(const std::string& name);

/// Appearance swaps take the donor's appearance code and the identity half
/// feeding the generated appearance MLP; shape swaps mirror that; expression
/// swaps replace only the expression code.
CodeSet edit_swap(const CodeSet& base, const CodeSet& donor, SwapComponent component);

struct EvalRow {
  int subject = 0, expression = 0, view = 0;
  std::string split;
  double psnr = 0.0, ssim = 0.0, depth_rmse = 0.0;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  double depth_rmse_mean = 0.0, depth_rmse_std = 0.0;
};

/// Depth RMSE is computed over pixels with analytic ground-truth surface;
/// rendered no-surface pixels count as the far bound.
EvalSummary evaluate(const FieldModel& model, const SceneDataset& dataset,
                     const std::string& split, const TrainConfig& config);

void write_eval_csv(const EvalSummary& summary, const std::string& path);

/// RMSE between a rendered depth map and analytic ground truth, masked to the
/// ground truth's surface pixels (sentinels in the rendering become z_far).
double depth_rmse(const DepthMap& rendered, const DepthMap& truth, double z_far);

}  // namespace mnrf
