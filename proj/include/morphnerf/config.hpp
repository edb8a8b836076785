#pragma once

// JSON configuration mirrored by dotted command-line overrides
// (--set train.iterations=500). Unknown keys anywhere in the file are
// rejected. One top-level seed feeds data generation, training, and fitting.

#include <cstdint>
#include <string>
#include <vector>

#include "morphnerf/geometry.hpp"
#include "morphnerf/losses.hpp"
#include "morphnerf/scenegen.hpp"

namespace mnrf {

struct SamplerSettings {
  double landmark_fraction = 0.5;
  double landmark_sigma = 6.0;
  double splat_fraction = 0.3;
  double splat_sigma = 8.0;
  double blend = 0.5;
  int reset_period = 10;
  bool adaptive = true;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  int threads = 0;  // 0 keeps the library default
  int iterations = 2000;
  int rays_per_view = 64;
  int batch_views = 2;  // the surface constraint pairs exactly two views
  int samples_per_ray = 64;
  double z_near = 0.0;  // 0 = adopt the dataset's bounds
  double z_far = 0.0;
  double lr_network = 1e-4;
  double lr_latent = 5e-4;
  LossWeights loss_weights;
  SamplerSettings sampler;
  int width_divisor = 1;
  bool hypernetwork = true;
  bool depth_jitter = false;
  Vec3 background{1.0, 1.0, 1.0};
  int log_every = 50;
  int snapshot_every = 200;
};

struct FitOptions {
  int iterations = 300;
  double lr = 1e-2;
  int rays_per_iteration = 256;
  std::uint64_t seed = 1;
};

struct AppConfig {
  TrainConfig train;
  DataGenConfig data;
  FitOptions fit;
};

AppConfig default_config();

/// Parses a config file and applies overrides ("a.b.c=value"). Throws
/// UsageError on unknown keys or malformed overrides, DataError on bad files.
AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
AppConfig config_from_json_text(const std::string& text,
                                const std::vector<std::string>& overrides);

/// TrainConfig serialization used inside checkpoints.
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace mnrf
