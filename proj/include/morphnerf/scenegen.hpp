#pragma once

// Procedural multi-view datasets with analytic ground truth. A subject is an
// ellipsoid (exact quadric, so ray intersections and depth maps have closed
// forms) with a procedural surface color field; per-subject "bump" parameters
// modulate shading, not geometry, so the analytic intersections stay exact.
// Shading is Lambertian under one fixed light: the color of a surface point
// is view-independent by construction, which makes multi-view photometric
// consistency hold exactly in the ground truth.
//
// Expressions are shared deformations: expression e scales the ellipsoid axes
// by the same factors for every subject and adds the same localized shading
// bump. Landmarks are fixed front-facing anchor directions projected per
// view.
//
// On-disk layout:
//   root/{subject}/{expression}/{view}.png  .cam.json  .depth.bin
//   root/manifest.json   root/landmarks.json

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morphnerf/geometry.hpp"
#include "morphnerf/image.hpp"

namespace mnrf {

struct ColorWave {
  Vec3 direction;   // unit
  double frequency = 0.0;
  Eigen::Vector3d phase;  // per channel
  double amplitude = 0.0;
};

struct SyntheticSubject {
  int id = 0;
  Vec3 semi_axes;
  Vec3 base_color;
  std::vector<ColorWave> color_waves;
  double bump_amplitude = 0.0;  // shading modulation only
  Vec3 bump_direction;
  double bump_frequency = 0.0;
};

struct ExpressionDeformation {
  int id = 0;
  Vec3 axis_scale;        // shared across all subjects
  double shading_bump = 0.0;  // localized brightness change near the mouth anchor
};

/// Deterministic in the seed; parameters stay inside documented ranges
/// (semi-axes in [0.75, 1.25], wave frequencies in [1.5, 4]).
SyntheticSubject generate_subject(std::uint64_t seed);

/// Spread-out variant for ablation datasets: hue and axes separated by index.
SyntheticSubject generate_dissimilar_subject(std::uint64_t seed, int index, int count);

/// The shared deformation table; identical for every subject by construction.
ExpressionDeformation expression_deformation(int expression);

/// Effective ellipsoid semi-axes of (subject, expression).
Vec3 deformed_axes(const SyntheticSubject& subject, const ExpressionDeformation& expression);

/// Smallest positive ray parameter hitting the ellipsoid, if any.
std::optional<double> intersect_ellipsoid(const Vec3& semi_axes, const Ray& ray);

/// View-independent surface color at a world point on the deformed surface.
Vec3 surface_color(const SyntheticSubject& subject, const ExpressionDeformation& expression,
                   const Vec3& point);

/// Fixed anchor directions ("inner face" stand-ins); world-space positions
/// follow the deformed axes.
std::vector<Vec3> anchor_directions(int count);
std::vector<Vec3> anchor_points(const SyntheticSubject& subject,
                                const ExpressionDeformation& expression, int count);

struct GroundTruthView {
  Image image;
  DepthMap depth;
  std::vector<Vec2> landmarks;  // projected anchors inside the frame
};

GroundTruthView render_groundtruth(const SyntheticSubject& subject,
                                   const ExpressionDeformation& expression,
                                   const CameraPose& camera, int landmark_count);

struct DataGenConfig {
  int subjects = 2;
  int expressions = 4;
  int views = 8;
  int holdout_views = 1;  // extra test-split views per (subject, expression)
  int resolution = 64;
  int landmark_count = 8;
  double camera_radius = 4.0;
  double focal_factor = 1.25;  // focal = factor * resolution
  std::uint64_t seed = 0;
  bool dissimilar_subjects = false;

  double z_near() const { return camera_radius - 2.0; }
  double z_far() const { return camera_radius + 2.0; }
};

struct SceneItem {
  int subject = 0, expression = 0, view = 0;
  std::string split;  // "train" or "test"
  Image image;
  CameraPose camera;
  DepthMap depth;
  std::vector<Vec2> landmarks;
};

struct SceneDataset {
  DataGenConfig config;
  std::vector<SceneItem> items;

  std::vector<const SceneItem*> split_items(const std::string& split) const;
  const SceneItem& find(int subject, int expression, int view) const;
};

/// Camera for view index v (shared across subjects and expressions): front
/// arc placement with seeded azimuth/elevation jitter. Views >= config.views
/// are the held-out test placements.
CameraPose dataset_camera(const DataGenConfig& config, int view);

/// Generates the dataset fully in memory.
SceneDataset generate_dataset(const DataGenConfig& config);

/// Writes images, cameras, depth maps, manifest, and landmarks under root.
/// Regenerating with the same config produces byte-identical files.
void write_dataset(const SceneDataset& dataset, const std::string& root);

SceneDataset load_dataset(const std::string& root);

}  // namespace mnrf
