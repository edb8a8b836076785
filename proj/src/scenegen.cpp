#include "morphnerf/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "morphnerf/rng.hpp"

namespace mnrf {

namespace {

namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;
const Vec3 kLightDir = Vec3(0.3, -0.5, 0.8).normalized();
const Vec3 kMouthAnchor = Vec3(0.0, -0.4, 0.9).normalized();
const Vec3 kBackground = Vec3(1.0, 1.0, 1.0);

Vec3 random_unit(Rng& rng) {
  while (true) {
    const Vec3 v(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

}  // namespace

SyntheticSubject generate_subject(std::uint64_t seed) {
  Rng rng(seed, "subject");
  SyntheticSubject s;
  s.id = static_cast<int>(seed & 0x7FFFFFFF);
  s.semi_axes = Vec3(rng.uniform(0.75, 1.25), rng.uniform(0.75, 1.25), rng.uniform(0.75, 1.25));
  s.base_color = Vec3(rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75));
  for (int k = 0; k < 3; ++k) {
    ColorWave w;
    w.direction = random_unit(rng);
    w.frequency = rng.uniform(1.5, 4.0);
    w.phase = Eigen::Vector3d(rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.0, 2.0 * kPi),
                              rng.uniform(0.0, 2.0 * kPi));
    w.amplitude = rng.uniform(0.05, 0.16);
    s.color_waves.push_back(w);
  }
  s.bump_amplitude = rng.uniform(0.05, 0.25);
  s.bump_direction = random_unit(rng);
  s.bump_frequency = rng.uniform(2.0, 5.0);
  return s;
}

SyntheticSubject generate_dissimilar_subject(std::uint64_t seed, int index, int count) {
  SyntheticSubject s = generate_subject(hash_combine(seed, static_cast<std::uint64_t>(index)));
  // pull hues and shapes apart deterministically
  const double phase = 2.0 * kPi * index / std::max(1, count);
  s.base_color = Vec3(0.5 + 0.35 * std::sin(phase), 0.5 + 0.35 * std::sin(phase + 2.0),
                      0.5 + 0.35 * std::sin(phase + 4.0));
  const double stretch = 0.75 + 0.5 * index / std::max(1, count - 1);
  s.semi_axes = Vec3(stretch, 2.0 - stretch, 0.8 + 0.4 * ((index % 2) ? 1.0 : 0.0)).cwiseMax(0.6);
  s.bump_frequency = 2.0 + index;
  return s;
}

ExpressionDeformation expression_deformation(int expression) {
  if (expression < 0) throw DomainError("expression_deformation: negative index");
  ExpressionDeformation e;
  e.id = expression;
  switch (expression) {
    case 0: e.axis_scale = Vec3(1.00, 1.00, 1.00); e.shading_bump = 0.0; break;
    case 1: e.axis_scale = Vec3(1.12, 0.82, 1.00); e.shading_bump = 0.25; break;
    case 2: e.axis_scale = Vec3(0.86, 1.18, 0.96); e.shading_bump = -0.2; break;
    case 3: e.axis_scale = Vec3(1.10, 1.08, 0.84); e.shading_bump = 0.15; break;
    default: {
      Rng rng(static_cast<std::uint64_t>(expression), "expression");
      e.axis_scale = Vec3(rng.uniform(0.82, 1.18), rng.uniform(0.82, 1.18), rng.uniform(0.82, 1.18));
      e.shading_bump = rng.uniform(-0.25, 0.25);
    }
  }
  return e;
}

Vec3 deformed_axes(const SyntheticSubject& subject, const ExpressionDeformation& expression) {
  return subject.semi_axes.cwiseProduct(expression.axis_scale);
}

std::optional<double> intersect_ellipsoid(const Vec3& semi_axes, const Ray& ray) {
  const Vec3 inv = semi_axes.cwiseInverse();
  const Vec3 o = ray.origin.cwiseProduct(inv);
  const Vec3 d = ray.direction.cwiseProduct(inv);
  const double a = d.squaredNorm();
  const double b = 2.0 * o.dot(d);
  const double c = o.squaredNorm() - 1.0;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2.0 * a);
  const double t1 = (-b + sq) / (2.0 * a);
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return std::nullopt;
}

Vec3 surface_color(const SyntheticSubject& subject, const ExpressionDeformation& expression,
                   const Vec3& point) {
  const Vec3 axes = deformed_axes(subject, expression);
  // canonical surface direction: unit parameter of the point on the ellipsoid
  const Vec3 u = point.cwiseQuotient(axes).normalized();
  const Vec3 normal = point.cwiseQuotient(axes.cwiseProduct(axes)).normalized();

  Vec3 albedo = subject.base_color;
  for (const ColorWave& w : subject.color_waves) {
    const double s = u.dot(w.direction) * w.frequency;
    for (int c = 0; c < 3; ++c) albedo(c) += w.amplitude * std::sin(s + w.phase(c));
  }
  albedo = albedo.cwiseMax(0.03).cwiseMin(0.97);

  double shade = 0.3 + 0.7 * std::max(0.0, normal.dot(kLightDir));
  shade *= 1.0 + 0.5 * subject.bump_amplitude *
                     std::sin(subject.bump_frequency * u.dot(subject.bump_direction));
  const double mouth = std::exp(-(u - kMouthAnchor).squaredNorm() / (2.0 * 0.15 * 0.15));
  shade *= 1.0 + expression.shading_bump * mouth;
  shade = std::clamp(shade, 0.0, 1.0);
  return albedo * shade;
}

std::vector<Vec3> anchor_directions(int count) {
  // fixed set, front-facing (+z side), loosely mimicking inner-face keypoints
  static const std::vector<Vec3> kAnchors = {
      Vec3(0.00, 0.00, 1.00),  Vec3(0.35, -0.15, 0.92), Vec3(-0.35, -0.15, 0.92),
      Vec3(0.30, 0.28, 0.91),  Vec3(-0.30, 0.28, 0.91), Vec3(0.00, -0.42, 0.90),
      Vec3(0.16, -0.40, 0.90), Vec3(-0.16, -0.40, 0.90)};
  if (count < 1 || count > static_cast<int>(kAnchors.size()))
    throw DomainError("anchor_directions: unsupported count");
  std::vector<Vec3> out(kAnchors.begin(), kAnchors.begin() + count);
  for (Vec3& a : out) a.normalize();
  return out;
}

std::vector<Vec3> anchor_points(const SyntheticSubject& subject,
                                const ExpressionDeformation& expression, int count) {
  const Vec3 axes = deformed_axes(subject, expression);
  std::vector<Vec3> out;
  for (const Vec3& u : anchor_directions(count)) out.push_back(axes.cwiseProduct(u));
  return out;
}

GroundTruthView render_groundtruth(const SyntheticSubject& subject,
                                   const ExpressionDeformation& expression,
                                   const CameraPose& camera, int landmark_count) {
  GroundTruthView view;
  view.image = Image(camera.width, camera.height);
  view.depth.width = camera.width;
  view.depth.height = camera.height;
  view.depth.sentinel = -1.0f;
  view.depth.values =
      Eigen::MatrixXd::Constant(camera.height, camera.width, static_cast<double>(-1.0f));

  const Vec3 axes = deformed_axes(subject, expression);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = pixel_to_ray(camera, Vec2(x + 0.5, y + 0.5));
      const std::optional<double> t = intersect_ellipsoid(axes, ray);
      Vec3 color = kBackground;
      if (t) {
        color = surface_color(subject, expression, ray.at(*t));
        view.depth.values(y, x) = *t;  // distance along a unit ray == z depth
      }
      for (int c = 0; c < 3; ++c) view.image.at(x, y, c) = color(c);
    }
  }

  for (const Vec3& p : anchor_points(subject, expression, landmark_count)) {
    try {
      const Projection proj = project(camera, p);
      if (proj.in_frame) view.landmarks.push_back(proj.pixel);
    } catch (const DomainError&) {
      // anchor behind the camera: skip
    }
  }
  return view;
}

CameraPose dataset_camera(const DataGenConfig& config, int view) {
  const int total = config.views + config.holdout_views;
  if (view < 0 || view >= total) throw DomainError("dataset_camera: view index out of range");
  Rng rng(config.seed, "camera/" + std::to_string(view));
  // front arc: azimuth spread with jitter, alternating elevation
  const double span = 2.0 * kPi / 3.0;  // 120 degrees
  const double base = total > 1 ? -span / 2.0 + span * view / (total - 1) : 0.0;
  const double az = base + rng.uniform(-0.05, 0.05);
  const double el = ((view % 2 == 0) ? 1.0 : -1.0) * rng.uniform(0.12, 0.35);
  const double r = config.camera_radius;
  const Vec3 eye(r * std::sin(az) * std::cos(el), r * std::sin(el), r * std::cos(az) * std::cos(el));
  return CameraPose::look_at(eye, Vec3::Zero(), Vec3(0, 1, 0),
                             config.focal_factor * config.resolution, config.resolution,
                             config.resolution);
}

SceneDataset generate_dataset(const DataGenConfig& config) {
  if (config.subjects < 1 || config.expressions < 1 || config.views < 1)
    throw DomainError("generate_dataset: counts must be positive");
  SceneDataset dataset;
  dataset.config = config;
  const int total_views = config.views + config.holdout_views;
  for (int s = 0; s < config.subjects; ++s) {
    const SyntheticSubject subject =
        config.dissimilar_subjects
            ? generate_dissimilar_subject(config.seed, s, config.subjects)
            : generate_subject(hash_combine(config.seed, static_cast<std::uint64_t>(s)));
    for (int e = 0; e < config.expressions; ++e) {
      const ExpressionDeformation expr = expression_deformation(e);
      for (int v = 0; v < total_views; ++v) {
        const CameraPose camera = dataset_camera(config, v);
        GroundTruthView gt = render_groundtruth(subject, expr, camera, config.landmark_count);
        SceneItem item;
        item.subject = s;
        item.expression = e;
        item.view = v;
        item.split = v < config.views ? "train" : "test";
        item.image = std::move(gt.image);
        item.camera = camera;
        item.depth = std::move(gt.depth);
        item.landmarks = std::move(gt.landmarks);
        dataset.items.push_back(std::move(item));
      }
    }
  }
  return dataset;
}

std::vector<const SceneItem*> SceneDataset::split_items(const std::string& split) const {
  std::vector<const SceneItem*> out;
  for (const SceneItem& item : items)
    if (split == "all" || item.split == split) out.push_back(&item);
  return out;
}

const SceneItem& SceneDataset::find(int subject, int expression, int view) const {
  for (const SceneItem& item : items)
    if (item.subject == subject && item.expression == expression && item.view == view) return item;
  throw DomainError("SceneDataset: no such item");
}

namespace {
std::string item_stem(const SceneItem& item) {
  return std::to_string(item.subject) + "/" + std::to_string(item.expression) + "/" +
         std::to_string(item.view);
}
}  // namespace

void write_dataset(const SceneDataset& dataset, const std::string& root) {
  const fs::path base(root);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw DataError("write_dataset: cannot create " + root);

  nlohmann::json manifest;
  const DataGenConfig& c = dataset.config;
  manifest["subjects"] = c.subjects;
  manifest["expressions"] = c.expressions;
  manifest["views"] = c.views;
  manifest["holdout_views"] = c.holdout_views;
  manifest["resolution"] = c.resolution;
  manifest["landmark_count"] = c.landmark_count;
  manifest["camera_radius"] = c.camera_radius;
  manifest["focal_factor"] = c.focal_factor;
  manifest["seed"] = c.seed;
  manifest["dissimilar_subjects"] = c.dissimilar_subjects;
  manifest["z_near"] = c.z_near();
  manifest["z_far"] = c.z_far();

  nlohmann::json landmarks;
  nlohmann::json items = nlohmann::json::array();
  for (const SceneItem& item : dataset.items) {
    const std::string stem = item_stem(item);
    const fs::path dir = base / std::to_string(item.subject) / std::to_string(item.expression);
    fs::create_directories(dir, ec);
    if (ec) throw DataError("write_dataset: cannot create " + dir.string());
    const std::string view_name = std::to_string(item.view);
    save_png((dir / (view_name + ".png")).string(), item.image);
    {
      std::ofstream cam(dir / (view_name + ".cam.json"));
      if (!cam) throw DataError("write_dataset: cannot write camera json");
      cam << item.camera.to_json() << "\n";
    }
    save_depth((dir / (view_name + ".depth.bin")).string(), item.depth);

    nlohmann::json entry;
    entry["subject"] = item.subject;
    entry["expression"] = item.expression;
    entry["view"] = item.view;
    entry["split"] = item.split;
    entry["image"] = stem + ".png";
    entry["camera"] = stem + ".cam.json";
    entry["depth"] = stem + ".depth.bin";
    items.push_back(entry);

    nlohmann::json lm = nlohmann::json::array();
    for (const Vec2& p : item.landmarks) lm.push_back({p.x(), p.y()});
    landmarks[stem] = lm;
  }
  manifest["items"] = items;

  std::ofstream mf(base / "manifest.json");
  if (!mf) throw DataError("write_dataset: cannot write manifest");
  mf << manifest.dump(1) << "\n";
  std::ofstream lf(base / "landmarks.json");
  if (!lf) throw DataError("write_dataset: cannot write landmarks");
  lf << landmarks.dump(1) << "\n";
}

SceneDataset load_dataset(const std::string& root) {
  const fs::path base(root);
  nlohmann::json manifest, landmarks;
  {
    std::ifstream mf(base / "manifest.json");
    if (!mf) throw DataError("load_dataset: missing manifest.json under " + root);
    try {
      mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("load_dataset: manifest: ") + e.what());
    }
  }
  {
    std::ifstream lf(base / "landmarks.json");
    if (!lf) throw DataError("load_dataset: missing landmarks.json under " + root);
    try {
      lf >> landmarks;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("load_dataset: landmarks: ") + e.what());
    }
  }

  SceneDataset dataset;
  try {
    DataGenConfig& c = dataset.config;
    c.subjects = manifest.at("subjects").get<int>();
    c.expressions = manifest.at("expressions").get<int>();
    c.views = manifest.at("views").get<int>();
    c.holdout_views = manifest.at("holdout_views").get<int>();
    c.resolution = manifest.at("resolution").get<int>();
    c.landmark_count = manifest.at("landmark_count").get<int>();
    c.camera_radius = manifest.at("camera_radius").get<double>();
    c.focal_factor = manifest.at("focal_factor").get<double>();
    c.seed = manifest.at("seed").get<std::uint64_t>();
    c.dissimilar_subjects = manifest.at("dissimilar_subjects").get<bool>();

    for (const auto& entry : manifest.at("items")) {
      SceneItem item;
      item.subject = entry.at("subject").get<int>();
      item.expression = entry.at("expression").get<int>();
      item.view = entry.at("view").get<int>();
      item.split = entry.at("split").get<std::string>();
      item.image = load_png((base / entry.at("image").get<std::string>()).string());
      {
        std::ifstream cam(base / entry.at("camera").get<std::string>());
        if (!cam) throw DataError("load_dataset: missing camera file");
        std::string text((std::istreambuf_iterator<char>(cam)), std::istreambuf_iterator<char>());
        item.camera = CameraPose::from_json(text);
      }
      item.depth = load_depth((base / entry.at("depth").get<std::string>()).string());
      const std::string stem = item_stem(item);
      if (landmarks.contains(stem))
        for (const auto& p : landmarks.at(stem))
          item.landmarks.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      dataset.items.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("load_dataset: manifest entry: ") + e.what());
  }
  return dataset;
}

}  // namespace mnrf
