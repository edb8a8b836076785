#include "morphnerf/config.hpp"

#include <fstream>

#include "json.hpp"

namespace mnrf {

namespace {

using nlohmann::json;

json to_tree(const AppConfig& c) {
  json j;
  j["seed"] = c.train.seed;
  j["threads"] = c.train.threads;
  j["dataset"] = {{"subjects", c.data.subjects},
                  {"expressions", c.data.expressions},
                  {"views", c.data.views},
                  {"holdout_views", c.data.holdout_views},
                  {"resolution", c.data.resolution},
                  {"landmark_count", c.data.landmark_count},
                  {"camera_radius", c.data.camera_radius},
                  {"focal_factor", c.data.focal_factor},
                  {"dissimilar_subjects", c.data.dissimilar_subjects}};
  j["model"] = {{"width_divisor", c.train.width_divisor},
                {"hypernetwork", c.train.hypernetwork}};
  j["render"] = {{"samples_per_ray", c.train.samples_per_ray},
                 {"z_near", c.train.z_near},
                 {"z_far", c.train.z_far},
                 {"background", {c.train.background.x(), c.train.background.y(), c.train.background.z()}},
                 {"depth_jitter", c.train.depth_jitter}};
  j["train"] = {{"iterations", c.train.iterations},
                {"rays_per_view", c.train.rays_per_view},
                {"batch_views", c.train.batch_views},
                {"lr_network", c.train.lr_network},
                {"lr_latent", c.train.lr_latent},
                {"log_every", c.train.log_every},
                {"snapshot_every", c.train.snapshot_every},
                {"loss_weights",
                 {{"recon", c.train.loss_weights.recon},
                  {"dssim", c.train.loss_weights.dssim},
                  {"gradient", c.train.loss_weights.gradient},
                  {"surface", c.train.loss_weights.surface}}}};
  j["sampler"] = {{"landmark_fraction", c.train.sampler.landmark_fraction},
                  {"landmark_sigma", c.train.sampler.landmark_sigma},
                  {"splat_fraction", c.train.sampler.splat_fraction},
                  {"splat_sigma", c.train.sampler.splat_sigma},
                  {"blend", c.train.sampler.blend},
                  {"reset_period", c.train.sampler.reset_period},
                  {"adaptive", c.train.sampler.adaptive}};
  j["fit"] = {{"iterations", c.fit.iterations},
              {"lr", c.fit.lr},
              {"rays_per_iteration", c.fit.rays_per_iteration}};
  return j;
}

AppConfig from_tree(const json& j) {
  AppConfig c;
  c.train.seed = j.at("seed").get<std::uint64_t>();
  c.train.threads = j.at("threads").get<int>();
  c.data.seed = c.train.seed;
  c.fit.seed = c.train.seed;

  const json& d = j.at("dataset");
  c.data.subjects = d.at("subjects").get<int>();
  c.data.expressions = d.at("expressions").get<int>();
  c.data.views = d.at("views").get<int>();
  c.data.holdout_views = d.at("holdout_views").get<int>();
  c.data.resolution = d.at("resolution").get<int>();
  c.data.landmark_count = d.at("landmark_count").get<int>();
  c.data.camera_radius = d.at("camera_radius").get<double>();
  c.data.focal_factor = d.at("focal_factor").get<double>();
  c.data.dissimilar_subjects = d.at("dissimilar_subjects").get<bool>();

  const json& m = j.at("model");
  c.train.width_divisor = m.at("width_divisor").get<int>();
  c.train.hypernetwork = m.at("hypernetwork").get<bool>();

  const json& r = j.at("render");
  c.train.samples_per_ray = r.at("samples_per_ray").get<int>();
  c.train.z_near = r.at("z_near").get<double>();
  c.train.z_far = r.at("z_far").get<double>();
  const auto bg = r.at("background").get<std::vector<double>>();
  if (bg.size() != 3) throw UsageError("config: render.background needs 3 entries");
  c.train.background = Vec3(bg[0], bg[1], bg[2]);
  c.train.depth_jitter = r.at("depth_jitter").get<bool>();

  const json& t = j.at("train");
  c.train.iterations = t.at("iterations").get<int>();
  c.train.rays_per_view = t.at("rays_per_view").get<int>();
  c.train.batch_views = t.at("batch_views").get<int>();
  c.train.lr_network = t.at("lr_network").get<double>();
  c.train.lr_latent = t.at("lr_latent").get<double>();
  c.train.log_every = t.at("log_every").get<int>();
  c.train.snapshot_every = t.at("snapshot_every").get<int>();
  const json& w = t.at("loss_weights");
  c.train.loss_weights.recon = w.at("recon").get<double>();
  c.train.loss_weights.dssim = w.at("dssim").get<double>();
  c.train.loss_weights.gradient = w.at("gradient").get<double>();
  c.train.loss_weights.surface = w.at("surface").get<double>();

  const json& s = j.at("sampler");
  c.train.sampler.landmark_fraction = s.at("landmark_fraction").get<double>();
  c.train.sampler.landmark_sigma = s.at("landmark_sigma").get<double>();
  c.train.sampler.splat_fraction = s.at("splat_fraction").get<double>();
  c.train.sampler.splat_sigma = s.at("splat_sigma").get<double>();
  c.train.sampler.blend = s.at("blend").get<double>();
  c.train.sampler.reset_period = s.at("reset_period").get<int>();
  c.train.sampler.adaptive = s.at("adaptive").get<bool>();

  const json& f = j.at("fit");
  c.fit.iterations = f.at("iterations").get<int>();
  c.fit.lr = f.at("lr").get<double>();
  c.fit.rays_per_iteration = f.at("rays_per_iteration").get<int>();
  return c;
}

void reject_unknown_keys(const json& given, const json& reference, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    if (!reference.contains(key))
      throw UsageError("config: unknown key '" + prefix + key + "'");
    if (value.is_object() && reference.at(key).is_object())
      reject_unknown_keys(value, reference.at(key), prefix + key + ".");
  }
}

void merge(json& base, const json& given) {
  for (const auto& [key, value] : given.items()) {
    if (value.is_object() && base.contains(key) && base.at(key).is_object())
      merge(base.at(key), value);
    else
      base[key] = value;
  }
}

void apply_override(json& tree, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw UsageError("override '" + spec + "' must look like key.path=value");
  const std::string path = spec.substr(0, eq);
  const std::string value_text = spec.substr(eq + 1);

  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= path.size(); ++i) {
    if (i == path.size() || path[i] == '.') {
      if (i == start) throw UsageError("override '" + spec + "' has an empty path segment");
      parts.push_back(path.substr(start, i - start));
      start = i + 1;
    }
  }

  json* node = &tree;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object())
      throw UsageError("override: unknown key '" + path + "'");
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!node->contains(leaf)) throw UsageError("override: unknown key '" + path + "'");

  json parsed = json::parse(value_text, nullptr, false);
  if (parsed.is_discarded()) parsed = value_text;  // treat as a bare string
  (*node)[leaf] = parsed;
}

AppConfig build(json given, const std::vector<std::string>& overrides) {
  json tree = to_tree(AppConfig{});
  reject_unknown_keys(given, tree, "");
  merge(tree, given);
  for (const std::string& o : overrides) apply_override(tree, o);
  try {
    return from_tree(tree);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

}  // namespace

AppConfig default_config() { return AppConfig{}; }

AppConfig config_from_json_text(const std::string& text,
                                const std::vector<std::string>& overrides) {
  json given = json::parse(text, nullptr, false);
  if (given.is_discarded()) throw DataError("config: malformed JSON");
  if (!given.is_object()) throw DataError("config: top level must be an object");
  return build(std::move(given), overrides);
}

AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) return build(json::object(), overrides);
  std::ifstream f(path);
  if (!f) throw DataError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return config_from_json_text(text, overrides);
}

std::string train_config_to_json(const TrainConfig& config) {
  AppConfig app;
  app.train = config;
  json j = to_tree(app);
  j.erase("dataset");
  j.erase("fit");
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  json given = json::parse(text, nullptr, false);
  if (given.is_discarded()) throw DataError("train config: malformed JSON");
  json tree = to_tree(AppConfig{});
  merge(tree, given);
  return from_tree(tree).train;
}

}  // namespace mnrf
