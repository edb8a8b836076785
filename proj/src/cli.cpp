#include "morphnerf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "morphnerf/config.hpp"
#include "morphnerf/trainer.hpp"

namespace mnrf::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<double> vec_to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd std_to_vec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void save_codes(const CodeSet& codes, const std::string& path) {
  nlohmann::json j;
  j["theta_appearance"] = vec_to_std(codes.theta_appearance);
  j["theta_shape"] = vec_to_std(codes.theta_shape);
  j["alpha"] = vec_to_std(codes.alpha);
  j["beta"] = vec_to_std(codes.beta);
  j["epsilon"] = vec_to_std(codes.epsilon);
  std::ofstream f(path);
  if (!f) throw DataError("cannot write codes file " + path);
  f << j.dump(1) << "\n";
}

/// Accepts either table references {"subject": s, "expression": e} or
/// explicit vectors ({"theta": [...]} or the split-theta form written by
/// `edit`; "epsilon" may be a table row index or a vector).
CodeSet load_codes(const std::string& path, const FieldModel& model) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError("codes file " + path + " is not valid JSON");
  try {
    CodeSet codes;
    if (j.contains("subject")) {
      const int subject = j.at("subject").get<int>();
      const int expression = j.value("expression", 0);
      return model.resolve(model.codes_for_subject(subject, expression));
    }
    if (j.contains("theta")) {
      codes.theta_appearance = std_to_vec(j.at("theta").get<std::vector<double>>());
      codes.theta_shape = codes.theta_appearance;
    } else {
      codes.theta_appearance = std_to_vec(j.at("theta_appearance").get<std::vector<double>>());
      codes.theta_shape = std_to_vec(j.at("theta_shape").get<std::vector<double>>());
    }
    codes.alpha = std_to_vec(j.at("alpha").get<std::vector<double>>());
    codes.beta = std_to_vec(j.at("beta").get<std::vector<double>>());
    if (j.at("epsilon").is_number_integer())
      codes.epsilon = model.expression_row(j.at("epsilon").get<int>());
    else
      codes.epsilon = std_to_vec(j.at("epsilon").get<std::vector<double>>());
    return codes;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("codes file ") + path + ": " + e.what());
  }
}

Image load_image_any(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm") return load_ppm(path);
  return load_png(path);
}

void save_image_any(const Image& image, const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm")
    save_ppm(path, image);
  else
    save_png(path, image);
}

CameraPose load_camera(const std::string& path) {
  return CameraPose::from_json(read_file(path));
}

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 0;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_config = true) {
  if (with_config)
    cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--set", flags.sets, "dotted config override, e.g. train.iterations=500");
  cmd->add_option("--threads", flags.threads, "worker thread cap");
  cmd->add_option("--seed", flags.seed, "override the config seed");
}

AppConfig resolve_config(const CommonFlags& flags) {
  std::vector<std::string> overrides = flags.sets;
  if (flags.seed >= 0) overrides.push_back("seed=" + std::to_string(flags.seed));
  if (flags.threads > 0) overrides.push_back("threads=" + std::to_string(flags.threads));
  AppConfig cfg = load_config(flags.config_path, overrides);
  set_compute_threads(cfg.train.threads);
  return cfg;
}

int run_or_map_errors(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"morphable hypernetwork radiance field"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-view dataset");
  CommonFlags gen_flags;
  std::string gen_out;
  add_common(gen, gen_flags);
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train the stage-1 model");
  CommonFlags train_flags;
  std::string train_data, train_out, train_log;
  add_common(train, train_flags);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--log", train_log, "training-loss CSV path");

  // fit
  auto* fit = app.add_subcommand("fit", "fit latent codes to a single image");
  CommonFlags fit_flags;
  std::string fit_ckpt, fit_image, fit_camera, fit_out;
  add_common(fit, fit_flags);
  fit->add_option("--ckpt", fit_ckpt, "trained checkpoint")->required();
  fit->add_option("--image", fit_image, "target image (png or ppm)")->required();
  fit->add_option("--camera", fit_camera, "camera JSON for the image")->required();
  fit->add_option("--out", fit_out, "output codes JSON")->required();

  // render
  auto* render = app.add_subcommand("render", "render a view from latent codes");
  CommonFlags render_flags;
  std::string render_ckpt, render_codes, render_camera, render_out, render_depth;
  add_common(render, render_flags);
  render->add_option("--ckpt", render_ckpt, "trained checkpoint")->required();
  render->add_option("--codes", render_codes, "codes JSON")->required();
  render->add_option("--camera", render_camera, "camera JSON")->required();
  render->add_option("--out", render_out, "output image (png or ppm)")->required();
  render->add_option("--depth", render_depth, "optional depth-map output path");

  // edit
  auto* edit = app.add_subcommand("edit", "swap a latent component between code sets");
  CommonFlags edit_flags;
  std::string edit_ckpt, edit_source, edit_target, edit_component, edit_out;
  add_common(edit, edit_flags);
  edit->add_option("--ckpt", edit_ckpt, "trained checkpoint")->required();
  edit->add_option("--source", edit_source, "source codes JSON")->required();
  edit->add_option("--target", edit_target, "target codes JSON (component donor)")->required();
  edit->add_option("--component", edit_component, "appearance|shape|expression")->required();
  edit->add_option("--out", edit_out, "output codes JSON")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against a dataset");
  CommonFlags eval_flags;
  std::string eval_ckpt, eval_data, eval_split = "train", eval_report;
  add_common(eval, eval_flags);
  eval->add_option("--ckpt", eval_ckpt, "trained checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "train|test|all");
  eval->add_option("--report", eval_report, "metrics CSV output path")->required();

  std::vector<const char*> argv;
  argv.push_back("morphnerf");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    return run_or_map_errors([&] {
      const AppConfig cfg = resolve_config(gen_flags);
      const SceneDataset dataset = generate_dataset(cfg.data);
      write_dataset(dataset, gen_out);
      std::cout << "wrote " << dataset.items.size() << " views to " << gen_out << "\n";
    });
  }

  if (train->parsed()) {
    return run_or_map_errors([&] {
      const AppConfig cfg = resolve_config(train_flags);
      const SceneDataset dataset = load_dataset(train_data);
      const TrainResult result = train_stage1(cfg.train, dataset, train_log);
      save_checkpoint(result.checkpoint, train_out);
      if (result.aborted)
        throw DivergenceError("training diverged; wrote last stable checkpoint to " + train_out);
      std::cout << "trained " << result.checkpoint.iteration << " iterations; checkpoint at "
                << train_out << "\n";
      if (!result.log.empty())
        std::cout << "final total loss " << result.log.back().losses.total << "\n";
    });
  }

  if (fit->parsed()) {
    return run_or_map_errors([&] {
      const AppConfig cfg = resolve_config(fit_flags);
      const Checkpoint ckpt = load_checkpoint(fit_ckpt);
      const FieldModel model = model_from_checkpoint(ckpt);
      const Image image = load_image_any(fit_image);
      const CameraPose camera = load_camera(fit_camera);
      TrainConfig rc = ckpt.train_config;
      rc.loss_weights = cfg.train.loss_weights;
      const FitResult result = fit_latents(model, image, camera, rc, cfg.fit);
      save_codes(result.codes, fit_out);
      if (result.diverged) std::cerr << "warning: fit diverged; wrote best codes so far\n";
      const ViewRender render = render_view(model, result.codes, camera,
                                            render_options_from(rc));
      std::cout << "fit loss " << result.final_loss << ", view psnr "
                << psnr(render.image, image) << " dB, codes at " << fit_out << "\n";
    });
  }

  if (render->parsed()) {
    return run_or_map_errors([&] {
      resolve_config(render_flags);
      const Checkpoint ckpt = load_checkpoint(render_ckpt);
      const FieldModel model = model_from_checkpoint(ckpt);
      const CodeSet codes = load_codes(render_codes, model);
      const CameraPose camera = load_camera(render_camera);
      const ViewRender view = render_view(model, codes, camera,
                                          render_options_from(ckpt.train_config));
      save_image_any(view.image, render_out);
      if (!render_depth.empty()) save_depth(render_depth, view.depth);
      std::cout << "rendered " << camera.width << "x" << camera.height << " to " << render_out
                << "\n";
    });
  }

  if (edit->parsed()) {
    return run_or_map_errors([&] {
      resolve_config(edit_flags);
      const Checkpoint ckpt = load_checkpoint(edit_ckpt);
      const FieldModel model = model_from_checkpoint(ckpt);
      const CodeSet source = load_codes(edit_source, model);
      const CodeSet target = load_codes(edit_target, model);
      const CodeSet edited = edit_swap(source, target, swap_component_from_string(edit_component));
      save_codes(edited, edit_out);
      std::cout << "swapped " << edit_component << "; codes at " << edit_out << "\n";
    });
  }

  if (eval->parsed()) {
    return run_or_map_errors([&] {
      resolve_config(eval_flags);
      if (eval_split != "train" && eval_split != "test" && eval_split != "all")
        throw UsageError("--split must be train, test, or all");
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const FieldModel model = model_from_checkpoint(ckpt);
      const SceneDataset dataset = load_dataset(eval_data);
      const EvalSummary summary = evaluate(model, dataset, eval_split, ckpt.train_config);
      write_eval_csv(summary, eval_report);
      std::cout << "split " << eval_split << ": psnr " << summary.psnr_mean << " +- "
                << summary.psnr_std << " dB, ssim " << summary.ssim_mean << " +- "
                << summary.ssim_std << ", depth rmse " << summary.depth_rmse_mean << " +- "
                << summary.depth_rmse_std << "\n";
    });
  }

  return 1;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mnrf::cli
