// Operator entry point: dataset synthesis, training, evaluation, scanpath
// export, heatmap rendering, and the K/T sweep, all over one flat config.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "panoscan/config.hpp"
#include "panoscan/errors.hpp"
#include "panoscan/png_io.hpp"
#include "panoscan/ppo.hpp"
#include "panoscan/viz.hpp"

namespace fs = std::filesystem;
using namespace panoscan;
using ordered_json = nlohmann::ordered_json;

namespace {

// Leftover "--key value" / "--key=value" tokens become config overrides, so
// every RunConfig field is reachable without a dedicated flag.
void apply_extras(const std::vector<std::string>& extras, RunConfig& cfg) {
  std::size_t i = 0;
  while (i < extras.size()) {
    std::string tok = extras[i];
    if (tok.rfind("--", 0) != 0)
      throw ConfigError("unexpected argument '" + tok + "'");
    tok = tok.substr(2);
    auto eq = tok.find('=');
    if (eq != std::string::npos) {
      apply_override(cfg, tok.substr(0, eq), tok.substr(eq + 1));
      ++i;
    } else {
      if (i + 1 >= extras.size())
        throw ConfigError("missing value for override --" + tok);
      apply_override(cfg, tok, extras[i + 1]);
      i += 2;
    }
  }
}

RunConfig base_config(const std::string& config_path) {
  return config_path.empty() ? RunConfig{} : load_config(config_path);
}

std::string sibling_snapshot(const std::string& out_path) {
  fs::path p(out_path);
  return (p.parent_path() / (p.stem().string() + ".config.json")).string();
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(std::stoul(cur));
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

struct LoadedModel {
  ParameterSet policy_ps, assessor_ps;
  TrainOptions opt;
};

LoadedModel load_model(const RunConfig& cfg, const std::string& ckpt) {
  LoadedModel m;
  m.opt = to_train_options(cfg);
  init_policy_params(m.policy_ps, m.opt.policy, Rng(cfg.seed ^ 0x706f6cULL));
  init_assessor_params(m.assessor_ps, m.opt.assessor,
                       Rng(cfg.seed ^ 0x617373ULL));
  load_checkpoint(ckpt, m.policy_ps, m.assessor_ps);
  return m;
}

std::vector<Scanpath> sample_paths(LoadedModel& m, const ImageFeatures& f,
                                   std::size_t K, std::size_t T,
                                   std::uint64_t seed, bool greedy) {
  Rng rng(seed);
  auto eps = rollout(f, m.policy_ps, m.opt.policy, K, T, MaskMode::revisit,
                     rng, greedy ? ActionSelect::greedy : ActionSelect::sample);
  std::vector<Scanpath> paths;
  paths.reserve(eps.size());
  for (auto& e : eps) paths.push_back(std::move(e.first));
  return paths;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panoscan: RL scanpath generation for blind 360-degree IQA"};
  app.require_subcommand(1);

  std::string config_path;

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a labeled panorama set");
  std::string synth_out = "data";
  std::string synth_split;
  synth->add_option("--config", config_path, "config JSON");
  synth->add_option("--out", synth_out, "output directory");
  std::size_t synth_n = 0;
  std::uint64_t synth_seed_flag = 0;
  synth->add_option("--n", synth_n, "image count");
  synth->add_option("--seed", synth_seed_flag, "generator seed");
  synth->add_option("--split", synth_split, "train,test fractions (e.g. 0.8,0.2)");
  synth->allow_extras();

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "joint PPO + assessor training");
  std::string train_data = "data", train_out = "run";
  std::vector<std::string> train_ablate;
  bool single_thread = false;
  train_cmd->add_option("--config", config_path, "config JSON");
  train_cmd->add_option("--data", train_data,
                        "dataset dir holding train.jsonl/test.jsonl");
  train_cmd->add_option("--out", train_out, "run output directory");
  train_cmd->add_option("--ablate", train_ablate,
                        "ablation preset (repeatable)");
  train_cmd->add_flag("--single-thread", single_thread,
                      "force threads=1 for bit reproducibility");
  train_cmd->allow_extras();

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "score a manifest with a checkpoint");
  std::string eval_ckpt, eval_manifest, eval_out = "predictions.json";
  eval_cmd->add_option("--config", config_path, "config JSON");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "JSONL manifest")->required();
  eval_cmd->add_option("--out", eval_out, "per-image prediction JSON");
  eval_cmd->allow_extras();

  // ---- scanpath ----
  auto* scan_cmd = app.add_subcommand("scanpath", "export sampled scanpaths");
  std::string scan_ckpt, scan_image, scan_out;
  bool scan_greedy = false;
  scan_cmd->add_option("--config", config_path, "config JSON");
  scan_cmd->add_option("--ckpt", scan_ckpt, "checkpoint file")->required();
  scan_cmd->add_option("--image", scan_image, "panorama PNG")->required();
  scan_cmd->add_option("--out", scan_out, "output file (default stdout)");
  scan_cmd->add_flag("--greedy", scan_greedy, "argmax actions");
  scan_cmd->allow_extras();

  // ---- heatmap ----
  auto* heat_cmd = app.add_subcommand("heatmap", "attention heatmap PNG");
  std::string heat_ckpt, heat_image, heat_out = "heatmap.png";
  double heat_alpha = 0.6;
  heat_cmd->add_option("--config", config_path, "config JSON");
  heat_cmd->add_option("--ckpt", heat_ckpt, "checkpoint file")->required();
  heat_cmd->add_option("--image", heat_image, "panorama PNG")->required();
  heat_cmd->add_option("--out", heat_out, "output PNG");
  heat_cmd->add_option("--alpha", heat_alpha, "overlay opacity");
  heat_cmd->allow_extras();

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "K/T grid of srcc/plcc");
  std::string sweep_ckpt, sweep_manifest, sweep_out = "sweep.csv";
  std::string sweep_k = "5,10,15,20,50", sweep_t = "4,7,15";
  sweep_cmd->add_option("--config", config_path, "config JSON");
  sweep_cmd->add_option("--ckpt", sweep_ckpt, "checkpoint file")->required();
  sweep_cmd->add_option("--manifest", sweep_manifest, "JSONL manifest")
      ->required();
  sweep_cmd->add_option("--K", sweep_k, "comma list of scanpath counts");
  sweep_cmd->add_option("--T", sweep_t, "comma list of scanpath lengths");
  sweep_cmd->add_option("--out", sweep_out, "output CSV");
  sweep_cmd->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      RunConfig cfg = base_config(config_path);
      if (synth->count("--n")) cfg.n_images = synth_n;
      if (synth->count("--seed")) cfg.synth_seed = synth_seed_flag;
      if (!synth_split.empty()) {
        double a = 0.0, b = 0.0;
        if (std::sscanf(synth_split.c_str(), "%lf,%lf", &a, &b) != 2 ||
            a <= 0.0 || b <= 0.0)
          throw ConfigError("--split expects two positive numbers a,b");
        cfg.train_frac = a / (a + b);
      }
      apply_extras(synth->remaining(), cfg);
      validate_config(cfg);
      DatasetPaths paths =
          make_dataset(synth_out, cfg.n_images, cfg.synth_seed, cfg.train_frac,
                       cfg.width, cfg.height, cfg.label_noise);
      write_config_snapshot(cfg, (fs::path(synth_out) / "config_snapshot.json").string());
      std::printf("train %zu -> %s\ntest  %zu -> %s\n", paths.n_train,
                  paths.train_manifest.c_str(), paths.n_test,
                  paths.test_manifest.c_str());
    } else if (train_cmd->parsed()) {
      RunConfig cfg = base_config(config_path);
      for (const auto& preset : train_ablate) apply_ablation(cfg, preset);
      if (single_thread) cfg.threads = 1;
      apply_extras(train_cmd->remaining(), cfg);
      validate_config(cfg);
      std::string train_manifest = (fs::path(train_data) / "train.jsonl").string();
      std::string test_manifest = (fs::path(train_data) / "test.jsonl").string();
      for (const auto& m : {train_manifest, test_manifest})
        if (!fs::exists(m)) throw DataError("missing manifest: " + m);
      TrainOptions opt = to_train_options(cfg);
      opt.out_dir = train_out;
      fs::create_directories(train_out);
      write_config_snapshot(cfg, (fs::path(train_out) / "config_snapshot.json").string());
      TrainResult res = train(train_manifest, test_manifest, opt);
      const EpochRow& last = res.history.back();
      std::printf("done: %zu epochs, val srcc %.4f (best %.4f)\n",
                  res.history.size(), last.val_srcc, res.best_val_srcc);
      std::printf("checkpoint %s\nbest       %s\ncsv        %s\n",
                  res.checkpoint_path.c_str(), res.best_checkpoint_path.c_str(),
                  res.csv_path.c_str());
    } else if (eval_cmd->parsed()) {
      RunConfig cfg = base_config(config_path);
      apply_extras(eval_cmd->remaining(), cfg);
      validate_config(cfg);
      auto samples = load_manifest(eval_manifest);
      LoadedModel m = load_model(cfg, eval_ckpt);
      FeatureStore store(fs::path(eval_manifest).parent_path().string(),
                         cfg.n_yaw, cfg.n_pitch, cfg.fov_deg, cfg.render_res,
                         cfg.feature_dim);
      EvalReport rep = evaluate(m.policy_ps, m.assessor_ps, m.opt, store,
                                samples, cfg.K, cfg.T, cfg.seed);
      std::printf("srcc %.6f  plcc %.6f  n %zu\n", rep.srcc_v, rep.plcc_v,
                  rep.n);
      ordered_json arr = ordered_json::array();
      for (std::size_t i = 0; i < samples.size(); ++i)
        arr.push_back({{"image", samples[i].image_path},
                       {"mos", rep.pairs[i].first},
                       {"q_hat", rep.pairs[i].second},
                       {"K", cfg.K},
                       {"T", cfg.T}});
      std::ofstream out(eval_out);
      if (!out) throw DataError("cannot write " + eval_out);
      out << arr.dump(2) << "\n";
      write_config_snapshot(cfg, sibling_snapshot(eval_out));
    } else if (scan_cmd->parsed()) {
      RunConfig cfg = base_config(config_path);
      apply_extras(scan_cmd->remaining(), cfg);
      validate_config(cfg);
      Image erp = load_png(scan_image);
      LoadedModel m = load_model(cfg, scan_ckpt);
      ViewportGrid grid = build_grid(cfg.n_yaw, cfg.n_pitch, cfg.fov_deg);
      ImageFeatures f =
          compute_features(erp, grid, cfg.render_res, cfg.feature_dim);
      auto paths = sample_paths(m, f, cfg.K, cfg.T, cfg.seed, scan_greedy);
      std::string lines;
      for (std::size_t k = 0; k < paths.size(); ++k) {
        ordered_json j{{"k", k},
                       {"indices", paths[k].indices},
                       {"log_probs", paths[k].log_probs}};
        lines += j.dump() + "\n";
      }
      if (scan_out.empty()) {
        std::fputs(lines.c_str(), stdout);
      } else {
        std::ofstream out(scan_out);
        if (!out) throw DataError("cannot write " + scan_out);
        out << lines;
        write_config_snapshot(cfg, sibling_snapshot(scan_out));
      }
    } else if (heat_cmd->parsed()) {
      RunConfig cfg = base_config(config_path);
      apply_extras(heat_cmd->remaining(), cfg);
      validate_config(cfg);
      Image erp = load_png(heat_image);
      LoadedModel m = load_model(cfg, heat_ckpt);
      ViewportGrid grid = build_grid(cfg.n_yaw, cfg.n_pitch, cfg.fov_deg);
      ImageFeatures f =
          compute_features(erp, grid, cfg.render_res, cfg.feature_dim);
      auto paths = sample_paths(m, f, cfg.K, cfg.T, cfg.seed, false);
      GrayImage density = visit_density(erp.width, erp.height, grid,
                                        visit_counts(grid, paths));
      save_png(heat_out, heatmap_overlay(erp, density, heat_alpha));
      write_config_snapshot(cfg, sibling_snapshot(heat_out));
      std::printf("wrote %s (%zux%zu)\n", heat_out.c_str(), erp.width,
                  erp.height);
    } else if (sweep_cmd->parsed()) {
      RunConfig cfg = base_config(config_path);
      apply_extras(sweep_cmd->remaining(), cfg);
      validate_config(cfg);
      auto samples = load_manifest(sweep_manifest);
      LoadedModel m = load_model(cfg, sweep_ckpt);
      FeatureStore store(fs::path(sweep_manifest).parent_path().string(),
                         cfg.n_yaw, cfg.n_pitch, cfg.fov_deg, cfg.render_res,
                         cfg.feature_dim);
      auto cells = sweep(parse_size_list(sweep_k), parse_size_list(sweep_t),
                         [&](std::size_t K, std::size_t T) {
                           EvalReport r = evaluate(m.policy_ps, m.assessor_ps,
                                                   m.opt, store, samples, K, T,
                                                   cfg.seed);
                           return std::make_pair(r.srcc_v, r.plcc_v);
                         });
      std::string csv = sweep_csv(cells);
      std::ofstream out(sweep_out);
      if (!out) throw DataError("cannot write " + sweep_out);
      out << csv;
      write_config_snapshot(cfg, sibling_snapshot(sweep_out));
      std::fputs(csv.c_str(), stdout);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
