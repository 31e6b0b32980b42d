#include "panoscan/config.hpp"

#include <fstream>
#include <sstream>
#include <variant>

#include <nlohmann/json.hpp>

#include "panoscan/errors.hpp"

namespace panoscan {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

static_assert(std::is_same_v<std::size_t, std::uint64_t>,
              "seed members ride the size_t alternative");
using Member = std::variant<double RunConfig::*, std::size_t RunConfig::*,
                            bool RunConfig::*>;

struct FieldDef {
  const char* name;
  Member member;
};

// Declaration order doubles as snapshot order.
const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      {"n_images", &RunConfig::n_images},
      {"synth_seed", &RunConfig::synth_seed},
      {"train_frac", &RunConfig::train_frac},
      {"width", &RunConfig::width},
      {"height", &RunConfig::height},
      {"label_noise", &RunConfig::label_noise},
      {"n_yaw", &RunConfig::n_yaw},
      {"n_pitch", &RunConfig::n_pitch},
      {"fov_deg", &RunConfig::fov_deg},
      {"render_res", &RunConfig::render_res},
      {"feature_dim", &RunConfig::feature_dim},
      {"d_h", &RunConfig::d_h},
      {"d_z", &RunConfig::d_z},
      {"gru_layers", &RunConfig::gru_layers},
      {"critic_hidden", &RunConfig::critic_hidden},
      {"d_a", &RunConfig::d_a},
      {"mlp_hidden", &RunConfig::mlp_hidden},
      {"bounded_output", &RunConfig::bounded_output},
      {"K", &RunConfig::K},
      {"T", &RunConfig::T},
      {"lambda_ent", &RunConfig::lambda_ent},
      {"lambda_ssim", &RunConfig::lambda_ssim},
      {"lambda_nov", &RunConfig::lambda_nov},
      {"lambda_eqb", &RunConfig::lambda_eqb},
      {"gamma_eq", &RunConfig::gamma_eq},
      {"beta_cov", &RunConfig::beta_cov},
      {"beta_jac", &RunConfig::beta_jac},
      {"lambda_mse", &RunConfig::lambda_mse},
      {"lambda_rank", &RunConfig::lambda_rank},
      {"beta_mse", &RunConfig::beta_mse},
      {"beta_rank", &RunConfig::beta_rank},
      {"beta_cons", &RunConfig::beta_cons},
      {"beta_triplet", &RunConfig::beta_triplet},
      {"beta_cross", &RunConfig::beta_cross},
      {"m1", &RunConfig::m1},
      {"m2", &RunConfig::m2},
      {"m3", &RunConfig::m3},
      {"gamma", &RunConfig::gamma},
      {"gae_lambda", &RunConfig::gae_lambda},
      {"eps_start", &RunConfig::eps_start},
      {"eps_end", &RunConfig::eps_end},
      {"c_v", &RunConfig::c_v},
      {"ch_start", &RunConfig::ch_start},
      {"ch_end", &RunConfig::ch_end},
      {"reward_ramp_frac", &RunConfig::reward_ramp_frac},
      {"epochs", &RunConfig::epochs},
      {"batch_images", &RunConfig::batch_images},
      {"update_epochs", &RunConfig::update_epochs},
      {"lr_policy", &RunConfig::lr_policy},
      {"lr_assessor", &RunConfig::lr_assessor},
      {"grad_clip", &RunConfig::grad_clip},
      {"seed", &RunConfig::seed},
      {"eval_every", &RunConfig::eval_every},
      {"threads", &RunConfig::threads},
      {"frozen_policy", &RunConfig::frozen_policy},
      {"augment_losses", &RunConfig::augment_losses},
  };
  return defs;
}

const FieldDef* find_field(const std::string& name) {
  for (const auto& f : fields())
    if (name == f.name) return &f;
  return nullptr;
}

void set_field(RunConfig& cfg, const FieldDef& f, const json& v) {
  std::visit(
      [&](auto mem) {
        using T = std::remove_reference_t<decltype(cfg.*mem)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean())
            throw ConfigError(std::string("config key '") + f.name +
                              "' expects a boolean");
          cfg.*mem = v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number())
            throw ConfigError(std::string("config key '") + f.name +
                              "' expects a number");
          cfg.*mem = v.get<double>();
        } else {
          if (!v.is_number_integer() ||
              (!v.is_number_unsigned() && v.get<long long>() < 0))
            throw ConfigError(std::string("config key '") + f.name +
                              "' expects a nonnegative integer");
          cfg.*mem = v.get<T>();
        }
      },
      f.member);
}

json get_field(const RunConfig& cfg, const FieldDef& f) {
  return std::visit([&](auto mem) { return json(cfg.*mem); }, f.member);
}

}  // namespace

const std::vector<std::string>& ablation_presets() {
  static const std::vector<std::string> names = {
      "no-ser",     "no-sdr",    "no-tpr",     "no-aug",
      "no-cons",    "no-triplet", "no-cross",  "no-entropy",
      "no-dissim",  "no-novelty", "no-eqbias"};
  return names;
}

void apply_ablation(RunConfig& cfg, const std::string& preset) {
  if (preset == "no-ser") {
    cfg.lambda_ent = cfg.lambda_ssim = cfg.lambda_nov = cfg.lambda_eqb = 0.0;
  } else if (preset == "no-sdr") {
    cfg.beta_cov = cfg.beta_jac = 0.0;
  } else if (preset == "no-tpr") {
    cfg.lambda_mse = cfg.lambda_rank = 0.0;
  } else if (preset == "no-aug") {
    cfg.augment_losses = false;
  } else if (preset == "no-cons") {
    cfg.beta_cons = 0.0;
  } else if (preset == "no-triplet") {
    cfg.beta_triplet = 0.0;
  } else if (preset == "no-cross") {
    cfg.beta_cross = 0.0;
  } else if (preset == "no-entropy") {
    cfg.lambda_ent = 0.0;
  } else if (preset == "no-dissim") {
    cfg.lambda_ssim = 0.0;
  } else if (preset == "no-novelty") {
    cfg.lambda_nov = 0.0;
  } else if (preset == "no-eqbias") {
    cfg.lambda_eqb = 0.0;
  } else {
    throw ConfigError("unknown ablation preset '" + preset + "'");
  }
}

RunConfig config_from_json(const std::string& text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!parsed.is_object())
    throw ConfigError("config must be a flat JSON object");
  RunConfig cfg;
  for (auto it = parsed.begin(); it != parsed.end(); ++it) {
    const FieldDef* f = find_field(it.key());
    if (!f) throw ConfigError("unknown config key '" + it.key() + "'");
    set_field(cfg, *f, it.value());
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_to_json(const RunConfig& cfg) {
  ordered_json out;
  for (const auto& f : fields()) out[f.name] = get_field(cfg, f);
  return out.dump(2) + "\n";
}

void write_config_snapshot(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config snapshot: " + path);
  out << config_to_json(cfg);
  if (!out) throw DataError("short write on config snapshot: " + path);
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  const FieldDef* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    throw ConfigError("cannot parse value '" + value + "' for config key '" +
                      key + "'");
  }
  set_field(cfg, *f, v);
}

void validate_config(const RunConfig& cfg) {
  if (cfg.n_images < 2) throw ConfigError("n_images must be >= 2");
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0))
    throw ConfigError("train_frac must lie in (0,1)");
  if (cfg.width < 8 || cfg.height < 4)
    throw ConfigError("panorama dimensions too small");
  if (cfg.label_noise < 0.0) throw ConfigError("label_noise must be >= 0");
  try {
    TrainOptions opt = to_train_options(cfg);
    opt.out_dir = ".";  // placeholder; callers supply the real one
    validate_train(opt);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

TrainOptions to_train_options(const RunConfig& cfg) {
  TrainOptions opt;
  opt.policy.d = cfg.feature_dim;
  opt.policy.d_h = cfg.d_h;
  opt.policy.d_z = cfg.d_z;
  opt.policy.gru_layers = cfg.gru_layers;
  opt.policy.critic_hidden = cfg.critic_hidden;
  opt.assessor.d = cfg.feature_dim;
  opt.assessor.d_a = cfg.d_a;
  opt.assessor.mlp_hidden = cfg.mlp_hidden;
  opt.assessor.bounded_output = cfg.bounded_output;
  opt.rewards.lambda_ent = cfg.lambda_ent;
  opt.rewards.lambda_ssim = cfg.lambda_ssim;
  opt.rewards.lambda_nov = cfg.lambda_nov;
  opt.rewards.lambda_eqb = cfg.lambda_eqb;
  opt.rewards.gamma_eq = cfg.gamma_eq;
  opt.rewards.beta_cov = cfg.beta_cov;
  opt.rewards.beta_jac = cfg.beta_jac;
  opt.rewards.lambda_mse = cfg.lambda_mse;
  opt.rewards.lambda_rank = cfg.lambda_rank;
  opt.losses.beta_mse = cfg.beta_mse;
  opt.losses.beta_rank = cfg.beta_rank;
  opt.losses.beta_cons = cfg.beta_cons;
  opt.losses.beta_triplet = cfg.beta_triplet;
  opt.losses.beta_cross = cfg.beta_cross;
  opt.losses.m1 = cfg.m1;
  opt.losses.m2 = cfg.m2;
  opt.losses.m3 = cfg.m3;
  opt.ppo.gamma = cfg.gamma;
  opt.ppo.gae_lambda = cfg.gae_lambda;
  opt.ppo.eps_start = cfg.eps_start;
  opt.ppo.eps_end = cfg.eps_end;
  opt.ppo.c_v = cfg.c_v;
  opt.ppo.ch_start = cfg.ch_start;
  opt.ppo.ch_end = cfg.ch_end;
  opt.ppo.reward_ramp_frac = cfg.reward_ramp_frac;
  opt.ppo.epochs = cfg.epochs;
  opt.ppo.batch_images = cfg.batch_images;
  opt.ppo.update_epochs = cfg.update_epochs;
  opt.ppo.lr_policy = cfg.lr_policy;
  opt.ppo.lr_assessor = cfg.lr_assessor;
  opt.ppo.grad_clip = cfg.grad_clip;
  opt.n_yaw = cfg.n_yaw;
  opt.n_pitch = cfg.n_pitch;
  opt.fov_deg = cfg.fov_deg;
  opt.render_res = cfg.render_res;
  opt.feature_dim = cfg.feature_dim;
  opt.K = cfg.K;
  opt.T = cfg.T;
  opt.seed = cfg.seed;
  opt.eval_every = cfg.eval_every;
  opt.threads = cfg.threads;
  opt.frozen_policy = cfg.frozen_policy;
  opt.augment_losses = cfg.augment_losses;
  return opt;
}

}  // namespace panoscan
