#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panoscan/ppo.hpp"

namespace panoscan {

// Every tunable of the pipeline in one flat bag. Serialized as a flat JSON
// object whose keys match the member names below one-to-one; unknown keys are
// rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  // synthetic dataset
  std::size_t n_images = 200;
  std::uint64_t synth_seed = 7;
  double train_frac = 0.8;
  std::size_t width = 512, height = 256;
  double label_noise = 0.0;

  // viewport grid + descriptors
  std::size_t n_yaw = 8, n_pitch = 4;
  double fov_deg = 90.0;
  std::size_t render_res = 64;
  std::size_t feature_dim = 64;  // shared input width of policy and assessor

  // policy network
  std::size_t d_h = 64, d_z = 64;
  std::size_t gru_layers = 6;
  std::size_t critic_hidden = 64;

  // assessor network
  std::size_t d_a = 64, mlp_hidden = 64;
  bool bounded_output = true;

  // rollout shape
  std::size_t K = 15, T = 7;

  // step/path reward coefficients
  double lambda_ent = 0.1, lambda_ssim = 0.5, lambda_nov = 0.5;
  double lambda_eqb = 0.3, gamma_eq = 1.5;
  double beta_cov = 1.0, beta_jac = 0.5;
  double lambda_mse = 1.0, lambda_rank = 1.0;

  // assessor loss weights
  double beta_mse = 1.0, beta_rank = 0.5, beta_cons = 0.2;
  double beta_triplet = 0.2, beta_cross = 0.3;
  double m1 = 2.0, m2 = 2.0, m3 = 4.0;

  // optimization
  double gamma = 0.99, gae_lambda = 0.95;
  double eps_start = 0.2, eps_end = 0.1;
  double c_v = 0.5;
  double ch_start = 0.01, ch_end = 0.001;
  double reward_ramp_frac = 0.2;
  std::size_t epochs = 300, batch_images = 4, update_epochs = 4;
  double lr_policy = 3e-4, lr_assessor = 1e-4;
  double grad_clip = 5.0;

  // run control
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;
  std::size_t threads = 1;
  bool frozen_policy = false;
  bool augment_losses = true;
};

// Known ablation presets; apply_ablation accepts exactly these names.
const std::vector<std::string>& ablation_presets();

// Zeroes the coefficients (or flips the switch) that the named preset
// removes. Unknown names throw ConfigError.
//   no-ser      lambda_ent = lambda_ssim = lambda_nov = lambda_eqb = 0
//   no-sdr      beta_cov = beta_jac = 0
//   no-tpr      lambda_mse = lambda_rank = 0
//   no-aug      augment_losses = false
//   no-cons     beta_cons = 0
//   no-triplet  beta_triplet = 0
//   no-cross    beta_cross = 0
//   no-entropy  lambda_ent = 0
//   no-dissim   lambda_ssim = 0
//   no-novelty  lambda_nov = 0
//   no-eqbias   lambda_eqb = 0
void apply_ablation(RunConfig& cfg, const std::string& preset);

// Parses a flat JSON object; missing keys keep their defaults, unknown keys
// or wrong value types throw ConfigError. Validates before returning.
RunConfig config_from_json(const std::string& text);

// Reads the file (DataError if unreadable) and parses it.
RunConfig load_config(const std::string& path);

// Canonical snapshot: every key in declaration order, 2-space indent.
std::string config_to_json(const RunConfig& cfg);

// Writes config_to_json to the path (DataError on failure).
void write_config_snapshot(const RunConfig& cfg, const std::string& path);

// Sets one field from its textual value ("0.5", "12", "true"); used for
// command-line overrides. Unknown keys or unparsable values throw
// ConfigError. Does not validate (call validate_config after the last one).
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

// Cross-field checks (delegates to the per-module validators).
void validate_config(const RunConfig& cfg);

// Expands the flat bag into the trainer's option block. out_dir is left
// empty; callers fill it in.
TrainOptions to_train_options(const RunConfig& cfg);

}  // namespace panoscan
