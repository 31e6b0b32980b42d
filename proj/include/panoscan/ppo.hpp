#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "panoscan/assessor.hpp"
#include "panoscan/features.hpp"
#include "panoscan/losses.hpp"
#include "panoscan/metrics.hpp"
#include "panoscan/policy.hpp"
#include "panoscan/rewards.hpp"
#include "panoscan/synth.hpp"

namespace panoscan {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double eps_start = 0.2, eps_end = 0.1;  // clip range schedule
  double c_v = 0.5;                       // value-error coefficient
  double ch_start = 0.01, ch_end = 0.001; // entropy bonus schedule
  double reward_ramp_frac = 0.2;          // task-reward ramp-in fraction
  std::size_t epochs = 300;
  std::size_t batch_images = 4;
  std::size_t update_epochs = 4;          // PPO passes per collected batch
  double lr_policy = 3e-4;
  double lr_assessor = 1e-4;
  double grad_clip = 5.0;                 // global-norm ceiling, 0 disables
};

void validate_ppo(const PpoConfig& cfg);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantage + value
};

// delta_t = r_t + gamma*(1-d_t)*V_{t+1} - V_t, with bootstrap_value standing
// in for V_{T+1}; A_t = delta_t + gamma*lambda*(1-d_t)*A_{t+1}.
GaeResult gae(const std::vector<double>& rewards,
              const std::vector<double>& values,
              const std::vector<bool>& dones, double bootstrap_value,
              double gamma, double lambda);

// min(ratio*adv, clip(ratio, 1-eps, 1+eps)*adv): the maximized per-sample
// surrogate (the loss negates its mean).
double clipped_surrogate(double ratio, double advantage, double eps);

// In-place zero-mean/unit-variance; the divisor floors at 1e-8 so constant
// batches stay finite.
void normalize_advantages(std::vector<double>& adv);

struct ScheduleValues {
  double eps = 0.2;
  double c_h = 0.01;
  double lambda_mse = 0.0;
  double lambda_rank = 0.0;
};

// Linear interpolation across epochs for eps/c_H; task-reward weights ramp
// 0 -> 1 over the first reward_ramp_frac of training, then hold.
ScheduleValues schedule_at(std::size_t epoch, std::size_t total_epochs,
                           const PpoConfig& cfg);

// One episode prepared for re-evaluation: forced actions replayed against the
// current policy give fresh log-probs/values/entropies on a gradient tape.
struct EpisodeBatchItem {
  const ImageFeatures* feats = nullptr;
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;  // normalized across the whole batch
  std::vector<double> returns;
};

struct PpoLossStats {
  double policy_loss = 0.0;  // -mean clipped surrogate
  double value_loss = 0.0;   // mean squared value error (pre c_v)
  double entropy = 0.0;      // mean policy entropy, nats
  double clip_fraction = 0.0;
  double total = 0.0;
};

// Builds the scalar PPO loss over every step of every episode in the batch.
// Throws NumericalError (with the offending ratio) if an importance ratio is
// not finite.
Var ppo_loss(Tape& t, ParameterSet& ps, const PolicyDims& dims,
             const std::vector<EpisodeBatchItem>& batch, double eps,
             double c_v, double c_h, PpoLossStats* stats = nullptr);

struct TrainOptions {
  PolicyDims policy;
  AssessorDims assessor;
  RewardCoeffs rewards;
  LossWeights losses;
  PpoConfig ppo;
  std::size_t n_yaw = 8, n_pitch = 4;
  double fov_deg = 90.0;
  std::size_t render_res = 64;
  std::size_t feature_dim = 64;
  std::size_t K = 15, T = 7;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;   // validation cadence in epochs
  std::size_t threads = 1;
  bool frozen_policy = false;   // skip policy updates (random-policy baseline)
  bool augment_losses = true;   // drive cons/triplet/cross from augmentations
  std::string out_dir;          // checkpoints + CSV land here
};

void validate_train(const TrainOptions& opt);

// One CSV row; the header lives in metrics_csv_header().
struct EpochRow {
  std::size_t epoch = 0;
  double mean_reward = 0.0;  // mean per-image aggregate reward
  double r_ent = 0.0, r_ssim = 0.0, r_nov = 0.0, r_eqb = 0.0;
  double r_cov = 0.0, r_jac = 0.0, r_mse = 0.0, r_rank = 0.0;
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
  double l_mse = 0.0, l_rank = 0.0, l_cons = 0.0, l_triplet = 0.0,
         l_cross = 0.0, l_total = 0.0;
  double val_srcc = 0.0, val_plcc = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochRow& row);

struct TrainResult {
  std::vector<EpochRow> history;
  std::string checkpoint_path;       // last completed epoch
  std::string best_checkpoint_path;  // highest validation SRCC
  std::string csv_path;
  double best_val_srcc = -2.0;
};

// Joint loop: per epoch iterate the training set in image batches; per batch
// roll out K scanpaths per image, score them, fill rewards (task terms paired
// round-robin inside the batch), run PPO update epochs on the policy, and one
// gradient step on the assessor loss stack. NaN anywhere aborts with
// NumericalError after the last good checkpoint is kept on disk.
TrainResult train(const std::string& train_manifest,
                  const std::string& test_manifest, const TrainOptions& opt);

// Combined policy+assessor checkpoint I/O. Loading verifies shapes against
// the given sets and names the offending entry on mismatch.
void save_checkpoint(const std::string& path, const ParameterSet& policy_ps,
                     const ParameterSet& assessor_ps);
void load_checkpoint(const std::string& path, ParameterSet& policy_ps,
                     ParameterSet& assessor_ps);

// Feature bundles for manifest samples, computed once and cached in memory.
class FeatureStore {
 public:
  FeatureStore(std::string manifest_dir, std::size_t n_yaw, std::size_t n_pitch,
               double fov_deg, std::size_t render_res, std::size_t d);
  const ImageFeatures& get(const LabeledSample& s);
  const ViewportGrid& grid() const { return grid_; }
  const std::string& dir() const { return dir_; }
  // Precompute a batch of samples, optionally across threads (deterministic:
  // each image's features depend only on its own pixels).
  void warm(const std::vector<LabeledSample>& samples, std::size_t threads);

 private:
  std::string dir_;
  ViewportGrid grid_;
  std::size_t res_, d_;
  std::unordered_map<std::string, ImageFeatures> cache_;
};

// Rolls out K x T scanpaths per sample with a per-image deterministic stream
// (child of `seed`), scores them with the assessor, and correlates against
// labels. Evaluation order never affects results.
EvalReport evaluate(ParameterSet& policy_ps, ParameterSet& assessor_ps,
                    const TrainOptions& opt, FeatureStore& store,
                    const std::vector<LabeledSample>& samples, std::size_t K,
                    std::size_t T, std::uint64_t seed);

}  // namespace panoscan
