#include "panoscan/ppo.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "panoscan/errors.hpp"
#include "panoscan/geometry.hpp"
#include "panoscan/png_io.hpp"

namespace fs = std::filesystem;

namespace panoscan {

void validate_ppo(const PpoConfig& cfg) {
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
    throw ArgumentError("ppo: gamma must lie in [0,1]");
  if (!(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0))
    throw ArgumentError("ppo: gae lambda must lie in [0,1]");
  if (!(cfg.eps_start > 0.0) || !(cfg.eps_end > 0.0))
    throw ArgumentError("ppo: clip range must be positive");
  if (cfg.c_v < 0.0 || cfg.ch_start < 0.0 || cfg.ch_end < 0.0)
    throw ArgumentError("ppo: c_v and entropy coefficients must be >= 0");
  if (!(cfg.reward_ramp_frac >= 0.0 && cfg.reward_ramp_frac <= 1.0))
    throw ArgumentError("ppo: reward ramp fraction must lie in [0,1]");
  if (cfg.epochs < 1 || cfg.update_epochs < 1)
    throw ArgumentError("ppo: epoch counts must be >= 1");
  if (cfg.batch_images < 2)
    throw ArgumentError("ppo: batch needs >= 2 images for pairing");
  if (!(cfg.lr_policy > 0.0) || !(cfg.lr_assessor > 0.0))
    throw ArgumentError("ppo: learning rates must be positive");
  if (cfg.grad_clip < 0.0) throw ArgumentError("ppo: grad clip must be >= 0");
}

GaeResult gae(const std::vector<double>& rewards,
              const std::vector<double>& values,
              const std::vector<bool>& dones, double bootstrap_value,
              double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw ContractError("gae: array length mismatch");
  if (n == 0) throw ContractError("gae: empty episode");

  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double adv_next = 0.0;
  double v_next = bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    const double nd = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * nd * v_next - values[i];
    adv_next = delta + gamma * lambda * nd * adv_next;
    out.advantages[i] = adv_next;
    out.returns[i] = adv_next + values[i];
    v_next = values[i];
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double denom = std::max(std::sqrt(var / n), 1e-8);
  for (double& a : adv) a = (a - mean) / denom;
}

ScheduleValues schedule_at(std::size_t epoch, std::size_t total_epochs,
                           const PpoConfig& cfg) {
  if (epoch >= total_epochs)
    throw ContractError("schedule: epoch past end of training");
  const double frac =
      total_epochs <= 1
          ? 1.0
          : static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  ScheduleValues s;
  s.eps = cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
  s.c_h = cfg.ch_start + frac * (cfg.ch_end - cfg.ch_start);
  const double ramp_epochs =
      cfg.reward_ramp_frac * static_cast<double>(total_epochs);
  const double ramp = ramp_epochs <= 0.0
                          ? 1.0
                          : std::min(1.0, static_cast<double>(epoch) /
                                              ramp_epochs);
  s.lambda_mse = ramp;
  s.lambda_rank = ramp;
  return s;
}

Var ppo_loss(Tape& t, ParameterSet& ps, const PolicyDims& dims,
             const std::vector<EpisodeBatchItem>& batch, double eps,
             double c_v, double c_h, PpoLossStats* stats) {
  if (batch.empty()) throw ContractError("ppo_loss: empty batch");

  // Candidate features repeat across episodes of the same image; register the
  // constants once per image.
  std::unordered_map<const ImageFeatures*, std::pair<std::vector<Var>, Var>>
      consts;
  auto image_consts = [&](const ImageFeatures* f)
      -> const std::pair<std::vector<Var>, Var>& {
    auto it = consts.find(f);
    if (it != consts.end()) return it->second;
    std::vector<Var> feats;
    feats.reserve(f->viewports.size());
    for (const Tensor& v : f->viewports) feats.push_back(t.constant(v));
    return consts.emplace(f, std::make_pair(std::move(feats),
                                            t.constant(f->global)))
        .first->second;
  };

  Rng unused(0);  // forced replay never samples
  std::vector<Var> surrogates, value_errs, entropies;
  double clipped_count = 0.0, step_count = 0.0;
  for (const EpisodeBatchItem& ep : batch) {
    const std::size_t T = ep.actions.size();
    if (ep.old_log_probs.size() != T || ep.advantages.size() != T ||
        ep.returns.size() != T || T == 0)
      throw ContractError("ppo_loss: episode array length mismatch");
    const auto& [feats, g] = image_consts(ep.feats);
    PolicyState st = initial_state(t, dims, g);
    for (std::size_t i = 0; i < T; ++i) {
      const StepOutput so = step(t, ps, dims, st, feats, MaskMode::revisit,
                                 unused, ActionSelect::sample, &ep.actions[i]);
      const Var ratio = t.exp(t.add_const(so.log_prob, -ep.old_log_probs[i]));
      const double rv = t.scalar_val(ratio);
      if (!std::isfinite(rv)) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "ppo_loss: non-finite importance ratio %.6g at step %zu "
                      "(new logp %.6g, old logp %.6g)",
                      rv, i, t.scalar_val(so.log_prob), ep.old_log_probs[i]);
        throw NumericalError(msg);
      }
      const double a = ep.advantages[i];
      surrogates.push_back(
          t.min2(t.scale(ratio, a),
                 t.scale(t.clamp_const(ratio, 1.0 - eps, 1.0 + eps), a)));
      value_errs.push_back(t.square(t.add_const(so.value, -ep.returns[i])));
      entropies.push_back(so.entropy);
      if (std::abs(rv - 1.0) > eps) clipped_count += 1.0;
      step_count += 1.0;
    }
  }

  const Var mean_surr = t.mean(t.stack(surrogates));
  const Var mean_verr = t.mean(t.stack(value_errs));
  const Var mean_ent = t.mean(t.stack(entropies));
  const Var loss = t.add(t.add(t.scale(mean_surr, -1.0), t.scale(mean_verr, c_v)),
                         t.scale(mean_ent, -c_h));
  if (stats != nullptr) {
    stats->policy_loss = -t.scalar_val(mean_surr);
    stats->value_loss = t.scalar_val(mean_verr);
    stats->entropy = t.scalar_val(mean_ent);
    stats->clip_fraction = step_count > 0.0 ? clipped_count / step_count : 0.0;
    stats->total = t.scalar_val(loss);
  }
  return loss;
}

void validate_train(const TrainOptions& opt) {
  validate_ppo(opt.ppo);
  validate_coeffs(opt.rewards);
  validate(opt.losses);
  if (opt.n_yaw == 0 || opt.n_pitch == 0)
    throw ArgumentError("train: empty viewport grid");
  if (!(opt.fov_deg > 0.0 && opt.fov_deg < 180.0))
    throw ArgumentError("train: fov must lie in (0,180)");
  if (opt.render_res < 8)
    throw ArgumentError("train: render resolution below descriptor minimum");
  if (opt.K < 1 || opt.T < 1) throw ArgumentError("train: K and T must be >= 1");
  if (opt.T > opt.n_yaw * opt.n_pitch)
    throw ArgumentError("train: T exceeds viewport count");
  if (opt.feature_dim == 0) throw ArgumentError("train: zero feature dim");
  if (opt.policy.d != opt.feature_dim || opt.assessor.d != opt.feature_dim)
    throw ArgumentError("train: policy/assessor input width != feature dim");
  if (opt.eval_every < 1) throw ArgumentError("train: eval_every must be >= 1");
  if (opt.threads < 1) throw ArgumentError("train: threads must be >= 1");
  if (opt.out_dir.empty()) throw ArgumentError("train: missing output dir");
}

std::string metrics_csv_header() {
  return "epoch,mean_reward,r_ent,r_ssim,r_nov,r_eqb,r_cov,r_jac,r_mse,r_rank,"
         "policy_loss,value_loss,entropy,l_mse,l_rank,l_cons,l_triplet,"
         "l_cross,l_total,val_srcc,val_plcc";
}

std::string metrics_csv_row(const EpochRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                "%.10g,%.10g",
                r.epoch, r.mean_reward, r.r_ent, r.r_ssim, r.r_nov, r.r_eqb,
                r.r_cov, r.r_jac, r.r_mse, r.r_rank, r.policy_loss,
                r.value_loss, r.entropy, r.l_mse, r.l_rank, r.l_cons,
                r.l_triplet, r.l_cross, r.l_total, r.val_srcc, r.val_plcc);
  return buf;
}

void save_checkpoint(const std::string& path, const ParameterSet& policy_ps,
                     const ParameterSet& assessor_ps) {
  ParameterSet combined;
  for (const auto& e : policy_ps.entries()) combined.add(e.name, e.value);
  for (const auto& e : assessor_ps.entries()) combined.add(e.name, e.value);
  const std::string tmp = path + ".tmp";
  combined.save(tmp);
  fs::rename(tmp, path);
}

namespace {

void copy_into(const ParameterSet& from, ParameterSet& to,
               const std::string& path) {
  for (auto& e : to.entries()) {
    if (!from.has(e.name))
      throw DataError("checkpoint " + path + ": missing entry " + e.name);
    const Tensor& v = from.at(e.name).value;
    if (v.shape != e.value.shape)
      throw DataError("checkpoint " + path + ": shape mismatch for " + e.name);
    e.value = v;
  }
}

}  // namespace

void load_checkpoint(const std::string& path, ParameterSet& policy_ps,
                     ParameterSet& assessor_ps) {
  const ParameterSet all = ParameterSet::load_any(path);
  copy_into(all, policy_ps, path);
  copy_into(all, assessor_ps, path);
  for (const auto& e : all.entries())
    if (!policy_ps.has(e.name) && !assessor_ps.has(e.name))
      throw DataError("checkpoint " + path + ": unexpected entry " + e.name);
}

FeatureStore::FeatureStore(std::string manifest_dir, std::size_t n_yaw,
                           std::size_t n_pitch, double fov_deg,
                           std::size_t render_res, std::size_t d)
    : dir_(std::move(manifest_dir)),
      grid_(build_grid(n_yaw, n_pitch, fov_deg)),
      res_(render_res),
      d_(d) {}

const ImageFeatures& FeatureStore::get(const LabeledSample& s) {
  auto it = cache_.find(s.image_path);
  if (it != cache_.end()) return it->second;
  // load_manifest already resolved the path against the manifest directory.
  const Image erp = load_png(s.image_path);
  return cache_.emplace(s.image_path, compute_features(erp, grid_, res_, d_))
      .first->second;
}

namespace {

// Index-sharded loop; fn(i) must only touch slot i state. Exceptions
// propagate after all workers join.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  const std::size_t workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

void FeatureStore::warm(const std::vector<LabeledSample>& samples,
                        std::size_t threads) {
  std::vector<const LabeledSample*> missing;
  for (const LabeledSample& s : samples)
    if (cache_.find(s.image_path) == cache_.end()) missing.push_back(&s);
  if (missing.empty()) return;
  std::vector<ImageFeatures> computed(missing.size());
  parallel_for(missing.size(), threads, [&](std::size_t i) {
    const Image erp = load_png(missing[i]->image_path);
    computed[i] = compute_features(erp, grid_, res_, d_);
  });
  for (std::size_t i = 0; i < missing.size(); ++i)
    cache_.emplace(missing[i]->image_path, std::move(computed[i]));
}

namespace {

int label_sign(double a, double b) { return (a > b) - (a < b); }

// Mean per-scanpath score of one image variant on the gradient tape.
Var image_score(Tape& t, ParameterSet& aps, const AssessorDims& ad,
                const std::vector<std::vector<Tensor>>& path_feats, Var g) {
  std::vector<Var> qs;
  qs.reserve(path_feats.size());
  for (const auto& feats : path_feats)
    qs.push_back(predict_scanpath(t, aps, ad, feats, g));
  return t.mean(t.stack(qs));
}

std::vector<std::vector<Tensor>> gather_paths(const ImageFeatures& f,
                                              const std::vector<Scanpath>& paths) {
  std::vector<std::vector<Tensor>> out;
  out.reserve(paths.size());
  for (const Scanpath& p : paths) {
    std::vector<Tensor> feats;
    feats.reserve(p.indices.size());
    for (std::size_t idx : p.indices) feats.push_back(f.viewports[idx]);
    out.push_back(std::move(feats));
  }
  return out;
}

// Everything one image contributes to a batch, fully computed before any
// gradient work so the per-image stage can run on worker threads.
struct ImageWork {
  const LabeledSample* sample = nullptr;
  const ImageFeatures* feats = nullptr;
  std::vector<Scanpath> paths;
  std::vector<Trajectory> trajs;
  std::vector<std::vector<double>> step_rewards;
  StepRewardParts part_sums;  // accumulated over K*T steps
  DiversityParts div;
  double q_fwd = 0.0;  // current assessor's image score, for task rewards
  double r_mse = 0.0, r_rank = 0.0;
  double total = 0.0;
  // clean + weak/mild/strong per-path features and globals for the loss stack
  std::vector<std::vector<Tensor>> clean_path_feats;
  std::array<std::vector<std::vector<Tensor>>, 3> aug_path_feats;
  std::array<Tensor, 3> aug_globals;
};

constexpr std::uint64_t kRollKey = 1ull << 56;
constexpr std::uint64_t kAugKey = 2ull << 56;
constexpr std::uint64_t kShuffleKey = 4ull << 56;
constexpr std::uint64_t kEvalKey = 5ull << 56;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw NumericalError(std::string("train: non-finite ") + what);
}

}  // namespace

EvalReport evaluate(ParameterSet& policy_ps, ParameterSet& assessor_ps,
                    const TrainOptions& opt, FeatureStore& store,
                    const std::vector<LabeledSample>& samples, std::size_t K,
                    std::size_t T, std::uint64_t seed) {
  if (samples.size() < 2) throw ArgumentError("evaluate: need >= 2 samples");
  store.warm(samples, opt.threads);
  std::vector<double> labels(samples.size()), preds(samples.size());
  const Rng root(seed);
  parallel_for(samples.size(), opt.threads, [&](std::size_t i) {
    const ImageFeatures& f = store.get(samples[i]);
    Rng rng = root.child(kEvalKey | i);
    const auto eps = rollout(f, policy_ps, opt.policy, K, T, MaskMode::revisit,
                             rng, ActionSelect::sample);
    std::vector<Scanpath> paths;
    paths.reserve(K);
    for (const auto& e : eps) paths.push_back(e.first);
    preds[i] = predict_image(assessor_ps, opt.assessor, f, paths).q_hat;
    labels[i] = samples[i].mos;
  });
  return make_report(labels, preds);
}

TrainResult train(const std::string& train_manifest,
                  const std::string& test_manifest, const TrainOptions& opt) {
  validate_train(opt);
  const std::vector<LabeledSample> train_set = load_manifest(train_manifest);
  const std::vector<LabeledSample> test_set = load_manifest(test_manifest);
  if (train_set.size() < opt.ppo.batch_images)
    throw DataError("train: fewer images than one batch");
  fs::create_directories(opt.out_dir);

  const std::string train_dir = fs::path(train_manifest).parent_path().string();
  const std::string test_dir = fs::path(test_manifest).parent_path().string();
  FeatureStore train_store(train_dir, opt.n_yaw, opt.n_pitch, opt.fov_deg,
                           opt.render_res, opt.feature_dim);
  FeatureStore test_store(test_dir, opt.n_yaw, opt.n_pitch, opt.fov_deg,
                          opt.render_res, opt.feature_dim);
  const ViewportGrid& grid = train_store.grid();

  ParameterSet policy_ps, assessor_ps;
  init_policy_params(policy_ps, opt.policy, Rng(opt.seed ^ 0x706f6cull));
  init_assessor_params(assessor_ps, opt.assessor, Rng(opt.seed ^ 0x617373ull));

  const Rng root(opt.seed);
  const std::uint64_t eval_seed = root.child(kEvalKey).seed();

  TrainResult res;
  res.csv_path = (fs::path(opt.out_dir) / "metrics.csv").string();
  res.checkpoint_path = (fs::path(opt.out_dir) / "ckpt_last.bin").string();
  res.best_checkpoint_path = (fs::path(opt.out_dir) / "ckpt_best.bin").string();
  std::ofstream csv(res.csv_path);
  if (!csv) throw DataError("train: cannot write " + res.csv_path);
  csv << metrics_csv_header() << "\n";

  // The pre-training state is the first "last good" checkpoint.
  save_checkpoint(res.checkpoint_path, policy_ps, assessor_ps);

  long policy_steps = 0, assessor_steps = 0;
  double last_val_srcc = 0.0, last_val_plcc = 0.0;
  const std::size_t B = opt.ppo.batch_images;

  for (std::size_t epoch = 0; epoch < opt.ppo.epochs; ++epoch) {
    const ScheduleValues sched = schedule_at(epoch, opt.ppo.epochs, opt.ppo);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = root.child(kShuffleKey | epoch);
    for (std::size_t i = order.size(); i-- > 1;) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < order.size(); at += B)
      batches.emplace_back(order.begin() + at,
                           order.begin() + std::min(at + B, order.size()));
    if (batches.size() > 1 && batches.back().size() < 2) {
      auto tail = batches.back();
      batches.pop_back();
      batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }

    EpochRow row;
    row.epoch = epoch;
    double step_total = 0.0, image_total = 0.0, pair_total = 0.0;
    std::size_t stat_batches = 0;

    for (const std::vector<std::size_t>& batch : batches) {
      const std::size_t nb = batch.size();
      std::vector<const LabeledSample*> samples(nb);
      std::vector<LabeledSample> warm_list;
      for (std::size_t i = 0; i < nb; ++i) {
        samples[i] = &train_set[batch[i]];
        warm_list.push_back(*samples[i]);
      }
      train_store.warm(warm_list, opt.threads);

      // ---- per-image stage (parallel, read-only parameters) ----
      std::vector<ImageWork> work(nb);
      parallel_for(nb, opt.threads, [&](std::size_t i) {
        ImageWork& w = work[i];
        w.sample = samples[i];
        w.feats = &train_store.get(*w.sample);
        Rng roll_rng = root.child(kRollKey | (epoch << 24) | batch[i]);
        auto eps = rollout(*w.feats, policy_ps, opt.policy, opt.K, opt.T,
                           MaskMode::revisit, roll_rng, ActionSelect::sample);

        const Image erp = load_png(w.sample->image_path);
        std::unordered_map<std::size_t, Image> renders;
        auto rendered = [&](std::size_t idx) -> const Image& {
          auto it = renders.find(idx);
          if (it != renders.end()) return it->second;
          return renders
              .emplace(idx,
                       render_viewport(erp, grid.viewports[idx], opt.render_res))
              .first->second;
        };

        std::vector<std::set<std::size_t>> index_sets;
        for (auto& [path, traj] : eps) {
          std::vector<double> rewards;
          std::set<std::size_t> seen;
          for (std::size_t s = 0; s < path.indices.size(); ++s) {
            const std::size_t idx = path.indices[s];
            StepContext ctx;
            ctx.current = &rendered(idx);
            ctx.previous = s == 0 ? nullptr : &rendered(path.indices[s - 1]);
            ctx.t = s + 1;
            ctx.is_new = seen.insert(idx).second;
            ctx.pitch = grid.viewports[idx].pitch;
            const StepRewardParts p = step_reward_parts(ctx, opt.rewards);
            w.part_sums.ent += p.ent;
            w.part_sums.ssim += p.ssim;
            w.part_sums.nov += p.nov;
            w.part_sums.eqb += p.eqb;
            w.part_sums.total += p.total;
            rewards.push_back(p.total);
          }
          index_sets.push_back(std::move(seen));
          w.step_rewards.push_back(std::move(rewards));
          w.paths.push_back(std::move(path));
          w.trajs.push_back(std::move(traj));
        }
        w.div = diversity_parts(index_sets, grid.size(), opt.rewards.beta_cov,
                                opt.rewards.beta_jac);
        w.q_fwd =
            predict_image(assessor_ps, opt.assessor, *w.feats, w.paths).q_hat;
        w.clean_path_feats = gather_paths(*w.feats, w.paths);

        if (opt.augment_losses) {
          for (int sev = 0; sev < 3; ++sev) {
            Rng aug_rng = root.child(kAugKey | (epoch << 24) |
                                     (batch[i] << 2) | sev);
            const Image aug =
                augment(erp, static_cast<Severity>(sev), aug_rng.next_u64())
                    .first;
            std::unordered_map<std::size_t, Tensor> enc;
            for (const Scanpath& p : w.paths)
              for (std::size_t idx : p.indices)
                if (enc.find(idx) == enc.end())
                  enc.emplace(idx, encode_viewport(
                                       render_viewport(aug, grid.viewports[idx],
                                                       opt.render_res),
                                       opt.feature_dim));
            auto& per_path = w.aug_path_feats[sev];
            for (const Scanpath& p : w.paths) {
              std::vector<Tensor> feats;
              feats.reserve(p.indices.size());
              for (std::size_t idx : p.indices) feats.push_back(enc.at(idx));
              per_path.push_back(std::move(feats));
            }
            w.aug_globals[sev] = encode_global(aug, opt.feature_dim);
          }
        }
      });

      // ---- task rewards via round-robin pairing ----
      for (std::size_t i = 0; i < nb; ++i) {
        const ImageWork& partner = work[(i + 1) % nb];
        ImageWork& w = work[i];
        const double qa = normalize_mos(w.q_fwd);
        const double qb = normalize_mos(partner.q_fwd);
        const double la = normalize_mos(w.sample->mos);
        const double lb = normalize_mos(partner.sample->mos);
        w.r_mse = mse_reward(qa, qb, la, lb);
        w.r_rank = rank_reward(qa, qb, la, lb);
        assign_step_rewards(w.trajs, w.step_rewards, w.div.total, w.r_mse,
                            w.r_rank, sched.lambda_mse, sched.lambda_rank);
        std::vector<double> sums;
        for (const auto& sr : w.step_rewards) {
          double s = 0.0;
          for (double r : sr) s += r;
          sums.push_back(s);
        }
        w.total = total_reward(sums, w.div.total, w.r_mse, w.r_rank,
                               sched.lambda_mse, sched.lambda_rank);
        require_finite(w.total, "aggregate reward");

        row.mean_reward += w.total;
        row.r_cov += opt.rewards.beta_cov * w.div.coverage;
        row.r_jac += -opt.rewards.beta_jac * w.div.mean_jaccard;
        row.r_mse += w.r_mse;
        row.r_rank += w.r_rank;
        row.r_ent += w.part_sums.ent;
        row.r_ssim += w.part_sums.ssim;
        row.r_nov += w.part_sums.nov;
        row.r_eqb += w.part_sums.eqb;
        step_total += static_cast<double>(opt.K * opt.T);
        image_total += 1.0;
      }

      // ---- PPO updates on the batch ----
      if (!opt.frozen_policy) {
        std::vector<EpisodeBatchItem> items;
        std::vector<double> all_adv;
        for (const ImageWork& w : work) {
          for (std::size_t k = 0; k < w.trajs.size(); ++k) {
            const Trajectory& traj = w.trajs[k];
            EpisodeBatchItem it;
            it.feats = w.feats;
            std::vector<double> rewards, values;
            std::vector<bool> dones;
            for (const StepRecord& rec : traj.steps) {
              it.actions.push_back(rec.action);
              it.old_log_probs.push_back(rec.log_prob);
              rewards.push_back(rec.reward);
              values.push_back(rec.value);
              dones.push_back(rec.done);
            }
            const GaeResult g =
                gae(rewards, values, dones, 0.0, opt.ppo.gamma,
                    opt.ppo.gae_lambda);
            it.advantages = g.advantages;
            it.returns = g.returns;
            all_adv.insert(all_adv.end(), g.advantages.begin(),
                           g.advantages.end());
            items.push_back(std::move(it));
          }
        }
        normalize_advantages(all_adv);
        std::size_t at = 0;
        for (EpisodeBatchItem& it : items)
          for (double& a : it.advantages) a = all_adv[at++];

        PpoLossStats stats;
        for (std::size_t u = 0; u < opt.ppo.update_epochs; ++u) {
          policy_ps.zero_grad();
          Tape t;
          const Var loss = ppo_loss(t, policy_ps, opt.policy, items, sched.eps,
                                    opt.ppo.c_v, sched.c_h, &stats);
          require_finite(stats.total, "ppo loss");
          t.backward(loss);
          if (opt.ppo.grad_clip > 0.0)
            policy_ps.clip_global_norm(opt.ppo.grad_clip);
          policy_ps.adam_step(opt.ppo.lr_policy, 0.9, 0.999, 1e-8,
                              ++policy_steps);
        }
        row.policy_loss += stats.policy_loss;
        row.value_loss += stats.value_loss;
        row.entropy += stats.entropy;
        ++stat_batches;
      }

      // ---- assessor update on the loss stack ----
      {
        assessor_ps.zero_grad();
        Tape t;
        std::vector<Var> q_clean(nb), q_mild(nb);
        std::vector<Var> q_weak(nb), q_strong(nb);
        for (std::size_t i = 0; i < nb; ++i) {
          const ImageWork& w = work[i];
          q_clean[i] = image_score(t, assessor_ps, opt.assessor,
                                   w.clean_path_feats, t.constant(w.feats->global));
          if (opt.augment_losses) {
            q_weak[i] = image_score(t, assessor_ps, opt.assessor,
                                    w.aug_path_feats[0],
                                    t.constant(w.aug_globals[0]));
            q_mild[i] = image_score(t, assessor_ps, opt.assessor,
                                    w.aug_path_feats[1],
                                    t.constant(w.aug_globals[1]));
            q_strong[i] = image_score(t, assessor_ps, opt.assessor,
                                      w.aug_path_feats[2],
                                      t.constant(w.aug_globals[2]));
          }
        }

        std::vector<Var> c_mse, c_rank, c_cons, c_trip, c_cross;
        for (std::size_t i = 0; i < nb; ++i) {
          const std::size_t j = (i + 1) % nb;
          const double la = work[i].sample->mos;
          const double lb = work[j].sample->mos;
          c_mse.push_back(l_mse(t, q_clean[i], q_clean[j], la, lb));
          c_rank.push_back(l_rank(t, q_clean[i], q_clean[j], label_sign(la, lb)));
          if (opt.augment_losses) {
            c_cons.push_back(l_cons(t, q_clean[i], q_weak[i]));
            c_trip.push_back(l_triplet(t, q_clean[i], q_mild[i], q_strong[i],
                                       opt.losses.m1, opt.losses.m2,
                                       opt.losses.m3));
            c_cross.push_back(
                l_cross(t, q_mild[i], q_mild[j], label_sign(la, lb)));
          }
        }
        LossTerms terms;
        terms.mse = t.mean(t.stack(c_mse));
        terms.rank = t.mean(t.stack(c_rank));
        const Var zero = t.constant(Tensor::scalar(0.0));
        terms.cons = opt.augment_losses ? t.mean(t.stack(c_cons)) : zero;
        terms.triplet = opt.augment_losses ? t.mean(t.stack(c_trip)) : zero;
        terms.cross = opt.augment_losses ? t.mean(t.stack(c_cross)) : zero;
        const Var total = l_total(t, terms, opt.losses);

        row.l_mse += t.scalar_val(terms.mse);
        row.l_rank += t.scalar_val(terms.rank);
        row.l_cons += t.scalar_val(terms.cons);
        row.l_triplet += t.scalar_val(terms.triplet);
        row.l_cross += t.scalar_val(terms.cross);
        row.l_total += t.scalar_val(total);
        require_finite(t.scalar_val(total), "assessor loss");

        t.backward(total);
        if (opt.ppo.grad_clip > 0.0)
          assessor_ps.clip_global_norm(opt.ppo.grad_clip);
        assessor_ps.adam_step(opt.ppo.lr_assessor, 0.9, 0.999, 1e-8,
                              ++assessor_steps);
        pair_total += 1.0;
      }
    }

    // ---- epoch bookkeeping ----
    row.mean_reward /= image_total;
    row.r_cov /= image_total;
    row.r_jac /= image_total;
    row.r_mse /= image_total;
    row.r_rank /= image_total;
    row.r_ent /= step_total;
    row.r_ssim /= step_total;
    row.r_nov /= step_total;
    row.r_eqb /= step_total;
    if (stat_batches > 0) {
      row.policy_loss /= static_cast<double>(stat_batches);
      row.value_loss /= static_cast<double>(stat_batches);
      row.entropy /= static_cast<double>(stat_batches);
    }
    row.l_mse /= pair_total;
    row.l_rank /= pair_total;
    row.l_cons /= pair_total;
    row.l_triplet /= pair_total;
    row.l_cross /= pair_total;
    row.l_total /= pair_total;

    if (epoch % opt.eval_every == 0 || epoch + 1 == opt.ppo.epochs) {
      try {
        const EvalReport rep = evaluate(policy_ps, assessor_ps, opt, test_store,
                                        test_set, opt.K, opt.T, eval_seed);
        last_val_srcc = rep.srcc_v;
        last_val_plcc = rep.plcc_v;
      } catch (const NumericalError&) {
        last_val_srcc = 0.0;  // degenerate constant predictions
        last_val_plcc = 0.0;
      }
    }
    row.val_srcc = last_val_srcc;
    row.val_plcc = last_val_plcc;

    save_checkpoint(res.checkpoint_path, policy_ps, assessor_ps);
    if (row.val_srcc > res.best_val_srcc) {
      res.best_val_srcc = row.val_srcc;
      save_checkpoint(res.best_checkpoint_path, policy_ps, assessor_ps);
    }
    csv << metrics_csv_row(row) << "\n";
    csv.flush();
    res.history.push_back(row);
  }
  return res;
}

}  // namespace panoscan
