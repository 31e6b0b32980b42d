#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "panoscan/image.hpp"
#include "panoscan/policy.hpp"

namespace panoscan {

// Weights of the reward stack. Exploration terms are per step, the coverage/
// Jaccard pair is per scanpath set, the task pair is per image pair and
// ramped in by the trainer.
struct RewardCoeffs {
  double lambda_ent = 0.1;
  double lambda_ssim = 0.5;
  double lambda_nov = 0.5;
  double lambda_eqb = 0.3;
  double gamma_eq = 1.5;
  double beta_cov = 1.0;
  double beta_jac = 0.5;
  double lambda_mse = 1.0;
  double lambda_rank = 1.0;
};

// All weights nonnegative, gamma_eq strictly positive.
void validate_coeffs(const RewardCoeffs& c);

// What the step reward looks at: the rendering now, the previous one (absent
// exactly at t=1), first-visit novelty, and the viewport's pitch.
struct StepContext {
  const Image* current = nullptr;
  const Image* previous = nullptr;
  std::size_t t = 1;  // 1-based step index
  bool is_new = true;
  double pitch = 0.0;  // radians
};

// exp(-gamma_eq * |pitch|), in (0,1].
double equator_bias(double pitch, double gamma_eq);

struct StepRewardParts {
  double ent = 0.0, ssim = 0.0, nov = 0.0, eqb = 0.0, total = 0.0;
};

// r_t = l_ent*H(x_t) + l_ssim*1[t>1]*(1-SSIM(x_{t-1},x_t)) + l_nov*delta_new
//     + l_eqb*exp(-gamma_eq*|pitch|).  Entropy in bits, SSIM on luminance.
StepRewardParts step_reward_parts(const StepContext& ctx, const RewardCoeffs& c);
double step_reward(const StepContext& ctx, const RewardCoeffs& c);

struct DiversityParts {
  double coverage = 0.0;      // |union| / X
  double mean_jaccard = 0.0;  // over ordered pairs; 0 when K = 1
  double total = 0.0;
};

// beta_cov * |union S_k| / X - beta_jac * mean pairwise Jaccard similarity.
DiversityParts diversity_parts(const std::vector<std::set<std::size_t>>& paths,
                               std::size_t x_count, double beta_cov,
                               double beta_jac);
double diversity_reward(const std::vector<std::set<std::size_t>>& paths,
                        std::size_t x_count, double beta_cov, double beta_jac);

// -[(q1_hat-q1)^2 + (q2_hat-q2)^2]; callers pass scores on a common scale.
double mse_reward(double q1_hat, double q2_hat, double q1, double q2);

// -log(1 + exp(-s * (q1_hat - q2_hat))) with s = sign(q1 - q2); equal labels
// mean s = 0 and the reward is exactly -log 2. Stable for any margin.
double rank_reward(double q1_hat, double q2_hat, double q1, double q2);

// Scores are kept on [0,100]; task rewards use this [0,1] mapping.
inline double normalize_mos(double mos) { return mos / 100.0; }

// (1/K) sum_k step_sums[k] + r_div + l_mse*r_mse + l_rank*r_rank
double total_reward(const std::vector<double>& step_sums, double r_div,
                    double r_mse, double r_rank, double lambda_mse,
                    double lambda_rank);

// Writes per-step rewards into the K trajectories and credits the episodic
// terms to every terminal step, so the batch's summed returns equal K times
// the total reward.
void assign_step_rewards(std::vector<Trajectory>& trajs,
                         const std::vector<std::vector<double>>& step_rewards,
                         double r_div, double r_mse, double r_rank,
                         double lambda_mse, double lambda_rank);

}  // namespace panoscan
