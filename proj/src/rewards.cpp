#include "panoscan/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

void validate_coeffs(const RewardCoeffs& c) {
  const double nonneg[] = {c.lambda_ent, c.lambda_ssim, c.lambda_nov,
                           c.lambda_eqb, c.beta_cov,    c.beta_jac,
                           c.lambda_mse, c.lambda_rank};
  for (double v : nonneg)
    if (v < 0.0) throw ArgumentError("reward coefficients must be nonnegative");
  if (!(c.gamma_eq > 0.0)) throw ArgumentError("gamma_eq must be positive");
}

double equator_bias(double pitch, double gamma_eq) {
  if (!(gamma_eq > 0.0)) throw ArgumentError("gamma_eq must be positive");
  return std::exp(-gamma_eq * std::abs(pitch));
}

StepRewardParts step_reward_parts(const StepContext& ctx,
                                  const RewardCoeffs& c) {
  if (ctx.current == nullptr)
    throw ContractError("step_reward: missing current rendering");
  if ((ctx.t == 1) != (ctx.previous == nullptr))
    throw ContractError("step_reward: previous rendering present iff t > 1");

  StepRewardParts p;
  const GrayImage cur = to_gray(*ctx.current);
  p.ent = c.lambda_ent * shannon_entropy(cur);
  if (ctx.t > 1)
    p.ssim = c.lambda_ssim * (1.0 - ssim(to_gray(*ctx.previous), cur));
  p.nov = ctx.is_new ? c.lambda_nov : 0.0;
  p.eqb = c.lambda_eqb * equator_bias(ctx.pitch, c.gamma_eq);
  p.total = p.ent + p.ssim + p.nov + p.eqb;
  return p;
}

double step_reward(const StepContext& ctx, const RewardCoeffs& c) {
  return step_reward_parts(ctx, c).total;
}

DiversityParts diversity_parts(const std::vector<std::set<std::size_t>>& paths,
                               std::size_t x_count, double beta_cov,
                               double beta_jac) {
  if (paths.empty()) throw ArgumentError("diversity_reward: no scanpaths");
  if (x_count == 0) throw ArgumentError("diversity_reward: X must be positive");
  for (const auto& s : paths)
    if (s.empty()) throw ArgumentError("diversity_reward: empty scanpath");

  std::set<std::size_t> all;
  for (const auto& s : paths) all.insert(s.begin(), s.end());

  DiversityParts out;
  out.coverage =
      static_cast<double>(all.size()) / static_cast<double>(x_count);

  const std::size_t k = paths.size();
  if (k >= 2) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        std::vector<std::size_t> inter;
        std::set_intersection(paths[i].begin(), paths[i].end(),
                              paths[j].begin(), paths[j].end(),
                              std::back_inserter(inter));
        const std::size_t uni =
            paths[i].size() + paths[j].size() - inter.size();
        acc += 2.0 * static_cast<double>(inter.size()) /
               static_cast<double>(uni);  // both ordered pairs
      }
    out.mean_jaccard = acc / static_cast<double>(k * (k - 1));
  }
  out.total = beta_cov * out.coverage - beta_jac * out.mean_jaccard;
  return out;
}

double diversity_reward(const std::vector<std::set<std::size_t>>& paths,
                        std::size_t x_count, double beta_cov, double beta_jac) {
  return diversity_parts(paths, x_count, beta_cov, beta_jac).total;
}

double mse_reward(double q1_hat, double q2_hat, double q1, double q2) {
  const double e1 = q1_hat - q1;
  const double e2 = q2_hat - q2;
  return -(e1 * e1 + e2 * e2);
}

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

double rank_reward(double q1_hat, double q2_hat, double q1, double q2) {
  const double s = q1 > q2 ? 1.0 : q1 < q2 ? -1.0 : 0.0;
  return -softplus(-s * (q1_hat - q2_hat));
}

double total_reward(const std::vector<double>& step_sums, double r_div,
                    double r_mse, double r_rank, double lambda_mse,
                    double lambda_rank) {
  if (step_sums.empty()) throw ArgumentError("total_reward: no scanpaths");
  double mean = 0.0;
  for (double v : step_sums) mean += v;
  mean /= static_cast<double>(step_sums.size());
  return mean + r_div + lambda_mse * r_mse + lambda_rank * r_rank;
}

void assign_step_rewards(std::vector<Trajectory>& trajs,
                         const std::vector<std::vector<double>>& step_rewards,
                         double r_div, double r_mse, double r_rank,
                         double lambda_mse, double lambda_rank) {
  if (trajs.empty() || trajs.size() != step_rewards.size())
    throw ContractError("assign_step_rewards: trajectory/reward mismatch");
  // Every trajectory's terminal step carries the episodic terms in full: the
  // batch of K returns then sums to K times the aggregate reward, and the
  // step-to-episodic gradient proportions match the aggregate formula (whose
  // inner step sum is averaged over K while the episodic terms are not).
  const double episodic_share =
      r_div + lambda_mse * r_mse + lambda_rank * r_rank;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    auto& steps = trajs[k].steps;
    if (steps.empty() || steps.size() != step_rewards[k].size())
      throw ContractError("assign_step_rewards: step count mismatch");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      steps[i].reward = step_rewards[k][i];
      steps[i].done = i + 1 == steps.size();
    }
    steps.back().reward += episodic_share;
  }
}

}  // namespace panoscan
