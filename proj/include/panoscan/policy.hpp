#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "panoscan/features.hpp"
#include "panoscan/param_set.hpp"
#include "panoscan/rng.hpp"
#include "panoscan/tape.hpp"
#include "panoscan/tensor.hpp"

namespace panoscan {

// Finite stand-in for -inf in logit masks; exp() underflows it to exactly 0.
inline constexpr double kMaskedLogit = -1e9;

struct PolicyDims {
  std::size_t d = 64;            // viewport/global feature width
  std::size_t d_h = 64;          // GRU hidden width
  std::size_t d_z = 64;          // scoring space width
  std::size_t gru_layers = 6;
  std::size_t critic_hidden = 64;
};

// Registers all policy weights under "policy/..." (GRU stack, scoring head,
// critic). Matrices are Xavier-initialized keyed by name; biases start at 0.
void init_policy_params(ParameterSet& ps, const PolicyDims& dims,
                        const Rng& root);

// Standard GRU cell under `prefix` (W_z/U_z/b_z, W_r/U_r/b_r, W_n/U_n/b_n):
// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
// n = tanh(Wn x + Un (r*h) + bn), h' = (1-z)*h + z*n.
Var gru_update(Tape& t, ParameterSet& ps, const std::string& prefix, Var h,
               Var x);

// Updates every layer's hidden state in place (layer l+1 consumes layer l's
// output) and returns the new top state.
Var gru_stack(Tape& t, ParameterSet& ps, const PolicyDims& dims,
              std::vector<Var>& hidden, Var x);

// z_j = v . tanh(W_h h + W_g g + W_f f_j + b) + mask[j]
Var score_viewports(Tape& t, ParameterSet& ps, Var h, Var g,
                    const std::vector<Var>& feats, const Tensor& mask);

// 2-layer tanh MLP on [h; g]; candidate features never enter.
Var critic_value(Tape& t, ParameterSet& ps, Var h, Var g);

enum class MaskMode { revisit, none };
enum class ActionSelect { sample, greedy };

// 0 for selectable entries, kMaskedLogit for masked ones.
Tensor visit_mask(const std::vector<std::size_t>& visited, std::size_t x_count,
                  MaskMode mode);

struct PolicyState {
  std::vector<Var> hidden;  // one per GRU layer; zeros before the first step
  Var g;
  std::vector<std::size_t> visited;
  std::size_t t = 0;
};

PolicyState initial_state(Tape& t, const PolicyDims& dims, Var g);

struct StepOutput {
  std::size_t action = 0;
  Var logits;
  Var log_prob;  // log pi(action), scalar
  Var value;     // critic at [h_{t-1}; g], scalar
  Var entropy;   // policy entropy this step, nats
};

// One policy step: dynamic mask, scoring, action choice (sampled, greedy
// argmax with lowest-index ties, or forced for replay), critic evaluation,
// then the recurrent update with the chosen viewport's feature vector.
StepOutput step(Tape& t, ParameterSet& ps, const PolicyDims& dims,
                PolicyState& state, const std::vector<Var>& feats,
                MaskMode mask, Rng& rng,
                ActionSelect select = ActionSelect::sample,
                const std::size_t* forced = nullptr);

// First viewport choice: zero history, no mask, sampled from the softmax over
// global-plus-candidate scores.
std::size_t select_initial(Tape& t, ParameterSet& ps, const PolicyDims& dims,
                           Var g, const std::vector<Var>& feats, Rng& rng);

struct Scanpath {
  std::vector<std::size_t> indices;
  std::vector<double> log_probs;
};

struct StepRecord {
  std::size_t action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;  // filled in by the rewards module
  bool done = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;
};

// K independent forward-only episodes of length T from fresh initial states.
std::vector<std::pair<Scanpath, Trajectory>> rollout(
    const ImageFeatures& f, ParameterSet& ps, const PolicyDims& dims,
    std::size_t K, std::size_t T, MaskMode mask, Rng& rng,
    ActionSelect select = ActionSelect::sample);

}  // namespace panoscan
