#pragma once

#include <cstddef>
#include <vector>

#include "panoscan/features.hpp"
#include "panoscan/param_set.hpp"
#include "panoscan/policy.hpp"
#include "panoscan/tape.hpp"

namespace panoscan {

struct AssessorDims {
  std::size_t d = 64;           // feature width
  std::size_t d_a = 64;         // attention space width
  std::size_t mlp_hidden = 64;  // head hidden width
  bool bounded_output = true;   // 100*sigmoid(raw); false passes raw through
};

// Registers "assessor/..." weights: pooling (W_p, W_g2, v_a) and the scoring
// head. W_g2 is deliberately distinct from the policy's W_g.
void init_assessor_params(ParameterSet& ps, const AssessorDims& dims,
                          const Rng& root);

struct PoolOutput {
  Var pooled;  // sum_t alpha_t f_t, width d
  Var alphas;  // attention weights, length T
};

// alpha_t = softmax_t( v_a . tanh(W_p f_t + W_g2 g) ).
PoolOutput attention_pool(Tape& t, ParameterSet& ps,
                          const std::vector<Tensor>& feats, Var g);

// Scanpath score: MLP on [pooled; g], optionally mapped to [0,100].
Var predict_scanpath(Tape& t, ParameterSet& ps, const AssessorDims& dims,
                     const std::vector<Tensor>& feats, Var g);

// Forward-only convenience.
double predict_scanpath_value(ParameterSet& ps, const AssessorDims& dims,
                              const std::vector<Tensor>& feats,
                              const Tensor& g);

struct ImagePrediction {
  double q_hat = 0.0;               // mean over scanpaths
  std::vector<double> per_path;     // one score per scanpath, input order
};

// Scores each scanpath (gathering its viewports' features) and averages.
// The mean is accumulated in sorted order so it is exactly permutation
// invariant over the scanpaths.
ImagePrediction predict_image(ParameterSet& ps, const AssessorDims& dims,
                              const ImageFeatures& f,
                              const std::vector<Scanpath>& paths);

}  // namespace panoscan
