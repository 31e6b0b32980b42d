#include "panoscan/assessor.hpp"

#include <algorithm>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

void init_assessor_params(ParameterSet& ps, const AssessorDims& dims,
                          const Rng& root) {
  if (dims.d == 0 || dims.d_a == 0 || dims.mlp_hidden == 0)
    throw ArgumentError("init_assessor_params: zero dimension");
  auto mat = [&](const std::string& name, std::size_t r, std::size_t c) {
    ps.add(name, xavier_init({r, c}, root, name));
  };
  mat("assessor/pool/W_p", dims.d_a, dims.d);
  mat("assessor/pool/W_g2", dims.d_a, dims.d);
  ps.add("assessor/pool/v_a", xavier_init({dims.d_a}, root, "assessor/pool/v_a"));

  mat("assessor/head/W1", dims.mlp_hidden, 2 * dims.d);
  ps.add("assessor/head/b1", Tensor({dims.mlp_hidden}, 0.0));
  ps.add("assessor/head/w2",
         xavier_init({dims.mlp_hidden}, root, "assessor/head/w2"));
  ps.add("assessor/head/b2", Tensor({1}, 0.0));
}

PoolOutput attention_pool(Tape& t, ParameterSet& ps,
                          const std::vector<Tensor>& feats, Var g) {
  if (feats.empty()) throw ContractError("attention_pool: empty scanpath");
  const Var wp = t.param(ps.at("assessor/pool/W_p"));
  const Var va = t.param(ps.at("assessor/pool/v_a"));
  const Var gterm = t.matvec(t.param(ps.at("assessor/pool/W_g2")), g);
  std::vector<Var> scores;
  scores.reserve(feats.size());
  for (const Tensor& f : feats) {
    const Var u = t.tanh(t.add(t.matvec(wp, t.constant(f)), gterm));
    scores.push_back(t.dot(va, u));
  }
  PoolOutput out;
  out.alphas = t.softmax(t.stack(scores));
  out.pooled = t.weighted_sum(out.alphas, feats);
  return out;
}

Var predict_scanpath(Tape& t, ParameterSet& ps, const AssessorDims& dims,
                     const std::vector<Tensor>& feats, Var g) {
  const PoolOutput pool = attention_pool(t, ps, feats, g);
  const Var s = t.concat(pool.pooled, g);
  const Var hid = t.tanh(t.add(t.matvec(t.param(ps.at("assessor/head/W1")), s),
                               t.param(ps.at("assessor/head/b1"))));
  const Var raw = t.add(t.dot(t.param(ps.at("assessor/head/w2")), hid),
                        t.index(t.param(ps.at("assessor/head/b2")), 0));
  if (!dims.bounded_output) return raw;
  return t.scale(t.sigmoid(raw), 100.0);
}

double predict_scanpath_value(ParameterSet& ps, const AssessorDims& dims,
                              const std::vector<Tensor>& feats,
                              const Tensor& g) {
  Tape t(false);
  return t.scalar_val(predict_scanpath(t, ps, dims, feats, t.constant(g)));
}

ImagePrediction predict_image(ParameterSet& ps, const AssessorDims& dims,
                              const ImageFeatures& f,
                              const std::vector<Scanpath>& paths) {
  if (paths.empty()) throw ContractError("predict_image: no scanpaths");
  ImagePrediction pred;
  pred.per_path.reserve(paths.size());
  for (const Scanpath& path : paths) {
    if (path.indices.empty())
      throw ContractError("predict_image: empty scanpath");
    std::vector<Tensor> feats;
    feats.reserve(path.indices.size());
    for (std::size_t idx : path.indices) {
      if (idx >= f.viewports.size())
        throw ContractError("predict_image: viewport index out of range");
      feats.push_back(f.viewports[idx]);
    }
    pred.per_path.push_back(
        predict_scanpath_value(ps, dims, feats, f.global));
  }
  // Sorted accumulation keeps the mean bit-identical under any reordering of
  // the scanpaths, not just equal to rounding.
  std::vector<double> sorted = pred.per_path;
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (double q : sorted) acc += q;
  pred.q_hat = acc / static_cast<double>(sorted.size());
  return pred;
}

}  // namespace panoscan
