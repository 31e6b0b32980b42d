#include "panoscan/policy.hpp"

#include <algorithm>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

void init_policy_params(ParameterSet& ps, const PolicyDims& dims,
                        const Rng& root) {
  if (dims.d == 0 || dims.d_h == 0 || dims.d_z == 0 || dims.gru_layers == 0 ||
      dims.critic_hidden == 0)
    throw ArgumentError("init_policy_params: zero dimension");
  auto mat = [&](const std::string& name, std::size_t r, std::size_t c) {
    ps.add(name, xavier_init({r, c}, root, name));
  };
  auto zeros = [&](const std::string& name, std::size_t n) {
    ps.add(name, Tensor({n}, 0.0));
  };

  for (std::size_t l = 0; l < dims.gru_layers; ++l) {
    const std::string p = "policy/gru" + std::to_string(l) + "/";
    const std::size_t in = l == 0 ? dims.d : dims.d_h;
    for (const char* gate : {"z", "r", "n"}) {
      mat(p + "W_" + gate, dims.d_h, in);
      mat(p + "U_" + gate, dims.d_h, dims.d_h);
      zeros(p + "b_" + gate, dims.d_h);
    }
  }

  mat("policy/score/W_h", dims.d_z, dims.d_h);
  mat("policy/score/W_g", dims.d_z, dims.d);
  mat("policy/score/W_f", dims.d_z, dims.d);
  zeros("policy/score/b", dims.d_z);
  ps.add("policy/score/v", xavier_init({dims.d_z}, root, "policy/score/v"));

  mat("policy/critic/W1", dims.critic_hidden, dims.d_h + dims.d);
  zeros("policy/critic/b1", dims.critic_hidden);
  ps.add("policy/critic/w2",
         xavier_init({dims.critic_hidden}, root, "policy/critic/w2"));
  zeros("policy/critic/b2", 1);
}

Var gru_update(Tape& t, ParameterSet& ps, const std::string& prefix, Var h,
               Var x) {
  auto P = [&](const char* n) { return t.param(ps.at(prefix + n)); };
  const Var z = t.sigmoid(
      t.add(t.add(t.matvec(P("W_z"), x), t.matvec(P("U_z"), h)), P("b_z")));
  const Var r = t.sigmoid(
      t.add(t.add(t.matvec(P("W_r"), x), t.matvec(P("U_r"), h)), P("b_r")));
  const Var n = t.tanh(t.add(
      t.add(t.matvec(P("W_n"), x), t.matvec(P("U_n"), t.mul(r, h))), P("b_n")));
  // h' = (1-z)*h + z*n = h - z*h + z*n
  return t.add(t.sub(h, t.mul(z, h)), t.mul(z, n));
}

Var gru_stack(Tape& t, ParameterSet& ps, const PolicyDims& dims,
              std::vector<Var>& hidden, Var x) {
  if (hidden.size() != dims.gru_layers)
    throw ContractError("gru_stack: hidden/layer count mismatch");
  Var in = x;
  for (std::size_t l = 0; l < dims.gru_layers; ++l) {
    hidden[l] =
        gru_update(t, ps, "policy/gru" + std::to_string(l) + "/", hidden[l], in);
    in = hidden[l];
  }
  return hidden.back();
}

Var score_viewports(Tape& t, ParameterSet& ps, Var h, Var g,
                    const std::vector<Var>& feats, const Tensor& mask) {
  if (mask.numel() != feats.size())
    throw ContractError("score_viewports: mask/candidate count mismatch");
  const Var base = t.add(t.add(t.matvec(t.param(ps.at("policy/score/W_h")), h),
                               t.matvec(t.param(ps.at("policy/score/W_g")), g)),
                         t.param(ps.at("policy/score/b")));
  const Var wf = t.param(ps.at("policy/score/W_f"));
  const Var v = t.param(ps.at("policy/score/v"));
  std::vector<Var> logits;
  logits.reserve(feats.size());
  for (std::size_t j = 0; j < feats.size(); ++j) {
    const Var u = t.tanh(t.add(base, t.matvec(wf, feats[j])));
    logits.push_back(t.add_const(t.dot(v, u), mask.data[j]));
  }
  return t.stack(logits);
}

Var critic_value(Tape& t, ParameterSet& ps, Var h, Var g) {
  const Var s = t.concat(h, g);
  const Var hid = t.tanh(t.add(t.matvec(t.param(ps.at("policy/critic/W1")), s),
                               t.param(ps.at("policy/critic/b1"))));
  return t.add(t.dot(t.param(ps.at("policy/critic/w2")), hid),
               t.index(t.param(ps.at("policy/critic/b2")), 0));
}

Tensor visit_mask(const std::vector<std::size_t>& visited, std::size_t x_count,
                  MaskMode mode) {
  Tensor mask({x_count}, 0.0);
  if (mode == MaskMode::none) return mask;
  for (std::size_t idx : visited) {
    if (idx >= x_count) throw ContractError("visit_mask: index out of range");
    mask.data[idx] = kMaskedLogit;
  }
  return mask;
}

PolicyState initial_state(Tape& t, const PolicyDims& dims, Var g) {
  PolicyState s;
  s.hidden.reserve(dims.gru_layers);
  for (std::size_t l = 0; l < dims.gru_layers; ++l)
    s.hidden.push_back(t.constant(Tensor({dims.d_h}, 0.0)));
  s.g = g;
  return s;
}

namespace {

std::size_t choose_action(const Tensor& logits, ActionSelect select, Rng& rng) {
  const std::size_t n = logits.numel();
  double max_logit = kMaskedLogit;
  for (double z : logits.data) max_logit = std::max(max_logit, z);
  if (max_logit <= kMaskedLogit / 10.0)
    throw ContractError("step: every viewport is masked");

  if (select == ActionSelect::greedy) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (logits.data[j] > logits.data[best]) best = j;  // ties keep lowest
    return best;
  }

  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p[j] = std::exp(logits.data[j] - max_logit);
    total += p[j];
  }
  const double u = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (p[j] <= 0.0) continue;
    last_positive = j;
    cum += p[j];
    if (u < cum) return j;
  }
  return last_positive;  // u landed on the rounding tail
}

}  // namespace

StepOutput step(Tape& t, ParameterSet& ps, const PolicyDims& dims,
                PolicyState& state, const std::vector<Var>& feats,
                MaskMode mask, Rng& rng, ActionSelect select,
                const std::size_t* forced) {
  if (state.visited.size() != state.t)
    throw ContractError("step: visited/step-count invariant broken");
  if (state.hidden.size() != dims.gru_layers)
    throw ContractError("step: hidden/layer count mismatch");

  const Tensor m = visit_mask(state.visited, feats.size(), mask);
  StepOutput out;
  out.logits = score_viewports(t, ps, state.hidden.back(), state.g, feats, m);
  // Copy: later ops push nodes and may invalidate references into the tape.
  const Tensor logit_vals = t.val(out.logits);

  if (forced != nullptr) {
    if (*forced >= feats.size())
      throw ContractError("step: forced action out of range");
    if (logit_vals.data[*forced] <= kMaskedLogit / 10.0)
      throw ContractError("step: forced action is masked");
    out.action = *forced;
  } else {
    out.action = choose_action(logit_vals, select, rng);
  }

  out.log_prob = t.log_softmax_at(out.logits, out.action);
  out.entropy = t.entropy_softmax(out.logits);
  out.value = critic_value(t, ps, state.hidden.back(), state.g);

  gru_stack(t, ps, dims, state.hidden, feats[out.action]);
  state.visited.push_back(out.action);
  state.t += 1;
  return out;
}

std::size_t select_initial(Tape& t, ParameterSet& ps, const PolicyDims& dims,
                           Var g, const std::vector<Var>& feats, Rng& rng) {
  PolicyState s = initial_state(t, dims, g);
  const Tensor m = visit_mask({}, feats.size(), MaskMode::none);
  const Var logits = score_viewports(t, ps, s.hidden.back(), g, feats, m);
  return choose_action(t.val(logits), ActionSelect::sample, rng);
}

std::vector<std::pair<Scanpath, Trajectory>> rollout(
    const ImageFeatures& f, ParameterSet& ps, const PolicyDims& dims,
    std::size_t K, std::size_t T, MaskMode mask, Rng& rng,
    ActionSelect select) {
  if (K < 1 || T < 1) throw ArgumentError("rollout: K and T must be >= 1");
  if (mask == MaskMode::revisit && T > f.viewports.size())
    throw ArgumentError("rollout: T exceeds candidate count with revisit mask");

  std::vector<std::pair<Scanpath, Trajectory>> out;
  out.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    Tape tape(false);  // values only
    std::vector<Var> feats;
    feats.reserve(f.viewports.size());
    for (const Tensor& v : f.viewports) feats.push_back(tape.constant(v));
    PolicyState state = initial_state(tape, dims, tape.constant(f.global));

    Scanpath path;
    Trajectory traj;
    for (std::size_t step_i = 0; step_i < T; ++step_i) {
      const StepOutput so =
          step(tape, ps, dims, state, feats, mask, rng, select);
      path.indices.push_back(so.action);
      path.log_probs.push_back(tape.scalar_val(so.log_prob));
      StepRecord rec;
      rec.action = so.action;
      rec.log_prob = tape.scalar_val(so.log_prob);
      rec.value = tape.scalar_val(so.value);
      rec.done = step_i + 1 == T;
      traj.steps.push_back(rec);
    }
    out.emplace_back(std::move(path), std::move(traj));
  }
  return out;
}

}  // namespace panoscan
