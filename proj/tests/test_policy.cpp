#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "panoscan/errors.hpp"
#include "panoscan/policy.hpp"

using namespace panoscan;

namespace {

ImageFeatures random_features(std::size_t x_count, std::size_t d,
                              std::uint64_t seed) {
  ImageFeatures f;
  Rng rng(seed);
  for (std::size_t j = 0; j < x_count; ++j) {
    Tensor v({d}, 0.0);
    for (auto& e : v.data) e = rng.normal();
    f.viewports.push_back(v);
  }
  f.global = Tensor({d}, 0.0);
  for (auto& e : f.global.data) e = rng.normal();
  return f;
}

std::vector<Var> as_constants(Tape& t, const std::vector<Tensor>& feats) {
  std::vector<Var> out;
  out.reserve(feats.size());
  for (const auto& f : feats) out.push_back(t.constant(f));
  return out;
}

// Single-cell GRU parameter block with every weight at a constant.
ParameterSet zero_gru(std::size_t d_h, std::size_t d_in) {
  ParameterSet ps;
  for (const char* gate : {"z", "r", "n"}) {
    ps.add(std::string("policy/gru0/W_") + gate, Tensor({d_h, d_in}, 0.0));
    ps.add(std::string("policy/gru0/U_") + gate, Tensor({d_h, d_h}, 0.0));
    ps.add(std::string("policy/gru0/b_") + gate, Tensor({d_h}, 0.0));
  }
  return ps;
}

double fd_loss(ParameterSet& ps, const PolicyDims& dims, const ImageFeatures& f,
               const std::vector<std::size_t>& actions, MaskMode mode) {
  Tape tape(false);
  auto feats = as_constants(tape, f.viewports);
  PolicyState state = initial_state(tape, dims, tape.constant(f.global));
  Rng dummy(0);
  double loss = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const StepOutput so = step(tape, ps, dims, state, feats, mode, dummy,
                               ActionSelect::sample, &actions[i]);
    loss += tape.scalar_val(so.log_prob) + 0.5 * tape.scalar_val(so.value) +
            0.1 * tape.scalar_val(so.entropy);
  }
  return loss;
}

}  // namespace

TEST_CASE("gru cell closed forms") {
  ParameterSet ps = zero_gru(2, 3);
  Tape t;
  const Var h = t.constant(Tensor::vector({0.4, -0.2}));
  const Var x = t.constant(Tensor::vector({1.0, -1.0, 0.5}));

  // All-zero weights: z = 0.5, candidate = 0, so h' = 0.5 h.
  const Var h2 = gru_update(t, ps, "policy/gru0/", h, x);
  CHECK(t.val(h2).data[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(t.val(h2).data[1] == doctest::Approx(-0.1).epsilon(1e-12));

  // Saturated update gate (b_z very negative): the state never moves.
  ps.at("policy/gru0/b_z").value.fill(-1000.0);
  Tape t2;
  const Var h0 = t2.constant(Tensor::vector({0.4, -0.2}));
  const Var x0 = t2.constant(Tensor::vector({1.0, -1.0, 0.5}));
  const Var kept = gru_update(t2, ps, "policy/gru0/", h0, x0);
  CHECK(std::abs(t2.val(kept).data[0] - 0.4) < 1e-12);
  CHECK(std::abs(t2.val(kept).data[1] - (-0.2)) < 1e-12);
}

TEST_CASE("gru gradients match finite differences") {
  PolicyDims dims;
  dims.d = 3;
  dims.d_h = 4;
  dims.d_z = 4;
  dims.gru_layers = 2;
  dims.critic_hidden = 4;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(123));

  Tensor x1({3}, 0.0), x2({3}, 0.0);
  Rng rng(5);
  for (auto& v : x1.data) v = rng.normal();
  for (auto& v : x2.data) v = rng.normal();
  Tensor probe({4}, 0.0);
  for (auto& v : probe.data) v = rng.normal();

  auto forward = [&](Tape& t) {
    std::vector<Var> hidden;
    for (std::size_t l = 0; l < dims.gru_layers; ++l)
      hidden.push_back(t.constant(Tensor({dims.d_h}, 0.0)));
    gru_stack(t, ps, dims, hidden, t.constant(x1));
    const Var top = gru_stack(t, ps, dims, hidden, t.constant(x2));
    return t.dot(top, t.constant(probe));
  };

  ps.zero_grad();
  Tape t;
  t.backward(forward(t));

  const double h = 1e-5;
  for (auto& e : ps.entries()) {
    if (e.name.rfind("policy/gru", 0) != 0) continue;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.value.numel(), 3); ++i) {
      const double keep = e.value.data[i];
      e.value.data[i] = keep + h;
      Tape tp(false);
      const double up = tp.scalar_val(forward(tp));
      e.value.data[i] = keep - h;
      Tape tm(false);
      const double dn = tm.scalar_val(forward(tm));
      e.value.data[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double an = e.grad.data[i];
      const double rel =
          std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      INFO(e.name, "[", i, "] fd=", fd, " an=", an);
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("viewport scoring closed forms") {
  PolicyDims dims;
  dims.d = 1;
  dims.d_h = 1;
  dims.d_z = 1;
  dims.gru_layers = 1;
  dims.critic_hidden = 1;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(1));
  ps.at("policy/score/W_h").value.data = {0.5};
  ps.at("policy/score/W_g").value.data = {-0.3};
  ps.at("policy/score/W_f").value.data = {0.8};
  ps.at("policy/score/b").value.data = {0.1};
  ps.at("policy/score/v").value.data = {1.2};

  Tape t;
  const Var h = t.constant(Tensor::vector({0.7}));
  const Var g = t.constant(Tensor::vector({-0.4}));
  const auto feats = as_constants(
      t, {Tensor::vector({0.2}), Tensor::vector({-0.6})});
  const Tensor mask({2}, 0.0);
  const Var logits = score_viewports(t, ps, h, g, feats, mask);

  auto expect = [&](double f) {
    return 1.2 * std::tanh(0.5 * 0.7 - 0.3 * -0.4 + 0.8 * f + 0.1);
  };
  CHECK(t.val(logits).data[0] == doctest::Approx(expect(0.2)).epsilon(1e-12));
  CHECK(t.val(logits).data[1] == doctest::Approx(expect(-0.6)).epsilon(1e-12));
}

TEST_CASE("identical candidates give a uniform policy; masks zero it exactly") {
  PolicyDims dims;
  dims.d = 4;
  dims.d_h = 4;
  dims.d_z = 4;
  dims.gru_layers = 1;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(9));

  Tape t;
  const Var h = t.constant(Tensor({4}, 0.3));
  const Var g = t.constant(Tensor({4}, -0.2));
  const Tensor same({4}, 0.7);
  const auto feats = as_constants(t, {same, same, same, same, same});

  Tensor open({5}, 0.0);
  const Var logits = score_viewports(t, ps, h, g, feats, open);
  const Var probs = t.softmax(logits);
  for (double p : t.val(probs).data)
    CHECK(p == doctest::Approx(0.2).epsilon(1e-12));

  Tensor masked = open;
  masked.data[1] = kMaskedLogit;
  masked.data[3] = kMaskedLogit;
  const Var logits2 = score_viewports(t, ps, h, g, feats, masked);
  const Var probs2 = t.softmax(logits2);
  CHECK(t.val(probs2).data[1] == 0.0);
  CHECK(t.val(probs2).data[3] == 0.0);
  double total = 0.0;
  for (double p : t.val(probs2).data) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // Softmax shift invariance: constant logit offset changes nothing.
  const Var shifted = t.softmax(t.add_const(logits, 7.5));
  double tv = 0.0;
  for (std::size_t j = 0; j < 5; ++j)
    tv += std::abs(t.val(shifted).data[j] - t.val(probs).data[j]);
  CHECK(tv < 1e-12);
}

TEST_CASE("initial selection depends only on g and candidate features") {
  PolicyDims dims;
  dims.d = 2;
  dims.d_h = 2;
  dims.d_z = 2;
  dims.gru_layers = 1;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(33));

  const ImageFeatures f = random_features(6, 2, 17);
  auto initial_probs = [&]() {
    Tape t;
    auto feats = as_constants(t, f.viewports);
    PolicyState s = initial_state(t, dims, t.constant(f.global));
    const Tensor mask({6}, 0.0);
    const Var logits = score_viewports(t, ps, s.hidden.back(), s.g, feats, mask);
    return t.val(t.softmax(logits));
  };
  const Tensor p1 = initial_probs();
  const Tensor p2 = initial_probs();
  CHECK(p1.data == p2.data);  // pure function of (g, feats)
  double total = 0.0;
  for (double p : p1.data) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // A constructed logit gap makes one viewport dominate.
  PolicyDims tiny;
  tiny.d = 1;
  tiny.d_h = 1;
  tiny.d_z = 1;
  tiny.gru_layers = 1;
  ParameterSet ts;
  init_policy_params(ts, tiny, Rng(2));
  ts.at("policy/score/W_h").value.fill(0.0);
  ts.at("policy/score/W_g").value.fill(0.0);
  ts.at("policy/score/b").value.fill(0.0);
  ts.at("policy/score/W_f").value.data = {3.0};
  ts.at("policy/score/v").value.data = {5.0};

  Tape t;
  const auto feats = as_constants(t, {Tensor::vector({1.0}),
                                      Tensor::vector({-1.0}),
                                      Tensor::vector({-1.0}),
                                      Tensor::vector({-1.0})});
  const Var g = t.constant(Tensor::vector({0.0}));
  const Tensor mask({4}, 0.0);
  const Var probs = t.softmax(score_viewports(t, ts, g, g, feats, mask));
  CHECK(t.val(probs).data[0] > 0.9);

  Rng rng(77);
  std::size_t hits = 0;
  for (int i = 0; i < 2000; ++i) {
    Tape ti;
    const auto fi = as_constants(ti, {Tensor::vector({1.0}),
                                      Tensor::vector({-1.0}),
                                      Tensor::vector({-1.0}),
                                      Tensor::vector({-1.0})});
    const Var gi = ti.constant(Tensor::vector({0.0}));
    if (select_initial(ti, ts, tiny, gi, fi, rng) == 0) ++hits;
  }
  CHECK(hits > 1800);
}

TEST_CASE("critic value ignores candidate features") {
  PolicyDims dims;
  dims.d = 3;
  dims.d_h = 3;
  dims.d_z = 3;
  dims.gru_layers = 1;
  dims.critic_hidden = 5;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(4));

  const ImageFeatures fa = random_features(4, 3, 100);
  ImageFeatures fb = fa;
  for (auto& v : fb.viewports) v.fill(9.9);  // same g, wildly different feats

  auto first_value = [&](const ImageFeatures& f) {
    Tape t;
    auto feats = as_constants(t, f.viewports);
    PolicyState s = initial_state(t, dims, t.constant(f.global));
    Rng rng(1);
    const std::size_t forced = 2;
    const StepOutput so = step(t, ps, dims, s, feats, MaskMode::revisit, rng,
                               ActionSelect::sample, &forced);
    return t.scalar_val(so.value);
  };
  CHECK(first_value(fa) == first_value(fb));
}

TEST_CASE("revisit masking never repeats a viewport") {
  PolicyDims dims;
  dims.d = 8;
  dims.d_h = 8;
  dims.d_z = 8;
  dims.gru_layers = 2;
  dims.critic_hidden = 8;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(55));
  const ImageFeatures f = random_features(32, 8, 7);

  Rng rng(2024);
  for (int episode = 0; episode < 10000; ++episode) {
    auto paths = rollout(f, ps, dims, 1, 7, MaskMode::revisit, rng);
    const auto& idx = paths[0].first.indices;
    const std::set<std::size_t> uniq(idx.begin(), idx.end());
    REQUIRE(uniq.size() == 7);
    for (double lp : paths[0].first.log_probs) REQUIRE(lp <= 0.0);
  }
}

TEST_CASE("masked actions are never sampled across a million draws") {
  PolicyDims dims;
  dims.d = 1;
  dims.d_h = 1;
  dims.d_z = 1;
  dims.gru_layers = 1;
  dims.critic_hidden = 1;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(66));
  const ImageFeatures f = random_features(4, 1, 3);

  Rng rng(31337);
  for (int episode = 0; episode < 334000; ++episode) {
    Tape t(false);
    auto feats = as_constants(t, f.viewports);
    PolicyState s = initial_state(t, dims, t.constant(f.global));
    std::size_t a0 = step(t, ps, dims, s, feats, MaskMode::revisit, rng).action;
    std::size_t a1 = step(t, ps, dims, s, feats, MaskMode::revisit, rng).action;
    std::size_t a2 = step(t, ps, dims, s, feats, MaskMode::revisit, rng).action;
    REQUIRE(a1 != a0);
    REQUIRE(a2 != a0);
    REQUIRE(a2 != a1);
  }
}

TEST_CASE("degenerate and contract failures") {
  PolicyDims dims;
  dims.d = 1;
  dims.d_h = 1;
  dims.d_z = 1;
  dims.gru_layers = 1;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(8));
  const ImageFeatures f = random_features(2, 1, 4);

  Tape t(false);
  auto feats = as_constants(t, f.viewports);
  PolicyState s = initial_state(t, dims, t.constant(f.global));
  Rng rng(1);
  (void)step(t, ps, dims, s, feats, MaskMode::revisit, rng);
  (void)step(t, ps, dims, s, feats, MaskMode::revisit, rng);
  CHECK_THROWS_AS(step(t, ps, dims, s, feats, MaskMode::revisit, rng),
                  ContractError);

  Tape t2(false);
  auto feats2 = as_constants(t2, f.viewports);
  PolicyState s2 = initial_state(t2, dims, t2.constant(f.global));
  (void)step(t2, ps, dims, s2, feats2, MaskMode::revisit, rng);
  const std::size_t taken = s2.visited[0];
  CHECK_THROWS_AS(step(t2, ps, dims, s2, feats2, MaskMode::revisit, rng,
                       ActionSelect::sample, &taken),
                  ContractError);

  CHECK_THROWS_AS(rollout(f, ps, dims, 1, 3, MaskMode::revisit, rng),
                  ArgumentError);
  CHECK_NOTHROW(rollout(f, ps, dims, 1, 3, MaskMode::none, rng));
  CHECK_THROWS_AS(rollout(f, ps, dims, 0, 1, MaskMode::none, rng),
                  ArgumentError);
}

TEST_CASE("rollouts have exact shape and reproduce bit-identically") {
  PolicyDims dims;
  dims.d = 6;
  dims.d_h = 6;
  dims.d_z = 6;
  dims.gru_layers = 3;
  dims.critic_hidden = 6;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(91));
  const ImageFeatures f = random_features(32, 6, 8);

  Rng r1(42), r2(42);
  const auto a = rollout(f, ps, dims, 15, 7, MaskMode::revisit, r1);
  const auto b = rollout(f, ps, dims, 15, 7, MaskMode::revisit, r2);
  REQUIRE(a.size() == 15);
  for (std::size_t k = 0; k < a.size(); ++k) {
    REQUIRE(a[k].first.indices.size() == 7);
    REQUIRE(a[k].second.steps.size() == 7);
    CHECK(a[k].first.indices == b[k].first.indices);
    CHECK(a[k].first.log_probs == b[k].first.log_probs);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(a[k].second.steps[i].value == b[k].second.steps[i].value);
      CHECK(a[k].second.steps[i].done == (i == 6));
      CHECK(a[k].second.steps[i].reward == 0.0);
    }
  }
  Rng r3(43);
  const auto c = rollout(f, ps, dims, 15, 7, MaskMode::revisit, r3);
  bool same = true;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].first.indices != c[k].first.indices) same = false;
  CHECK_FALSE(same);
}

TEST_CASE("greedy mode is deterministic with lowest-index ties") {
  PolicyDims dims;
  dims.d = 2;
  dims.d_h = 2;
  dims.d_z = 2;
  dims.gru_layers = 1;
  dims.critic_hidden = 2;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(3));
  // Zero the scoring head: every logit ties at 0.
  ps.at("policy/score/W_h").value.fill(0.0);
  ps.at("policy/score/W_g").value.fill(0.0);
  ps.at("policy/score/W_f").value.fill(0.0);
  ps.at("policy/score/b").value.fill(0.0);
  ps.at("policy/score/v").value.fill(0.0);

  const ImageFeatures f = random_features(5, 2, 12);
  Rng rng(0);
  const auto paths =
      rollout(f, ps, dims, 1, 4, MaskMode::revisit, rng, ActionSelect::greedy);
  CHECK(paths[0].first.indices == std::vector<std::size_t>{0, 1, 2, 3});

  Rng rng2(999);  // greedy ignores the stream entirely
  const auto again =
      rollout(f, ps, dims, 1, 4, MaskMode::revisit, rng2, ActionSelect::greedy);
  CHECK(again[0].first.indices == paths[0].first.indices);
}

TEST_CASE("full-step gradients match finite differences") {
  PolicyDims dims;
  dims.d = 3;
  dims.d_h = 4;
  dims.d_z = 3;
  dims.gru_layers = 2;
  dims.critic_hidden = 4;
  ParameterSet ps;
  init_policy_params(ps, dims, Rng(777));
  const ImageFeatures f = random_features(5, 3, 21);

  // Collect an episode, then differentiate its replay.
  Rng rng(11);
  const auto paths = rollout(f, ps, dims, 1, 3, MaskMode::revisit, rng);
  const auto& actions = paths[0].first.indices;

  ps.zero_grad();
  {
    Tape tape(true);
    auto feats = as_constants(tape, f.viewports);
    PolicyState state = initial_state(tape, dims, tape.constant(f.global));
    Rng dummy(0);
    std::vector<Var> parts;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const StepOutput so = step(tape, ps, dims, state, feats,
                                 MaskMode::revisit, dummy,
                                 ActionSelect::sample, &actions[i]);
      parts.push_back(so.log_prob);
      parts.push_back(tape.scale(so.value, 0.5));
      parts.push_back(tape.scale(so.entropy, 0.1));
    }
    tape.backward(tape.sum(tape.stack(parts)));
  }

  const double h = 1e-5;
  std::size_t checked = 0;
  for (auto& e : ps.entries()) {
    for (std::size_t i = 0; i < std::min<std::size_t>(e.value.numel(), 2); ++i) {
      const double keep = e.value.data[i];
      e.value.data[i] = keep + h;
      const double up = fd_loss(ps, dims, f, actions, MaskMode::revisit);
      e.value.data[i] = keep - h;
      const double dn = fd_loss(ps, dims, f, actions, MaskMode::revisit);
      e.value.data[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double an = e.grad.data[i];
      const double rel =
          std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      INFO(e.name, "[", i, "] fd=", fd, " an=", an);
      CHECK(rel < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 30);
}
