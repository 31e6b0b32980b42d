#include "panoscan/losses.hpp"

#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

namespace {

void check_sign(int s) {
  if (s < -1 || s > 1) throw ArgumentError("rank loss: s must be -1, 0 or +1");
}

double softplus_stable(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

void validate(const LossWeights& w) {
  for (double v :
       {w.beta_mse, w.beta_rank, w.beta_cons, w.beta_triplet, w.beta_cross,
        w.m1, w.m2, w.m3})
    if (!(v >= 0.0)) throw ArgumentError("LossWeights: negative entry");
}

double l_mse(double q1_hat, double q2_hat, double q1, double q2) {
  const double e1 = q1_hat - q1;
  const double e2 = q2_hat - q2;
  return e1 * e1 + e2 * e2;
}

double l_rank(double q1_hat, double q2_hat, int s) {
  check_sign(s);
  return softplus_stable(-static_cast<double>(s) * (q1_hat - q2_hat));
}

double l_cons(double q_clean, double q_weak) {
  const double d = q_clean - q_weak;
  return d * d;
}

double l_triplet(double q_clean, double q_mild, double q_strong, double m1,
                 double m2, double m3) {
  return std::max(0.0, q_mild - q_clean + m1) +
         std::max(0.0, q_strong - q_mild + m2) +
         std::max(0.0, q_strong - q_clean + m3);
}

double l_cross(double q_a_aug, double q_b_aug, int s) {
  return l_rank(q_a_aug, q_b_aug, s);
}

double l_total(const LossComponents& c, const LossWeights& w) {
  return w.beta_mse * c.mse + w.beta_rank * c.rank + w.beta_cons * c.cons +
         w.beta_triplet * c.triplet + w.beta_cross * c.cross;
}

Var l_mse(Tape& t, Var q1_hat, Var q2_hat, double q1, double q2) {
  return t.add(t.square(t.add_const(q1_hat, -q1)),
               t.square(t.add_const(q2_hat, -q2)));
}

Var l_rank(Tape& t, Var q1_hat, Var q2_hat, int s) {
  check_sign(s);
  return t.softplus(t.scale(t.sub(q1_hat, q2_hat), -static_cast<double>(s)));
}

Var l_cons(Tape& t, Var q_clean, Var q_weak) {
  return t.square(t.sub(q_clean, q_weak));
}

Var l_triplet(Tape& t, Var q_clean, Var q_mild, Var q_strong, double m1,
              double m2, double m3) {
  const Var h1 = t.relu(t.add_const(t.sub(q_mild, q_clean), m1));
  const Var h2 = t.relu(t.add_const(t.sub(q_strong, q_mild), m2));
  const Var h3 = t.relu(t.add_const(t.sub(q_strong, q_clean), m3));
  return t.add(t.add(h1, h2), h3);
}

Var l_cross(Tape& t, Var q_a_aug, Var q_b_aug, int s) {
  return l_rank(t, q_a_aug, q_b_aug, s);
}

Var l_total(Tape& t, const LossTerms& c, const LossWeights& w) {
  validate(w);
  return t.add(
      t.add(t.add(t.scale(c.mse, w.beta_mse), t.scale(c.rank, w.beta_rank)),
            t.add(t.scale(c.cons, w.beta_cons),
                  t.scale(c.triplet, w.beta_triplet))),
      t.scale(c.cross, w.beta_cross));
}

}  // namespace panoscan
