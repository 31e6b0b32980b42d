#pragma once

#include "panoscan/tape.hpp"

namespace panoscan {

struct LossWeights {
  double beta_mse = 1.0;
  double beta_rank = 0.5;
  double beta_cons = 0.2;
  double beta_triplet = 0.2;
  double beta_cross = 0.3;
  double m1 = 2.0;  // margins on the 0-100 score scale
  double m2 = 2.0;
  double m3 = 4.0;
};

// All weights and margins must be >= 0.
void validate(const LossWeights& w);

// Scalar forms (logging, tests). s must be in {-1, 0, +1}; s=0 yields the
// constant log 2 with zero gradient in the tape forms.
double l_mse(double q1_hat, double q2_hat, double q1, double q2);
double l_rank(double q1_hat, double q2_hat, int s);
double l_cons(double q_clean, double q_weak);
double l_triplet(double q_clean, double q_mild, double q_strong, double m1,
                 double m2, double m3);
double l_cross(double q_a_aug, double q_b_aug, int s);

struct LossComponents {
  double mse = 0.0;
  double rank = 0.0;
  double cons = 0.0;
  double triplet = 0.0;
  double cross = 0.0;
};

double l_total(const LossComponents& c, const LossWeights& w);

// Tape forms on scalar Vars, identical math.
Var l_mse(Tape& t, Var q1_hat, Var q2_hat, double q1, double q2);
Var l_rank(Tape& t, Var q1_hat, Var q2_hat, int s);
Var l_cons(Tape& t, Var q_clean, Var q_weak);
Var l_triplet(Tape& t, Var q_clean, Var q_mild, Var q_strong, double m1,
              double m2, double m3);
Var l_cross(Tape& t, Var q_a_aug, Var q_b_aug, int s);

struct LossTerms {
  Var mse;
  Var rank;
  Var cons;
  Var triplet;
  Var cross;
};

Var l_total(Tape& t, const LossTerms& c, const LossWeights& w);

}  // namespace panoscan
