#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace panoscan {

// Tie-averaged ranks, 1-based: equal values share the mean of the rank block
// they occupy.
std::vector<double> average_ranks(const std::vector<double>& x);

// Pearson correlation; throws NumericalError when either side has zero
// variance (correlation undefined).
double plcc(const std::vector<double>& x, const std::vector<double>& y);

// Spearman: Pearson on tie-averaged ranks.
double srcc(const std::vector<double>& x, const std::vector<double>& y);

struct EvalReport {
  double srcc_v = 0.0;
  double plcc_v = 0.0;
  std::size_t n = 0;
  std::vector<std::pair<double, double>> pairs;  // (label, prediction)
};

EvalReport make_report(const std::vector<double>& labels,
                       const std::vector<double>& predictions);

struct SweepCell {
  std::size_t K = 0, T = 0;
  double srcc_v = 0.0, plcc_v = 0.0;
  double wall_ms = 0.0;
};

// Evaluates eval_cell at every (K, T) grid point, timing each call. The
// callback owns the model/testset plumbing so this harness stays pure.
std::vector<SweepCell> sweep(
    const std::vector<std::size_t>& k_values,
    const std::vector<std::size_t>& t_values,
    const std::function<std::pair<double, double>(std::size_t K, std::size_t T)>&
        eval_cell);

std::string sweep_csv(const std::vector<SweepCell>& cells);

}  // namespace panoscan
