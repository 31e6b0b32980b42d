#include "panoscan/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "panoscan/errors.hpp"

namespace panoscan {

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double plcc(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("plcc: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw ArgumentError("plcc: need at least 2 samples");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw NumericalError("plcc: undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("srcc: length mismatch");
  return plcc(average_ranks(x), average_ranks(y));
}

EvalReport make_report(const std::vector<double>& labels,
                       const std::vector<double>& predictions) {
  EvalReport r;
  r.srcc_v = srcc(labels, predictions);
  r.plcc_v = plcc(labels, predictions);
  r.n = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i)
    r.pairs.emplace_back(labels[i], predictions[i]);
  return r;
}

std::vector<SweepCell> sweep(
    const std::vector<std::size_t>& k_values,
    const std::vector<std::size_t>& t_values,
    const std::function<std::pair<double, double>(std::size_t, std::size_t)>&
        eval_cell) {
  std::vector<SweepCell> cells;
  for (std::size_t k : k_values) {
    for (std::size_t t : t_values) {
      const auto start = std::chrono::steady_clock::now();
      const auto [s, p] = eval_cell(k, t);
      const auto stop = std::chrono::steady_clock::now();
      SweepCell c;
      c.K = k;
      c.T = t;
      c.srcc_v = s;
      c.plcc_v = p;
      c.wall_ms =
          std::chrono::duration<double, std::milli>(stop - start).count();
      cells.push_back(c);
    }
  }
  return cells;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out = "K,T,srcc,plcc,wall_ms\n";
  char buf[128];
  for (const SweepCell& c : cells) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f,%.3f\n", c.K, c.T,
                  c.srcc_v, c.plcc_v, c.wall_ms);
    out += buf;
  }
  return out;
}

}  // namespace panoscan
