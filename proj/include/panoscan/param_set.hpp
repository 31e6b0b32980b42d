#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "panoscan/tensor.hpp"

namespace panoscan {

class Rng;

// One learnable array with paired gradient storage and Adam moments. Gradients
// accumulate (+=) across tapes and must be zeroed explicitly before a step.
struct ParamEntry {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

class ParameterSet {
 public:
  ParamEntry& add(const std::string& name, Tensor init);
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool has(const std::string& name) const;

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  void zero_grad();
  std::size_t total_size() const;

  // Scales all gradients by max_norm/norm when the global L2 norm exceeds
  // max_norm. Returns the pre-clip norm.
  double clip_global_norm(double max_norm);

  // Standard Adam update with bias correction; t is the 1-based step count.
  void adam_step(double lr, double beta1, double beta2, double eps, long t);

  // Checkpoint container ("panoscan-ckpt-v1"): binary, little-endian, name ->
  // shape -> row-major doubles. Only values are persisted.
  void save(const std::string& path) const;
  // Strict load: every file entry must match an existing entry's shape and
  // vice versa; mismatches name the offending entry.
  void load(const std::string& path);
  // Schema-free read of the same container, for data files whose entry list
  // is not known up front (e.g. precomputed feature sidecars).
  static ParameterSet load_any(const std::string& path);

  // Merge another set's entries under this set (names must not collide).
  void absorb(ParameterSet&& other);
  // Split out entries whose names start with prefix (prefix retained).
  ParameterSet extract_prefix(const std::string& prefix) const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Seeded Xavier-uniform init: U(+-sqrt(6/(fan_in+fan_out))). The stream is
// keyed by the entry name, so adding parameters never reshuffles existing
// initializations.
Tensor xavier_init(const std::vector<std::size_t>& shape, const Rng& root,
                   const std::string& name);

}  // namespace panoscan
