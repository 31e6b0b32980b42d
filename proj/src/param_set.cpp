#include "panoscan/param_set.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "panoscan/errors.hpp"
#include "panoscan/rng.hpp"

namespace panoscan {

namespace {
constexpr char kMagic[] = "panoscan-ckpt-v1";

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}
}  // namespace

ParamEntry& ParameterSet::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw ContractError("duplicate parameter: " + name);
  ParamEntry e;
  e.name = name;
  e.grad = Tensor(init.shape, 0.0);
  e.m = Tensor(init.shape, 0.0);
  e.v = Tensor(init.shape, 0.0);
  e.value = std::move(init);
  index_[name] = entries_.size();
  entries_.push_back(std::move(e));
  return entries_.back();
}

ParamEntry& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second];
}

const ParamEntry& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second];
}

bool ParameterSet::has(const std::string& name) const {
  return index_.count(name) != 0;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

double ParameterSet::clip_global_norm(double max_norm) {
  if (max_norm <= 0.0) throw ArgumentError("clip_global_norm: max_norm <= 0");
  double sq = 0.0;
  for (const auto& e : entries_) {
    for (double g : e.grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& e : entries_) {
      for (double& g : e.grad.data) g *= scale;
    }
  }
  return norm;
}

void ParameterSet::adam_step(double lr, double beta1, double beta2, double eps,
                             long t) {
  if (t < 1) throw ContractError("adam_step: t must be >= 1");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (auto& e : entries_) {
    const std::size_t n = e.value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = e.grad.data[i];
      e.m.data[i] = beta1 * e.m.data[i] + (1.0 - beta1) * g;
      e.v.data[i] = beta2 * e.v.data[i] + (1.0 - beta2) * g * g;
      const double mhat = e.m.data[i] / bc1;
      const double vhat = e.v.data[i] / bc2;
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void ParameterSet::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic) - 1);
  write_u64(os, entries_.size());
  for (const auto& e : entries_) {
    write_u64(os, e.name.size());
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_u64(os, e.value.shape.size());
    for (auto d : e.value.shape) write_u64(os, d);
    // Doubles are serialized as their bit pattern, little-endian.
    for (double v : e.value.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      write_u64(os, bits);
    }
  }
  if (!os) throw DataError("checkpoint write failed: " + path);
}

void ParameterSet::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic) - 1];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw DataError("not a panoscan-ckpt-v1 file: " + path);
  const std::uint64_t count = read_u64(is);
  std::size_t seen = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t ndim = read_u64(is);
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_u64(is));
      numel *= d;
    }
    if (!is) throw DataError("truncated checkpoint: " + path);
    if (!has(name))
      throw DataError("checkpoint entry not in model: " + name);
    ParamEntry& e = at(name);
    if (e.value.shape != shape)
      throw DataError("checkpoint shape mismatch for entry: " + name);
    for (std::size_t i = 0; i < numel; ++i) {
      const std::uint64_t bits = read_u64(is);
      std::memcpy(&e.value.data[i], &bits, 8);
    }
    if (!is) throw DataError("truncated checkpoint: " + path);
    ++seen;
  }
  if (seen != entries_.size())
    throw DataError("checkpoint is missing entries (got " +
                    std::to_string(seen) + " of " +
                    std::to_string(entries_.size()) + ")");
}

ParameterSet ParameterSet::load_any(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic) - 1];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw DataError("not a panoscan-ckpt-v1 file: " + path);
  ParameterSet out;
  const std::uint64_t count = read_u64(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t name_len = read_u64(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t ndim = read_u64(is);
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_u64(is));
      numel *= d;
    }
    if (!is) throw DataError("truncated checkpoint: " + path);
    Tensor t(shape, 0.0);
    for (std::size_t i = 0; i < numel; ++i) {
      const std::uint64_t bits = read_u64(is);
      std::memcpy(&t.data[i], &bits, 8);
    }
    if (!is) throw DataError("truncated checkpoint: " + path);
    out.add(name, std::move(t));
  }
  return out;
}

void ParameterSet::absorb(ParameterSet&& other) {
  for (auto& e : other.entries_) {
    if (index_.count(e.name)) throw ContractError("absorb collision: " + e.name);
    index_[e.name] = entries_.size();
    entries_.push_back(std::move(e));
  }
  other.entries_.clear();
  other.index_.clear();
}

ParameterSet ParameterSet::extract_prefix(const std::string& prefix) const {
  ParameterSet out;
  for (const auto& e : entries_) {
    if (e.name.rfind(prefix, 0) == 0) out.add(e.name, e.value);
  }
  return out;
}

Tensor xavier_init(const std::vector<std::size_t>& shape, const Rng& root,
                   const std::string& name) {
  Rng rng = root.child(fnv1a_str(name.c_str()));
  std::size_t fan_in = 1, fan_out = 1;
  if (shape.size() == 2) {
    fan_out = shape[0];
    fan_in = shape[1];
  } else if (shape.size() == 1) {
    fan_in = fan_out = shape[0];
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(shape, 0.0);
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace panoscan
