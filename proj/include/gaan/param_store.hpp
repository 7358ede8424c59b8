#pragma once

#include "gaan/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gaan {

struct ParamTensor {
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
};

/// Named parameter tensors with gradient accumulators and Adam moments.
/// Iteration order is lexicographic by name, which fixes the order of every
/// reduction over parameters (norms, updates, checkpoints).
class ParamStore {
 public:
  void add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  Matrix& grad(const std::string& name);
  const Matrix& grad(const std::string& name) const;

  std::map<std::string, ParamTensor>& tensors() { return tensors_; }
  const std::map<std::string, ParamTensor>& tensors() const { return tensors_; }

  std::vector<std::string> names() const;
  Index num_scalars() const;

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  void zero_grad();

  /// Parameter values only.
  using Snapshot = std::map<std::string, Matrix>;
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

 private:
  ParamTensor& at(const std::string& name);
  const ParamTensor& at(const std::string& name) const;

  std::map<std::string, ParamTensor> tensors_;
  std::int64_t step_ = 0;
};

}  // namespace gaan
