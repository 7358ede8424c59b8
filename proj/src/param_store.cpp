#include "gaan/param_store.hpp"

namespace gaan {

void ParamStore::add(const std::string& name, Matrix value) {
  if (tensors_.count(name)) throw Error("parameter '" + name + "' already exists");
  ParamTensor t;
  t.grad = Matrix::Zero(value.rows(), value.cols());
  t.adam_m = Matrix::Zero(value.rows(), value.cols());
  t.adam_v = Matrix::Zero(value.rows(), value.cols());
  t.value = std::move(value);
  tensors_.emplace(name, std::move(t));
}

ParamTensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const ParamTensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ParamStore::value(const std::string& name) { return at(name).value; }
const Matrix& ParamStore::value(const std::string& name) const { return at(name).value; }
Matrix& ParamStore::grad(const std::string& name) { return at(name).grad; }
const Matrix& ParamStore::grad(const std::string& name) const { return at(name).grad; }

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

Index ParamStore::num_scalars() const {
  Index n = 0;
  for (const auto& [_, t] : tensors_) n += t.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : tensors_) t.grad.setZero();
}

ParamStore::Snapshot ParamStore::snapshot() const {
  Snapshot s;
  for (const auto& [name, t] : tensors_) s.emplace(name, t.value);
  return s;
}

void ParamStore::restore(const Snapshot& snap) {
  for (const auto& [name, v] : snap) {
    auto& dst = at(name).value;
    if (dst.rows() != v.rows() || dst.cols() != v.cols()) {
      throw ShapeError("snapshot shape mismatch for '" + name + "'");
    }
    dst = v;
  }
}

}  // namespace gaan
