#include "maskvct/params.hpp"

namespace maskvct {

Mat& ParamStore::add(const std::string& name, int rows, int cols) {
  if (index_.contains(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, Mat::Zero(rows, cols)});
  return entries_.back().value;
}

Mat& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
  return entries_[it->second].value;
}

const Mat& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
  return entries_[it->second].value;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, static_cast<int>(e.value.rows()), static_cast<int>(e.value.cols()));
  return out;
}

void ParamStore::set_zero() {
  for (auto& e : entries_) e.value.setZero();
}

void ParamStore::add_scaled(const ParamStore& other, double scale) {
  if (other.entries_.size() != entries_.size()) throw DimensionError("ParamStore: layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].value.rows() != other.entries_[i].value.rows() ||
        entries_[i].value.cols() != other.entries_[i].value.cols())
      throw DimensionError("ParamStore: shape mismatch at " + entries_[i].name);
    entries_[i].value += scale * other.entries_[i].value;
  }
}

double& ParamStore::flat(std::size_t i) {
  for (auto& e : entries_) {
    const auto n = static_cast<std::size_t>(e.value.size());
    if (i < n) return e.value.data()[i];
    i -= n;
  }
  throw DomainError("ParamStore::flat: index out of range");
}

double ParamStore::flat(std::size_t i) const {
  return const_cast<ParamStore*>(this)->flat(i);
}

std::string ParamStore::flat_name(std::size_t i) const {
  for (const auto& e : entries_) {
    const auto n = static_cast<std::size_t>(e.value.size());
    if (i < n) return e.name + "[" + std::to_string(i) + "]";
    i -= n;
  }
  throw DomainError("ParamStore::flat_name: index out of range");
}

}  // namespace maskvct
