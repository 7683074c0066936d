#pragma once

#include "maskvct/common.hpp"

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace maskvct {

/// Ordered collection of named weight matrices. The insertion order fixes the
/// flat layout used by the optimizer, checkpoints and gradient checks.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat value;
  };

  Mat& add(const std::string& name, int rows, int cols);
  Mat& get(const std::string& name);
  const Mat& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t total_size() const;

  /// Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  void set_zero();
  /// this += scale * other; shapes must match.
  void add_scaled(const ParamStore& other, double scale);

  /// Flat-index access across all entries (slow, for gradient checks).
  double& flat(std::size_t i);
  double flat(std::size_t i) const;
  std::string flat_name(std::size_t i) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace maskvct
