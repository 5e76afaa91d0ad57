#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ztc/tensor.hpp"

namespace ztc {

// Versioned binary container for model state: an eight-byte magic, a JSON
// metadata blob (configs, vocabulary, class lists), and named float64
// tensors. Payload is little-endian row-major.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
  const Tensor& tensor(const std::string& name) const;  // DataError when absent

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace ztc
