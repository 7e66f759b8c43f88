#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfdet/tensor.hpp"

namespace mfdet {

struct SgdConfig {
  float learning_rate = 0.01f;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
};

void validate(const SgdConfig& config);

struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Momentum SGD: v <- m v + (g + wd p); p <- p - lr v; then g <- 0.
/// Momentum buffers are keyed by parameter name.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig config);

  void step(std::span<const NamedParam> params);
  void set_learning_rate(float lr);
  const SgdConfig& config() const { return config_; }

 private:
  SgdConfig config_;
  std::map<std::string, std::vector<float>> velocity_;
};

}  // namespace mfdet
