#include "mfdet/sgd.hpp"

#include "mfdet/error.hpp"

namespace mfdet {

void validate(const SgdConfig& config) {
  if (!(config.learning_rate > 0.0f)) throw ConfigError("learning_rate must be > 0");
  if (!(config.momentum >= 0.0f && config.momentum < 1.0f)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(config.weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
}

SgdOptimizer::SgdOptimizer(SgdConfig config) : config_(config) {
  // lr == 0 is allowed here so a frozen optimizer can be exercised in tests.
  if (config_.learning_rate < 0.0f) throw ConfigError("learning_rate must be >= 0");
  if (!(config_.momentum >= 0.0f && config_.momentum < 1.0f)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(config_.weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
}

void SgdOptimizer::set_learning_rate(float lr) { config_.learning_rate = lr; }

void SgdOptimizer::step(std::span<const NamedParam> params) {
  for (const auto& p : params)
    if (!p.tensor || !p.tensor->requires_grad())
      throw ConfigError("parameter '" + p.name + "' has no gradient");

  for (const auto& p : params) {
    Tensor& t = *p.tensor;
    auto& v = velocity_[p.name];
    if (v.size() != t.size()) v.assign(t.size(), 0.0f);
    auto grad = t.grad();
    auto data = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const float g = grad[i] + config_.weight_decay * data[i];
      v[i] = config_.momentum * v[i] + g;
      data[i] -= config_.learning_rate * v[i];
    }
    t.zero_grad();
  }
}

}  // namespace mfdet
