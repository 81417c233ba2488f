#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "narsal/tensor.hpp"

namespace narsal {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Decoupled-weight-decay Adam over a named parameter set. Moment tensors are
/// created on first step and shape-match their parameters thereafter.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg);

    /// One update; step count increases by exactly 1.
    void step(std::map<std::string, Tensor>& params,
              const std::map<std::string, Tensor>& grads);

    std::int64_t step_count() const { return step_count_; }
    const AdamWConfig& config() const { return cfg_; }

    const std::map<std::string, Tensor>& first_moments() const { return m_; }
    const std::map<std::string, Tensor>& second_moments() const { return v_; }

    /// Restores optimizer state from a checkpoint.
    void restore(std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
                 std::int64_t step_count);

private:
    AdamWConfig cfg_;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
    std::int64_t step_count_ = 0;
};

} // namespace narsal
