#include "narsal/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace narsal {

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) {
    if (cfg_.lr <= 0.0) {
        throw std::invalid_argument("AdamW: learning rate must be positive");
    }
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
        throw std::invalid_argument("AdamW: betas must lie in [0,1)");
    }
}

void AdamW::step(std::map<std::string, Tensor>& params,
                 const std::map<std::string, Tensor>& grads) {
    step_count_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (auto& [name, param] : params) {
        const auto git = grads.find(name);
        if (git == grads.end()) {
            throw std::invalid_argument("AdamW::step: missing gradient for '" + name + "'");
        }
        const Tensor& g = git->second;
        require_same_shape(param, g, "AdamW::step");
        Tensor& m = m_.try_emplace(name, Tensor(param.shape, 0.0)).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(param.shape, 0.0)).first->second;
        require_same_shape(param, m, "AdamW::step (first moment)");
        require_same_shape(param, v, "AdamW::step (second moment)");
        for (std::size_t i = 0; i < param.data.size(); ++i) {
            const double gi = g.data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gi;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            param.data[i] -=
                cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * param.data[i]);
        }
    }
}

void AdamW::restore(std::map<std::string, Tensor> m, std::map<std::string, Tensor> v,
                    std::int64_t step_count) {
    if (step_count < 0) {
        throw std::invalid_argument("AdamW::restore: negative step count");
    }
    m_ = std::move(m);
    v_ = std::move(v);
    step_count_ = step_count;
}

} // namespace narsal
