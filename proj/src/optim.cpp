#include "reliatta/optim.hpp"

#include <cmath>

namespace reliatta {

AdamW::AdamW(std::vector<ParameterBlock*> params) : params_(std::move(params)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ParameterBlock* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

bool AdamW::step(const AdamWConfig& cfg) {
    for (const ParameterBlock* p : params_) {
        if (!all_finite(p->grad)) return false;
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count_));
    for (std::size_t b = 0; b < params_.size(); ++b) {
        ParameterBlock& p = *params_[b];
        if (!p.trainable) {
            p.zero_grad();
            continue;
        }
        Vec& m = m_[b];
        Vec& v = v_[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p.value[i] -= cfg.lr * cfg.weight_decay * p.value[i];
            p.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
        ensure_finite(p.value, "parameters after AdamW step");
        p.zero_grad();
    }
    return true;
}

}  // namespace reliatta
