#pragma once
// AdamW with decoupled weight decay over a fixed set of parameter blocks.

#include <cstdint>
#include <vector>

#include "reliatta/core.hpp"

namespace reliatta {

struct AdamWConfig {
    double lr = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

class AdamW {
public:
    explicit AdamW(std::vector<ParameterBlock*> params);

    // One decoupled-weight-decay adaptive-moment update using the blocks'
    // grad fields. Returns false without touching parameters, moments, or
    // the step counter when any gradient is non-finite; the caller flags the
    // batch. On success the gradients are zeroed.
    bool step(const AdamWConfig& cfg);

    std::int64_t steps() const { return step_count_; }
    const std::vector<ParameterBlock*>& params() const { return params_; }

private:
    std::vector<ParameterBlock*> params_;
    std::vector<Vec> m_;
    std::vector<Vec> v_;
    std::int64_t step_count_ = 0;
};

}  // namespace reliatta
