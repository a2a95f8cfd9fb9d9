#pragma once

#include <cstdint>
#include <vector>

#include "credassign/layers.hpp"

namespace credassign {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f; // classic L2 term, added to the raw gradient
};

/// First/second moment estimates, aligned with the network's layer list
/// (empty tensors at pool layers). Serialized inside checkpoints.
struct AdamState {
    std::vector<Tensor> mW, vW, mB, vB;
    std::int64_t step = 0;
};

AdamState adam_init(const Network& net);

/// One Adam update over every weighted layer. Weight decay is folded into
/// the gradient before the moment updates (L2 regularization, not AdamW).
void adam_step(Network& net, const GradsT<float>& grads, AdamState& state,
               const AdamConfig& cfg);

} // namespace credassign
