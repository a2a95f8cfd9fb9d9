#include "credassign/optimizer.hpp"

#include <cmath>

namespace credassign {

AdamState adam_init(const Network& net) {
    AdamState st;
    const std::size_t L = net.layers.size();
    st.mW.resize(L);
    st.vW.resize(L);
    st.mB.resize(L);
    st.vB.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
        const auto& layer = net.layers[i];
        if (!layer.weighted()) continue;
        st.mW[i] = Tensor(layer.W.shape);
        st.vW[i] = Tensor(layer.W.shape);
        st.mB[i] = Tensor(layer.bias.shape);
        st.vB[i] = Tensor(layer.bias.shape);
    }
    return st;
}

namespace {

void update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                   const AdamConfig& cfg, float inv_bc1, float inv_bc2) {
    if (!param.same_shape(grad) || !param.same_shape(m))
        throw DimensionError("adam_step: parameter/gradient shape mismatch");
    const std::size_t n = param.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grad.data[i] + cfg.weight_decay * param.data[i];
        m.data[i] = cfg.beta1 * m.data[i] + (1.0f - cfg.beta1) * g;
        v.data[i] = cfg.beta2 * v.data[i] + (1.0f - cfg.beta2) * g * g;
        const float mhat = m.data[i] * inv_bc1;
        const float vhat = v.data[i] * inv_bc2;
        param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

} // namespace

void adam_step(Network& net, const GradsT<float>& grads, AdamState& state,
               const AdamConfig& cfg) {
    if (grads.dW.size() != net.layers.size() || state.mW.size() != net.layers.size())
        throw DimensionError("adam_step: gradient/state layer count mismatch");
    state.step += 1;
    const float inv_bc1 =
        1.0f / (1.0f - static_cast<float>(std::pow(cfg.beta1, static_cast<double>(state.step))));
    const float inv_bc2 =
        1.0f / (1.0f - static_cast<float>(std::pow(cfg.beta2, static_cast<double>(state.step))));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        if (!layer.weighted()) continue;
        update_tensor(layer.W, grads.dW[i], state.mW[i], state.vW[i], cfg, inv_bc1, inv_bc2);
        update_tensor(layer.bias, grads.dbias[i], state.mB[i], state.vB[i], cfg, inv_bc1,
                      inv_bc2);
    }
}

} // namespace credassign
