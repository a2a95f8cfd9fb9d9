#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "credassign/ops.hpp"
#include "credassign/rng.hpp"
#include "credassign/tensor.hpp"

namespace credassign {

/// Selects how the error signal is carried backward through weighted layers.
/// The weight update rule is identical for all of them; only the operator
/// that maps a layer's output error to the layer below differs.
enum class FeedbackRule { BP, FA_RANDOM, FA_TOEPLITZ, USF_INIT, USF_SN };

const char* rule_name(FeedbackRule rule);
FeedbackRule rule_from_name(const std::string& name);

/// Rules whose feedback tensors are drawn at init (sigma applies).
bool rule_uses_b0(FeedbackRule rule);

enum class LayerKind { Conv, Pool, FC };

struct LayerSpec {
    LayerKind kind = LayerKind::FC;
    std::string name;
    int out_ch = 0;  // conv filters
    int ksize = 0;   // conv kernel side
    int out_dim = 0; // fc width
    bool relu = false;

    static LayerSpec conv(std::string name, int out_ch, int ksize, bool relu = true);
    static LayerSpec pool(std::string name);
    static LayerSpec fc(std::string name, int out_dim, bool relu);
};

/// One layer with resolved geometry, parameters, fixed feedback and the
/// caches left behind by the most recent forward pass.
template <typename T>
struct LayerStateT {
    LayerSpec spec;

    // resolved at network construction
    int in_ch = 0, in_h = 0, in_w = 0;
    int out_ch = 0, out_h = 0, out_w = 0;
    int in_dim = 0, out_dim = 0; // flattened sizes (fc uses these directly)

    TensorT<T> W;    // conv kernel [Cout,Cin,k,k] or fc matrix [out,in]
    TensorT<T> bias; // [out_ch] or [out_dim]

    // Fixed random feedback. Never mutated after init. Kernel/matrix-shaped
    // for FA Toeplitz and uSF Init; dense [out_dim, in_dim] for FA Random on
    // conv layers (b0_dense). Empty when the rule derives feedback from W or
    // the layer is the first weighted layer (its feedback is never applied).
    TensorT<T> B0;
    bool b0_dense = false;

    // forward caches
    TensorT<T> u;        // pre-activation
    TensorT<T> fc_input; // fc input batch
    std::vector<T> rows; // conv patch rows, per-sample blocks
    PoolResult pool;

    bool weighted() const { return spec.kind != LayerKind::Pool; }
};

template <typename T>
struct GradsT {
    // aligned with the network's layer list; empty tensors for pool layers
    std::vector<TensorT<T>> dW;
    std::vector<TensorT<T>> dbias;
};

/// Feed-forward network with hand-written backward passes. The layer list is
/// data-driven so tests can build micro-networks; make_reference_network()
/// builds the 24x24x3 five-layer architecture used for the experiments.
template <typename T>
struct NetworkT {
    std::vector<LayerStateT<T>> layers;
    int input_ch = 0, input_h = 0, input_w = 0;
    int batch = 0;
    bool forward_done = false;

    static NetworkT make(const std::vector<LayerSpec>& specs, int in_ch, int in_h, int in_w);

    /// He-style normal init (std = sqrt(2/fan_in)) for all weights, biases
    /// zero. Layer order fixed, so one seed pins every parameter.
    void init_weights(std::uint64_t seed);

    /// Draws B0 ~ N(0, sigma^2) for every layer whose feedback is applied
    /// during backward (all weighted layers except the first). No-op for
    /// rules that never read B0.
    void init_feedback(FeedbackRule rule, double sigma, std::uint64_t seed);

    TensorT<T> forward(const TensorT<T>& x);

    /// Error propagation per the selected rule; weight gradients are always
    /// computed from the local error and cached pre-synaptic activations.
    /// When deltas is non-null it receives, per layer, the pre-activation
    /// error signal (empty tensors at pool layers).
    GradsT<T> backward(const TensorT<T>& dlogits, FeedbackRule rule,
                       std::vector<TensorT<T>>* deltas = nullptr);

    /// The feedback operator a layer would apply in the next backward pass:
    /// W for BP, B0 for FA, |B0| o sign(W) for uSF Init, and
    /// ||W||_2 sign(W)/||sign(W)||_2 for uSF SN.
    TensorT<T> effective_feedback(int layer_idx, FeedbackRule rule) const;

    /// BP gradient of a scalar function of the logits (given as dlogits)
    /// with respect to layer_idx's post-ReLU output. Used by the channel
    /// importance analysis; no weight gradients are formed.
    TensorT<T> backprop_to_activation(const TensorT<T>& dlogits, int layer_idx);

    /// Post-nonlinearity output of a weighted layer from the forward cache.
    TensorT<T> activation_output(int layer_idx) const;

    int layer_index(const std::string& name) const;
    std::vector<int> weighted_layer_indices() const;

    /// Deep copy of parameters (not caches) from another network.
    void load_params_from(const NetworkT& other);
};

using Network = NetworkT<float>;
using NetworkD = NetworkT<double>;

/// Conv(3->64,5x5) ReLU, MaxPool, Conv(64->64,5x5) ReLU, MaxPool,
/// FC(576->384) ReLU, FC(384->192) ReLU, FC(192->10), for 24x24x3 inputs.
std::vector<LayerSpec> reference_layer_specs();

template <typename T>
NetworkT<T> make_reference_network() {
    return NetworkT<T>::make(reference_layer_specs(), 3, 24, 24);
}

} // namespace credassign
