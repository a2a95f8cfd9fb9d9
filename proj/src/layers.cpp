#include "credassign/layers.hpp"

#include <cstring>

#include "credassign/gemm.hpp"

namespace credassign {

const char* rule_name(FeedbackRule rule) {
    switch (rule) {
        case FeedbackRule::BP: return "bp";
        case FeedbackRule::FA_RANDOM: return "fa_random";
        case FeedbackRule::FA_TOEPLITZ: return "fa_toeplitz";
        case FeedbackRule::USF_INIT: return "usf_init";
        case FeedbackRule::USF_SN: return "usf_sn";
    }
    return "?";
}

FeedbackRule rule_from_name(const std::string& name) {
    if (name == "bp") return FeedbackRule::BP;
    if (name == "fa_random") return FeedbackRule::FA_RANDOM;
    if (name == "fa_toeplitz") return FeedbackRule::FA_TOEPLITZ;
    if (name == "usf_init") return FeedbackRule::USF_INIT;
    if (name == "usf_sn") return FeedbackRule::USF_SN;
    throw ConfigError("unknown method '" + name +
                      "' (expected bp|fa_random|fa_toeplitz|usf_init|usf_sn)");
}

bool rule_uses_b0(FeedbackRule rule) {
    return rule == FeedbackRule::FA_RANDOM || rule == FeedbackRule::FA_TOEPLITZ ||
           rule == FeedbackRule::USF_INIT;
}

LayerSpec LayerSpec::conv(std::string name, int out_ch, int ksize, bool relu) {
    LayerSpec s;
    s.kind = LayerKind::Conv;
    s.name = std::move(name);
    s.out_ch = out_ch;
    s.ksize = ksize;
    s.relu = relu;
    return s;
}

LayerSpec LayerSpec::pool(std::string name) {
    LayerSpec s;
    s.kind = LayerKind::Pool;
    s.name = std::move(name);
    return s;
}

LayerSpec LayerSpec::fc(std::string name, int out_dim, bool relu) {
    LayerSpec s;
    s.kind = LayerKind::FC;
    s.name = std::move(name);
    s.out_dim = out_dim;
    s.relu = relu;
    return s;
}

std::vector<LayerSpec> reference_layer_specs() {
    return {
        LayerSpec::conv("conv1", 64, 5), LayerSpec::pool("pool1"),
        LayerSpec::conv("conv2", 64, 5), LayerSpec::pool("pool2"),
        LayerSpec::fc("fc1", 384, true), LayerSpec::fc("fc2", 192, true),
        LayerSpec::fc("fc3", 10, false),
    };
}

template <typename T>
NetworkT<T> NetworkT<T>::make(const std::vector<LayerSpec>& specs, int in_ch, int in_h,
                              int in_w) {
    if (specs.empty()) throw ConfigError("network needs at least one layer");
    NetworkT<T> net;
    net.input_ch = in_ch;
    net.input_h = in_h;
    net.input_w = in_w;

    int ch = in_ch, h = in_h, w = in_w;
    bool spatial = true;
    int flat = 0;
    for (const LayerSpec& spec : specs) {
        LayerStateT<T> L;
        L.spec = spec;
        switch (spec.kind) {
            case LayerKind::Conv: {
                if (!spatial) throw ConfigError(spec.name + ": conv after flatten");
                L.in_ch = ch;
                L.in_h = h;
                L.in_w = w;
                L.out_ch = spec.out_ch;
                L.out_h = conv_out_size(h, spec.ksize, 1, 0);
                L.out_w = conv_out_size(w, spec.ksize, 1, 0);
                L.in_dim = ch * h * w;
                L.out_dim = L.out_ch * L.out_h * L.out_w;
                L.W = TensorT<T>({spec.out_ch, ch, spec.ksize, spec.ksize});
                L.bias = TensorT<T>({spec.out_ch});
                ch = L.out_ch;
                h = L.out_h;
                w = L.out_w;
                break;
            }
            case LayerKind::Pool: {
                if (!spatial) throw ConfigError(spec.name + ": pool after flatten");
                if (h % 2 != 0 || w % 2 != 0)
                    throw DimensionError(spec.name + ": pooling needs even spatial size, got " +
                                         std::to_string(h) + "x" + std::to_string(w));
                L.in_ch = ch;
                L.in_h = h;
                L.in_w = w;
                L.out_ch = ch;
                L.out_h = h / 2;
                L.out_w = w / 2;
                h = L.out_h;
                w = L.out_w;
                break;
            }
            case LayerKind::FC: {
                if (spatial) {
                    flat = ch * h * w;
                    spatial = false;
                }
                L.in_dim = flat;
                L.out_dim = spec.out_dim;
                L.W = TensorT<T>({spec.out_dim, flat});
                L.bias = TensorT<T>({spec.out_dim});
                flat = spec.out_dim;
                break;
            }
        }
        net.layers.push_back(std::move(L));
    }
    if (net.layers.back().spec.kind != LayerKind::FC)
        throw ConfigError("network must end in a fully-connected layer");
    return net;
}

template <typename T>
void NetworkT<T>::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& L : layers) {
        if (!L.weighted()) continue;
        const int fan_in = L.spec.kind == LayerKind::Conv ? L.in_ch * L.spec.ksize * L.spec.ksize
                                                          : L.in_dim;
        const double std = std::sqrt(2.0 / fan_in);
        for (auto& v : L.W.data) v = static_cast<T>(std * rng.gaussian());
        L.bias.fill(T(0));
    }
}

template <typename T>
void NetworkT<T>::init_feedback(FeedbackRule rule, double sigma, std::uint64_t seed) {
    for (auto& L : layers) {
        L.B0 = TensorT<T>();
        L.b0_dense = false;
    }
    if (!rule_uses_b0(rule)) return;
    if (!(sigma > 0.0)) throw ConfigError("feedback init: sigma must be positive");

    Rng rng(seed);
    bool first_weighted = true;
    for (auto& L : layers) {
        if (!L.weighted()) continue;
        if (first_weighted) {
            // The first layer's feedback would map onto the network input;
            // it is never applied, so no B0 is kept for it.
            first_weighted = false;
            continue;
        }
        if (rule == FeedbackRule::FA_RANDOM && L.spec.kind == LayerKind::Conv) {
            L.B0 = randn<T>(rng, {L.out_dim, L.in_dim}, sigma);
            L.b0_dense = true;
        } else {
            L.B0 = randn<T>(rng, L.W.shape, sigma);
        }
    }
}

template <typename T>
TensorT<T> NetworkT<T>::forward(const TensorT<T>& x) {
    if (!layers.empty() && layers.front().spec.kind != LayerKind::FC) {
        require_shape(x, {x.dim(0), input_ch, input_h, input_w}, "network input");
    } else if (x.ndim() != 2 || x.dim(1) != layers.front().in_dim) {
        throw DimensionError("network input: expected [N," +
                             std::to_string(layers.front().in_dim) + "], got " + shape_str(x));
    }
    const int N = x.dim(0);
    batch = N;

    TensorT<T> cur = x;
    for (auto& L : layers) {
        switch (L.spec.kind) {
            case LayerKind::Conv: {
                const int patch = L.in_ch * L.spec.ksize * L.spec.ksize;
                const int opix = L.out_h * L.out_w;
                L.rows.resize(static_cast<std::size_t>(N) * opix * patch);
                L.u = TensorT<T>({N, L.out_ch, L.out_h, L.out_w});
                for (int n = 0; n < N; ++n) {
                    T* rows_n = L.rows.data() + static_cast<std::size_t>(n) * opix * patch;
                    im2row(cur.ptr() + static_cast<std::size_t>(n) * L.in_dim, L.in_ch, L.in_h,
                           L.in_w, L.spec.ksize, L.spec.ksize, 1, 0, rows_n);
                    gemm_tB(L.W.ptr(), rows_n,
                            L.u.ptr() + static_cast<std::size_t>(n) * L.out_dim, L.out_ch,
                            patch, opix);
                }
                T* up = L.u.ptr();
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < L.out_ch; ++c) {
                        const T b = L.bias.data[c];
                        for (int i = 0; i < opix; ++i) *up++ += b;
                    }
                cur = L.spec.relu ? relu(L.u) : L.u;
                break;
            }
            case LayerKind::Pool: {
                cur = maxpool2d(cur, 2, 2, L.pool);
                break;
            }
            case LayerKind::FC: {
                if (cur.ndim() != 2) cur.shape = {N, L.in_dim};
                L.fc_input = cur;
                L.u = TensorT<T>({N, L.out_dim});
                gemm_tB(cur.ptr(), L.W.ptr(), L.u.ptr(), N, L.in_dim, L.out_dim);
                T* up = L.u.ptr();
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < L.out_dim; ++o) *up++ += L.bias.data[o];
                cur = L.spec.relu ? relu(L.u) : L.u;
                break;
            }
        }
    }
    forward_done = true;
    return cur;
}

template <typename T>
TensorT<T> NetworkT<T>::effective_feedback(int layer_idx, FeedbackRule rule) const {
    const auto& L = layers.at(static_cast<std::size_t>(layer_idx));
    if (!L.weighted()) throw ConfigError(L.spec.name + ": pooling layers carry no feedback");
    switch (rule) {
        case FeedbackRule::BP:
            return L.W;
        case FeedbackRule::FA_RANDOM:
        case FeedbackRule::FA_TOEPLITZ: {
            if (L.B0.numel() == 0)
                throw ConfigError(L.spec.name + ": feedback tensor missing for " +
                                  rule_name(rule));
            return L.B0;
        }
        case FeedbackRule::USF_INIT: {
            if (L.B0.numel() == 0)
                throw ConfigError(L.spec.name + ": feedback tensor missing for usf_init");
            if (!L.B0.same_shape(L.W))
                throw ConfigError(L.spec.name + ": usf_init needs weight-shaped feedback");
            TensorT<T> b(L.W.shape);
            for (std::size_t i = 0; i < b.data.size(); ++i)
                b.data[i] = std::abs(L.B0.data[i]) * sign_of(L.W.data[i]);
            return b;
        }
        case FeedbackRule::USF_SN: {
            TensorT<T> s(L.W.shape);
            for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = sign_of(L.W.data[i]);
            const T wn = frobenius_norm(L.W);
            const T sn = frobenius_norm(s);
            const T scale = sn > T(0) ? wn / sn : T(0);
            for (auto& v : s.data) v *= scale;
            return s;
        }
    }
    throw ConfigError("unreachable feedback rule");
}

namespace {

template <typename T>
void add_column_sums(const TensorT<T>& delta, int rows, int cols, TensorT<T>& out) {
    // out[c] = sum_n delta[n, c]
    for (int n = 0; n < rows; ++n) {
        const T* d = delta.ptr() + static_cast<std::size_t>(n) * cols;
        for (int c = 0; c < cols; ++c) out.data[c] += d[c];
    }
}

} // namespace

template <typename T>
GradsT<T> NetworkT<T>::backward(const TensorT<T>& dlogits, FeedbackRule rule,
                                std::vector<TensorT<T>>* deltas) {
    if (!forward_done) throw StateError("backward called before forward");
    const int N = batch;
    if (dlogits.ndim() != 2 || dlogits.dim(0) != N ||
        dlogits.dim(1) != layers.back().out_dim)
        throw DimensionError("backward: dlogits shape mismatch");

    GradsT<T> grads;
    grads.dW.resize(layers.size());
    grads.dbias.resize(layers.size());
    if (deltas) deltas->assign(layers.size(), TensorT<T>());

    const int first_weighted = weighted_layer_indices().front();

    TensorT<T> e = dlogits; // grad wrt current layer's post-activation output
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        auto& L = layers[static_cast<std::size_t>(i)];
        if (L.spec.kind == LayerKind::Pool) {
            e = maxpool2d_backward(e, L.pool, L.in_h, L.in_w);
            continue;
        }

        // pre-activation error
        TensorT<T> delta = L.spec.relu ? relu_backward_mask(e, L.u) : std::move(e);

        if (L.spec.kind == LayerKind::FC) {
            grads.dW[i] = TensorT<T>({L.out_dim, L.in_dim});
            gemm_tA(delta.ptr(), L.fc_input.ptr(), grads.dW[i].ptr(), L.out_dim, N, L.in_dim);
            grads.dbias[i] = TensorT<T>({L.out_dim});
            add_column_sums(delta, N, L.out_dim, grads.dbias[i]);

            if (i != first_weighted) {
                const TensorT<T> M = effective_feedback(i, rule);
                TensorT<T> below({N, L.in_dim});
                gemm(delta.ptr(), M.ptr(), below.ptr(), N, L.out_dim, L.in_dim);
                // restore the spatial shape of the layer below if needed
                if (i > 0) {
                    const auto& prev = layers[static_cast<std::size_t>(i) - 1];
                    if (prev.spec.kind != LayerKind::FC)
                        below.shape = {N, prev.out_ch, prev.out_h, prev.out_w};
                }
                e = std::move(below);
            }
        } else { // Conv
            const int patch = L.in_ch * L.spec.ksize * L.spec.ksize;
            const int opix = L.out_h * L.out_w;
            grads.dW[i] = TensorT<T>({L.out_ch, L.in_ch, L.spec.ksize, L.spec.ksize});
            for (int n = 0; n < N; ++n) {
                gemm(delta.ptr() + static_cast<std::size_t>(n) * L.out_dim,
                     L.rows.data() + static_cast<std::size_t>(n) * opix * patch,
                     grads.dW[i].ptr(), L.out_ch, opix, patch, /*acc=*/true);
            }
            grads.dbias[i] = TensorT<T>({L.out_ch});
            for (int n = 0; n < N; ++n) {
                const T* d = delta.ptr() + static_cast<std::size_t>(n) * L.out_dim;
                for (int c = 0; c < L.out_ch; ++c) {
                    T s = 0;
                    for (int p = 0; p < opix; ++p) s += d[static_cast<std::size_t>(c) * opix + p];
                    grads.dbias[i].data[c] += s;
                }
            }

            if (i != first_weighted) {
                if (rule == FeedbackRule::FA_RANDOM) {
                    if (L.B0.numel() == 0 || !L.b0_dense)
                        throw ConfigError(L.spec.name + ": dense feedback missing for fa_random");
                    TensorT<T> flat = delta;
                    flat.shape = {N, L.out_dim};
                    TensorT<T> below({N, L.in_dim});
                    gemm(flat.ptr(), L.B0.ptr(), below.ptr(), N, L.out_dim, L.in_dim);
                    below.shape = {N, L.in_ch, L.in_h, L.in_w};
                    e = std::move(below);
                } else {
                    const TensorT<T> K = effective_feedback(i, rule);
                    e = conv2d_transposed(delta, K, 1, 0, L.in_h, L.in_w);
                }
            }
        }
        if (deltas) (*deltas)[static_cast<std::size_t>(i)] = std::move(delta);
        if (i == first_weighted) break;
    }
    return grads;
}

template <typename T>
TensorT<T> NetworkT<T>::backprop_to_activation(const TensorT<T>& dlogits, int layer_idx) {
    if (!forward_done) throw StateError("backprop_to_activation called before forward");
    const auto& target = layers.at(static_cast<std::size_t>(layer_idx));
    if (!target.weighted())
        throw ConfigError(target.spec.name + ": activations live on weighted layers");

    TensorT<T> e = dlogits;
    for (int i = static_cast<int>(layers.size()) - 1; i > layer_idx; --i) {
        auto& L = layers[static_cast<std::size_t>(i)];
        if (L.spec.kind == LayerKind::Pool) {
            e = maxpool2d_backward(e, L.pool, L.in_h, L.in_w);
            continue;
        }
        TensorT<T> delta = L.spec.relu ? relu_backward_mask(e, L.u) : std::move(e);
        if (L.spec.kind == LayerKind::FC) {
            TensorT<T> below({batch, L.in_dim});
            gemm(delta.ptr(), L.W.ptr(), below.ptr(), batch, L.out_dim, L.in_dim);
            if (i > 0) {
                const auto& prev = layers[static_cast<std::size_t>(i) - 1];
                if (prev.spec.kind != LayerKind::FC)
                    below.shape = {batch, prev.out_ch, prev.out_h, prev.out_w};
            }
            e = std::move(below);
        } else {
            e = conv2d_transposed(delta, L.W, 1, 0, L.in_h, L.in_w);
        }
    }
    return e;
}

template <typename T>
TensorT<T> NetworkT<T>::activation_output(int layer_idx) const {
    const auto& L = layers.at(static_cast<std::size_t>(layer_idx));
    if (!L.weighted()) throw ConfigError("activation_output: not a weighted layer");
    if (L.u.numel() == 0) throw StateError("activation_output: no forward cache");
    return L.spec.relu ? relu(L.u) : L.u;
}

template <typename T>
int NetworkT<T>::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].spec.name == name) return static_cast<int>(i);
    throw ConfigError("no layer named '" + name + "'");
}

template <typename T>
std::vector<int> NetworkT<T>::weighted_layer_indices() const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].weighted()) idx.push_back(static_cast<int>(i));
    if (idx.empty()) throw ConfigError("network has no weighted layers");
    return idx;
}

template <typename T>
void NetworkT<T>::load_params_from(const NetworkT<T>& other) {
    if (other.layers.size() != layers.size())
        throw DimensionError("load_params_from: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& dst = layers[i];
        const auto& src = other.layers[i];
        if (!dst.W.same_shape(src.W))
            throw DimensionError("load_params_from: weight shape mismatch at " + dst.spec.name);
        dst.W = src.W;
        dst.bias = src.bias;
        dst.B0 = src.B0;
        dst.b0_dense = src.b0_dense;
    }
}

template struct LayerStateT<float>;
template struct LayerStateT<double>;
template struct NetworkT<float>;
template struct NetworkT<double>;

} // namespace credassign
