#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "credassign/layers.hpp"
#include "credassign/optimizer.hpp"

namespace credassign {

/// Everything a training run needs: the rule, its hyperparameters, and where
/// data and outputs live. Serialized verbatim into checkpoints and manifests.
struct TrainConfig {
    FeedbackRule rule = FeedbackRule::BP;
    float lr = 1e-3f;
    float sigma = 0.05f; // feedback init scale; ignored for bp and usf_sn
    float weight_decay = 0.0f;
    int epochs = 50;
    int batch_size = 128;
    std::uint64_t seed = 42;
    std::string data_dir;
    std::string out_dir;
    int train_subset = 0; // 0 = the full training split
    int probe_every = 100;
};

/// On-disk format: 8-byte magic, little-endian u64 header length, JSON
/// header (config snapshot, architecture, tensor directory with shapes and
/// payload offsets), then the tensors as raw little-endian f32 in directory
/// order. The header is rebuilt from parsed fields on save, and the builder
/// is deterministic, so save -> load -> save is byte-identical.
struct Checkpoint {
    TrainConfig config;
    std::vector<LayerSpec> arch;
    int input_ch = 3, input_h = 24, input_w = 24;
    std::int64_t step = 0;
    float best_val_acc = 0.0f;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor>> tensors; // fixed directory order

    static Checkpoint capture(const Network& net, const AdamState& opt,
                              const TrainConfig& cfg, std::int64_t step, float best_val_acc,
                              const std::string& rng_state);

    Network restore_network() const;
    AdamState restore_adam(const Network& net) const;
    const Tensor& tensor(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace credassign
