#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "credassign/data.hpp"
#include "credassign/layers.hpp"

namespace credassign {

struct AngleReport {
    std::vector<std::string> layer; // weighted layers, forward order
    std::vector<double> degrees;    // NaN where either signal had zero norm
};

/// Angle between the true error signal and the selected rule's signal at
/// each weighted layer's pre-activation point, batch-flattened, on one probe
/// batch. One forward pass, two backward passes off the same caches.
AngleReport gradient_angle(Network& net, const Tensor& x, const std::vector<int>& labels,
                           FeedbackRule rule);

/// Fraction of entries with equal sign (sign(0) = 0 counts as its own sign).
/// Shapes must match.
double sign_concordance(const Tensor& a, const Tensor& b);

struct ConcordanceReport {
    std::vector<std::string> layer;
    std::vector<double> value; // NaN where W and B0 are not comparable
};

/// Per-layer sign agreement between current weights and the fixed feedback
/// drawn at init. Layers without weight-shaped feedback report NaN.
ConcordanceReport sign_concordance_report(const Network& net);

/// Linear CKA between activation matrices X [n,p1] and Y [n,p2]:
/// |Yc' Xc|_F^2 / (|Xc' Xc|_F |Yc' Yc|_F) with column centering. NaN when
/// either input has zero variance. Feature-space route, meant for modest
/// feature counts; the grid path below works on Gram matrices instead.
template <typename T>
double linear_cka(const TensorT<T>& X, const TensorT<T>& Y);

// ---- activation dumps and model-to-model CKA grids ----

struct DumpLayer {
    std::string name;
    int features = 0;
};

/// Header of an on-disk activation dump: per-layer row blocks of
/// little-endian f32, one row per dumped sample, preceded by a JSON header
/// carrying the sample indices and the model's correctness bitmap.
struct ActivationDump {
    std::string path;
    std::string model_id;
    int n = 0;
    std::vector<DumpLayer> layers;
    std::vector<int> sample_indices;   // dataset indices in dump-row order
    std::vector<std::uint8_t> correct; // per dumped sample
    std::uint64_t payload_base = 0;
};

/// Runs the net over the given dataset indices (deterministic center crops)
/// and dumps every weighted layer's post-nonlinearity activations.
ActivationDump write_activation_dump(const std::string& path, const std::string& model_id,
                                     Network& net, const Dataset& ds,
                                     const std::vector<int>& indices, int batch_size);

ActivationDump open_activation_dump(const std::string& path);

/// Rows [rows.size(), p] of one dumped layer, gathered in the given order.
Tensor read_dump_rows(const ActivationDump& dump, int layer, const std::vector<int>& rows);

enum class CkaSubset { All, BothCorrect, ACorrectBWrong };
const char* subset_name(CkaSubset s);
CkaSubset subset_from_name(const std::string& name);

struct CKAMatrix {
    std::vector<std::string> layers_a, layers_b;
    std::vector<double> value; // row-major, layers_a x layers_b
    int samples = 0;
    CkaSubset subset = CkaSubset::All;

    double at(int i, int j) const {
        return value[static_cast<std::size_t>(i) * layers_b.size() +
                     static_cast<std::size_t>(j)];
    }
};

/// Layer-by-layer linear CKA between two dumps over a sample subset chosen
/// from the dumps' correctness bitmaps. Both dumps must cover the same
/// samples in the same order. max_samples > 0 caps the subset to its first
/// members in dump order. Throws EmptySubsetError when no samples qualify.
CKAMatrix cka_grid(const ActivationDump& a, const ActivationDump& b, CkaSubset subset,
                   int max_samples = 0);

// ---- channel importance and exemplars ----

struct ChannelImportance {
    std::string layer;
    int class_id = 0;
    int samples = 0;
    std::vector<double> score; // per channel, >= 0
    std::vector<int> ranking;  // channel ids, descending score
};

/// Per-channel |spatial-mean gradient x spatial-mean activation|, averaged
/// over the images of one class. Gradients flow from the model's own
/// predicted-class logit through the standard backward path, independent of
/// the rule that trained the weights. Conv layers only.
ChannelImportance channel_importance(Network& net, const Dataset& ds,
                                     const std::string& layer_name, int class_id,
                                     int batch_size);

struct Exemplar {
    int sample_index = 0;
    float mean_activation = 0.0f;
};

/// The k dataset images with the highest spatial-mean activation of one
/// channel (the unit's activation for fc layers), descending; ties broken by
/// lower sample index.
std::vector<Exemplar> top_exemplars(Network& net, const Dataset& ds,
                                    const std::string& layer_name, int channel, int k,
                                    int batch_size);

/// Binary PPM montage of original 32x32 images, cols wide, row-major; any
/// trailing cells stay black.
void write_ppm_montage(const std::string& path, const Dataset& ds,
                       const std::vector<int>& indices, int cols = 3);

void write_cka_csv(const std::string& path, const CKAMatrix& m);
void write_importance_csv(const std::string& path, const ChannelImportance& ci);
void write_exemplars_json(const std::string& path, const std::string& layer, int channel,
                          const std::vector<Exemplar>& ex);

} // namespace credassign
