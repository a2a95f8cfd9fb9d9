#include "credassign/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "credassign/errors.hpp"
#include "credassign/gemm.hpp"

namespace credassign {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double angle_degrees(const Tensor& a, const Tensor& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double x = a.data[i], y = b.data[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return kNan;
    // the angle of a vector with itself is zero by definition; going through
    // acos would turn the 1-ulp rounding of sqrt(na)*sqrt(nb) into ~1e-6 deg
    if (a.data == b.data) return 0.0;
    const double c = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return std::acos(c) * 180.0 / 3.14159265358979323846;
}

} // namespace

AngleReport gradient_angle(Network& net, const Tensor& x, const std::vector<int>& labels,
                           FeedbackRule rule) {
    net.forward(x);
    const auto& top = net.layers.back();
    Tensor logits = top.spec.relu ? relu(top.u) : top.u;
    auto [loss, dlogits] = softmax_cross_entropy(logits, labels);
    (void)loss;

    std::vector<Tensor> d_rule, d_bp;
    net.backward(dlogits, rule, &d_rule);
    net.backward(dlogits, FeedbackRule::BP, &d_bp);

    AngleReport rep;
    for (int i : net.weighted_layer_indices()) {
        rep.layer.push_back(net.layers[static_cast<std::size_t>(i)].spec.name);
        const Tensor& a = d_bp[static_cast<std::size_t>(i)];
        const Tensor& b = d_rule[static_cast<std::size_t>(i)];
        if (a.numel() == 0 || !a.same_shape(b)) {
            rep.degrees.push_back(kNan);
            continue;
        }
        rep.degrees.push_back(angle_degrees(a, b));
    }
    return rep;
}

double sign_concordance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("sign_concordance: shapes differ (" + shape_str(a) + " vs " +
                             shape_str(b) + ")");
    if (a.numel() == 0) throw DomainError("sign_concordance: empty tensors");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (sign_of(a.data[i]) == sign_of(b.data[i])) ++agree;
    return static_cast<double>(agree) / static_cast<double>(a.data.size());
}

ConcordanceReport sign_concordance_report(const Network& net) {
    ConcordanceReport rep;
    for (int i : net.weighted_layer_indices()) {
        const auto& L = net.layers[static_cast<std::size_t>(i)];
        rep.layer.push_back(L.spec.name);
        if (L.B0.numel() > 0 && L.B0.same_shape(L.W))
            rep.value.push_back(sign_concordance(L.W, L.B0));
        else
            rep.value.push_back(kNan); // dense or absent feedback: not comparable
    }
    return rep;
}

template <typename T>
double linear_cka(const TensorT<T>& X, const TensorT<T>& Y) {
    if (X.ndim() != 2 || Y.ndim() != 2) throw DimensionError("linear_cka: inputs must be 2-D");
    const int n = X.dim(0), p1 = X.dim(1), p2 = Y.dim(1);
    if (Y.dim(0) != n) throw DimensionError("linear_cka: sample counts differ");
    if (n < 2) throw DomainError("linear_cka: need at least two samples");

    auto center = [n](const TensorT<T>& M, int p) {
        std::vector<double> c(static_cast<std::size_t>(n) * p);
        for (int j = 0; j < p; ++j) {
            double mean = 0.0;
            for (int i = 0; i < n; ++i)
                mean += static_cast<double>(M.data[static_cast<std::size_t>(i) * p + j]);
            mean /= n;
            for (int i = 0; i < n; ++i)
                c[static_cast<std::size_t>(i) * p + j] =
                    static_cast<double>(M.data[static_cast<std::size_t>(i) * p + j]) - mean;
        }
        return c;
    };
    const std::vector<double> Xc = center(X, p1);
    const std::vector<double> Yc = center(Y, p2);

    auto frob_of_product = [n](const std::vector<double>& A, int pa,
                               const std::vector<double>& B, int pb) {
        // ||A' B||_F^2 with A [n,pa], B [n,pb]
        std::vector<double> prod(static_cast<std::size_t>(pa) * pb, 0.0);
        gemm_tA(A.data(), B.data(), prod.data(), pa, n, pb);
        double s = 0.0;
        for (double v : prod) s += v * v;
        return s;
    };

    const double sxx = std::sqrt(frob_of_product(Xc, p1, Xc, p1));
    const double syy = std::sqrt(frob_of_product(Yc, p2, Yc, p2));
    if (sxx == 0.0 || syy == 0.0) return kNan;
    const double sxy = frob_of_product(Yc, p2, Xc, p1);
    return sxy / (sxx * syy);
}

template double linear_cka(const TensorT<float>&, const TensorT<float>&);
template double linear_cka(const TensorT<double>&, const TensorT<double>&);

// ---- activation dumps ----

namespace {

constexpr char kDumpMagic[8] = {'C', 'R', 'E', 'D', 'D', 'M', 'P', '1'};

using json = nlohmann::json;

std::string dump_header_string(const ActivationDump& d) {
    json layers = json::array();
    for (const auto& l : d.layers) layers.push_back({{"features", l.features}, {"name", l.name}});
    json h;
    h["correct"] = d.correct;
    h["layers"] = layers;
    h["model_id"] = d.model_id;
    h["n"] = d.n;
    h["samples"] = d.sample_indices;
    return h.dump(2);
}

std::uint64_t layer_offset(const ActivationDump& d, int layer) {
    std::uint64_t off = 0;
    for (int l = 0; l < layer; ++l)
        off += static_cast<std::uint64_t>(d.n) * d.layers[static_cast<std::size_t>(l)].features *
               sizeof(float);
    return off;
}

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

} // namespace

ActivationDump write_activation_dump(const std::string& path, const std::string& model_id,
                                     Network& net, const Dataset& ds,
                                     const std::vector<int>& indices, int batch_size) {
    if (indices.empty()) throw DomainError("activation dump: no samples selected");
    if (batch_size <= 0) throw DomainError("activation dump: batch size must be positive");

    ActivationDump d;
    d.path = path;
    d.model_id = model_id;
    d.n = static_cast<int>(indices.size());
    d.sample_indices = indices;
    d.correct.assign(indices.size(), 0); // placeholder; same serialized width as the real bits
    const std::vector<int> widx = net.weighted_layer_indices();
    for (int i : widx) {
        const auto& L = net.layers[static_cast<std::size_t>(i)];
        const int p = L.spec.kind == LayerKind::Conv ? L.out_ch * L.out_h * L.out_w : L.out_dim;
        d.layers.push_back({L.spec.name, p});
    }

    std::string head = dump_header_string(d);
    std::fstream out(path, std::ios::binary | std::ios::in | std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(kDumpMagic, sizeof(kDumpMagic));
    const std::uint64_t len = head.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    d.payload_base = sizeof(kDumpMagic) + sizeof(len) + head.size();

    Tensor x;
    std::vector<int> labels;
    for (int row = 0; row < d.n; row += batch_size) {
        const int count = std::min(batch_size, d.n - row);
        fill_eval_batch(ds, indices, static_cast<std::size_t>(row), count, x, labels);
        Tensor logits = net.forward(x);
        for (int i = 0; i < count; ++i) {
            const int pred =
                argmax_row(logits.ptr() + static_cast<std::size_t>(i) * logits.dim(1),
                           logits.dim(1));
            d.correct[static_cast<std::size_t>(row + i)] =
                pred == labels[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        for (std::size_t l = 0; l < widx.size(); ++l) {
            const Tensor act = net.activation_output(widx[l]);
            const int p = d.layers[l].features;
            out.seekp(static_cast<std::streamoff>(d.payload_base + layer_offset(d, static_cast<int>(l)) +
                                                  static_cast<std::uint64_t>(row) * p * sizeof(float)));
            out.write(reinterpret_cast<const char*>(act.ptr()),
                      static_cast<std::streamsize>(static_cast<std::size_t>(count) * p *
                                                   sizeof(float)));
        }
        if (!out) throw IoError("write failed for '" + path + "'");
    }

    // rewrite the header with the real correctness bits (identical length)
    const std::string final_head = dump_header_string(d);
    if (final_head.size() != head.size())
        throw StateError("activation dump: header size changed on rewrite");
    out.seekp(sizeof(kDumpMagic) + sizeof(len));
    out.write(final_head.data(), static_cast<std::streamsize>(final_head.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
    return d;
}

ActivationDump open_activation_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDumpMagic, sizeof(kDumpMagic)) != 0)
        throw FormatError("'" + path + "' is not an activation dump");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1u << 28))
        throw FormatError("'" + path + "': implausible header length");
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError("'" + path + "': truncated header");

    ActivationDump d;
    d.path = path;
    d.payload_base = sizeof(magic) + sizeof(len) + len;
    try {
        const json h = json::parse(head);
        d.model_id = h.at("model_id").get<std::string>();
        d.n = h.at("n").get<int>();
        for (const auto& l : h.at("layers"))
            d.layers.push_back(
                {l.at("name").get<std::string>(), l.at("features").get<int>()});
        d.sample_indices = h.at("samples").get<std::vector<int>>();
        d.correct = h.at("correct").get<std::vector<std::uint8_t>>();
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': bad dump header: " + e.what());
    }
    if (static_cast<int>(d.sample_indices.size()) != d.n ||
        static_cast<int>(d.correct.size()) != d.n)
        throw FormatError("'" + path + "': header arrays disagree with n");
    return d;
}

Tensor read_dump_rows(const ActivationDump& dump, int layer, const std::vector<int>& rows) {
    if (layer < 0 || layer >= static_cast<int>(dump.layers.size()))
        throw DimensionError("read_dump_rows: layer out of range");
    std::ifstream in(dump.path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + dump.path + "'");
    const int p = dump.layers[static_cast<std::size_t>(layer)].features;
    const std::uint64_t base = dump.payload_base + layer_offset(dump, layer);
    Tensor out({static_cast<int>(rows.size()), p});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int r = rows[i];
        if (r < 0 || r >= dump.n) throw DimensionError("read_dump_rows: row out of range");
        in.seekg(static_cast<std::streamoff>(base + static_cast<std::uint64_t>(r) * p *
                                                        sizeof(float)));
        in.read(reinterpret_cast<char*>(out.ptr() + i * static_cast<std::size_t>(p)),
                static_cast<std::streamsize>(static_cast<std::size_t>(p) * sizeof(float)));
        if (!in) throw FormatError("'" + dump.path + "': truncated payload");
    }
    return out;
}

const char* subset_name(CkaSubset s) {
    switch (s) {
        case CkaSubset::All: return "all";
        case CkaSubset::BothCorrect: return "both_correct";
        case CkaSubset::ACorrectBWrong: return "a_correct_b_wrong";
    }
    return "?";
}

CkaSubset subset_from_name(const std::string& name) {
    if (name == "all") return CkaSubset::All;
    if (name == "both_correct") return CkaSubset::BothCorrect;
    if (name == "a_correct_b_wrong") return CkaSubset::ACorrectBWrong;
    throw ConfigError("unknown subset '" + name +
                      "' (expected all|both_correct|a_correct_b_wrong)");
}

namespace {

/// Centered Gram matrix of one dumped layer over the selected rows, plus its
/// Frobenius norm. Stored in float; all reductions run in double.
struct CenteredGram {
    std::vector<float> k; // m x m
    double norm = 0.0;
};

CenteredGram centered_gram(const ActivationDump& d, int layer, const std::vector<int>& rows) {
    const Tensor X = read_dump_rows(d, layer, rows);
    const int m = X.dim(0), p = X.dim(1);
    CenteredGram g;
    g.k.assign(static_cast<std::size_t>(m) * m, 0.0f);
    gemm_tB(X.ptr(), X.ptr(), g.k.data(), m, p, m);

    std::vector<double> row_mean(static_cast<std::size_t>(m), 0.0);
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += g.k[static_cast<std::size_t>(i) * m + j];
        row_mean[static_cast<std::size_t>(i)] = s / m;
        total += s;
    }
    total /= static_cast<double>(m) * m;

    double norm2 = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double v = g.k[static_cast<std::size_t>(i) * m + j] -
                             row_mean[static_cast<std::size_t>(i)] -
                             row_mean[static_cast<std::size_t>(j)] + total;
            g.k[static_cast<std::size_t>(i) * m + j] = static_cast<float>(v);
            norm2 += v * v;
        }
    g.norm = std::sqrt(norm2);
    return g;
}

} // namespace

CKAMatrix cka_grid(const ActivationDump& a, const ActivationDump& b, CkaSubset subset,
                   int max_samples) {
    if (a.n != b.n || a.sample_indices != b.sample_indices)
        throw ConfigError("cka_grid: dumps cover different sample sets");

    std::vector<int> rows;
    int n_a = 0, n_b = 0, n_both = 0;
    for (int i = 0; i < a.n; ++i) {
        const bool ca = a.correct[static_cast<std::size_t>(i)] != 0;
        const bool cb = b.correct[static_cast<std::size_t>(i)] != 0;
        n_a += ca;
        n_b += cb;
        n_both += ca && cb;
        const bool keep = subset == CkaSubset::All ||
                          (subset == CkaSubset::BothCorrect && ca && cb) ||
                          (subset == CkaSubset::ACorrectBWrong && ca && !cb);
        if (keep) rows.push_back(i);
    }
    if (static_cast<int>(rows.size()) < 2)
        throw EmptySubsetError("subset '" + std::string(subset_name(subset)) + "' has " +
                               std::to_string(rows.size()) + " samples (n=" +
                               std::to_string(a.n) + ", a_correct=" + std::to_string(n_a) +
                               ", b_correct=" + std::to_string(n_b) +
                               ", both=" + std::to_string(n_both) + ")");
    if (max_samples > 0 && static_cast<int>(rows.size()) > max_samples)
        rows.resize(static_cast<std::size_t>(max_samples));

    const int m = static_cast<int>(rows.size());
    std::vector<CenteredGram> ga, gb;
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        ga.push_back(centered_gram(a, static_cast<int>(l), rows));
    for (std::size_t l = 0; l < b.layers.size(); ++l)
        gb.push_back(centered_gram(b, static_cast<int>(l), rows));

    CKAMatrix out;
    out.subset = subset;
    out.samples = m;
    for (const auto& l : a.layers) out.layers_a.push_back(l.name);
    for (const auto& l : b.layers) out.layers_b.push_back(l.name);
    for (const auto& ka : ga)
        for (const auto& kb : gb) {
            if (ka.norm == 0.0 || kb.norm == 0.0) {
                out.value.push_back(kNan);
                continue;
            }
            double dot = 0.0;
            const std::size_t mm = static_cast<std::size_t>(m) * m;
            for (std::size_t i = 0; i < mm; ++i)
                dot += static_cast<double>(ka.k[i]) * kb.k[i];
            out.value.push_back(dot / (ka.norm * kb.norm));
        }
    return out;
}

// ---- channel importance and exemplars ----

ChannelImportance channel_importance(Network& net, const Dataset& ds,
                                     const std::string& layer_name, int class_id,
                                     int batch_size) {
    const int li = net.layer_index(layer_name);
    const auto& L = net.layers[static_cast<std::size_t>(li)];
    if (L.spec.kind != LayerKind::Conv)
        throw ConfigError("channel importance needs a conv layer, got '" + layer_name + "'");
    const std::vector<int> subset = class_indices(ds, class_id);
    if (subset.empty())
        throw EmptySubsetError("no samples of class " + std::to_string(class_id));

    const int C = L.out_ch, spatial = L.out_h * L.out_w;
    std::vector<double> acc(static_cast<std::size_t>(C), 0.0);

    Tensor x;
    std::vector<int> labels;
    const int n = static_cast<int>(subset.size());
    for (int at = 0; at < n; at += batch_size) {
        const int count = std::min(batch_size, n - at);
        fill_eval_batch(ds, subset, static_cast<std::size_t>(at), count, x, labels);
        const Tensor logits = net.forward(x);
        Tensor dlogits({count, logits.dim(1)});
        for (int i = 0; i < count; ++i) {
            const int pred = argmax_row(
                logits.ptr() + static_cast<std::size_t>(i) * logits.dim(1), logits.dim(1));
            dlogits.at(i, pred) = 1.0f; // d(predicted-class logit)/d(logits)
        }
        const Tensor g = net.backprop_to_activation(dlogits, li);
        const Tensor act = net.activation_output(li);
        for (int i = 0; i < count; ++i)
            for (int c = 0; c < C; ++c) {
                const std::size_t off =
                    (static_cast<std::size_t>(i) * C + c) * static_cast<std::size_t>(spatial);
                double gm = 0.0, am = 0.0;
                for (int s = 0; s < spatial; ++s) {
                    gm += g.data[off + static_cast<std::size_t>(s)];
                    am += act.data[off + static_cast<std::size_t>(s)];
                }
                acc[static_cast<std::size_t>(c)] += std::abs(gm / spatial * (am / spatial));
            }
    }

    ChannelImportance ci;
    ci.layer = layer_name;
    ci.class_id = class_id;
    ci.samples = n;
    ci.score.resize(static_cast<std::size_t>(C));
    ci.ranking.resize(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        ci.score[static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)] / n;
        ci.ranking[static_cast<std::size_t>(c)] = c;
    }
    std::stable_sort(ci.ranking.begin(), ci.ranking.end(), [&](int l, int r) {
        return ci.score[static_cast<std::size_t>(l)] > ci.score[static_cast<std::size_t>(r)];
    });
    return ci;
}

std::vector<Exemplar> top_exemplars(Network& net, const Dataset& ds,
                                    const std::string& layer_name, int channel, int k,
                                    int batch_size) {
    const int li = net.layer_index(layer_name);
    const auto& L = net.layers[static_cast<std::size_t>(li)];
    if (!L.weighted()) throw ConfigError("'" + layer_name + "' has no activations");
    const bool spatial = L.spec.kind == LayerKind::Conv;
    const int C = spatial ? L.out_ch : L.out_dim;
    if (channel < 0 || channel >= C)
        throw DomainError("channel " + std::to_string(channel) + " out of range for " +
                          layer_name);
    if (k <= 0 || k > ds.n) throw DomainError("k must be in [1, dataset size]");

    std::vector<int> all(static_cast<std::size_t>(ds.n));
    for (int i = 0; i < ds.n; ++i) all[static_cast<std::size_t>(i)] = i;

    std::vector<float> score(static_cast<std::size_t>(ds.n));
    Tensor x;
    std::vector<int> labels;
    for (int at = 0; at < ds.n; at += batch_size) {
        const int count = std::min(batch_size, ds.n - at);
        fill_eval_batch(ds, all, static_cast<std::size_t>(at), count, x, labels);
        net.forward(x);
        const Tensor act = net.activation_output(li);
        for (int i = 0; i < count; ++i) {
            if (spatial) {
                const int hw = L.out_h * L.out_w;
                const std::size_t off =
                    (static_cast<std::size_t>(i) * C + channel) * static_cast<std::size_t>(hw);
                double s = 0.0;
                for (int p = 0; p < hw; ++p) s += act.data[off + static_cast<std::size_t>(p)];
                score[static_cast<std::size_t>(at + i)] = static_cast<float>(s / hw);
            } else {
                score[static_cast<std::size_t>(at + i)] = act.at(i, channel);
            }
        }
    }

    std::vector<int> order = all;
    std::sort(order.begin(), order.end(), [&](int l, int r) {
        const float sl = score[static_cast<std::size_t>(l)], sr = score[static_cast<std::size_t>(r)];
        if (sl != sr) return sl > sr;
        return l < r;
    });
    std::vector<Exemplar> out;
    for (int i = 0; i < k; ++i)
        out.push_back({order[static_cast<std::size_t>(i)],
                       score[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]});
    return out;
}

void write_ppm_montage(const std::string& path, const Dataset& ds,
                       const std::vector<int>& indices, int cols) {
    if (indices.empty()) throw DomainError("montage: no images");
    if (cols <= 0) throw DomainError("montage: cols must be positive");
    const int rows = (static_cast<int>(indices.size()) + cols - 1) / cols;
    const int W = cols * kImageSide, H = rows * kImageSide;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(W) * H * 3, 0);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::uint8_t* rec = ds.record(indices[i]);
        const int cy = static_cast<int>(i) / cols * kImageSide;
        const int cx = static_cast<int>(i) % cols * kImageSide;
        for (int y = 0; y < kImageSide; ++y)
            for (int x = 0; x < kImageSide; ++x) {
                const std::size_t dst = (static_cast<std::size_t>(cy + y) * W + (cx + x)) * 3;
                const int src = y * kImageSide + x;
                rgb[dst + 0] = rec[src];
                rgb[dst + 1] = rec[kImageSide * kImageSide + src];
                rgb[dst + 2] = rec[2 * kImageSide * kImageSide + src];
            }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "P6\n" << W << " " << H << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()),
              static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

void write_cka_csv(const std::string& path, const CKAMatrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "layer";
    for (const auto& b : m.layers_b) out << "," << b;
    out << "\n";
    for (std::size_t i = 0; i < m.layers_a.size(); ++i) {
        out << m.layers_a[i];
        for (std::size_t j = 0; j < m.layers_b.size(); ++j)
            out << "," << fmt_double(m.at(static_cast<int>(i), static_cast<int>(j)));
        out << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_importance_csv(const std::string& path, const ChannelImportance& ci) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "rank,channel,score\n";
    char buf[48];
    for (std::size_t r = 0; r < ci.ranking.size(); ++r) {
        const int c = ci.ranking[r];
        std::snprintf(buf, sizeof(buf), "%zu,%d,%.8g\n", r + 1, c,
                      ci.score[static_cast<std::size_t>(c)]);
        out << buf;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_exemplars_json(const std::string& path, const std::string& layer, int channel,
                          const std::vector<Exemplar>& ex) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < ex.size(); ++i)
        entries.push_back({{"mean_activation", ex[i].mean_activation},
                           {"rank", i + 1},
                           {"sample_index", ex[i].sample_index}});
    nlohmann::json j;
    j["channel"] = channel;
    j["exemplars"] = entries;
    j["layer"] = layer;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace credassign
