#include "credassign/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "credassign/errors.hpp"

namespace credassign {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian floats");

namespace {

constexpr char kMagic[8] = {'C', 'R', 'E', 'D', 'C', 'K', 'P', '1'};

using json = nlohmann::json;

json config_to_json(const TrainConfig& c) {
    json j;
    j["method"] = rule_name(c.rule);
    j["lr"] = c.lr;
    if (rule_uses_b0(c.rule))
        j["sigma"] = c.sigma;
    else
        j["sigma"] = nullptr; // feedback scale plays no role for this rule
    j["weight_decay"] = c.weight_decay;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["data_dir"] = c.data_dir;
    j["out_dir"] = c.out_dir;
    j["train_subset"] = c.train_subset;
    j["probe_every"] = c.probe_every;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.rule = rule_from_name(j.at("method").get<std::string>());
    c.lr = j.at("lr").get<float>();
    c.sigma = j.at("sigma").is_null() ? 0.0f : j.at("sigma").get<float>();
    c.weight_decay = j.at("weight_decay").get<float>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.data_dir = j.at("data_dir").get<std::string>();
    c.out_dir = j.at("out_dir").get<std::string>();
    c.train_subset = j.at("train_subset").get<int>();
    c.probe_every = j.at("probe_every").get<int>();
    return c;
}

json arch_to_json(const Checkpoint& ck) {
    json layers = json::array();
    for (const auto& s : ck.arch) {
        json l;
        l["name"] = s.name;
        switch (s.kind) {
            case LayerKind::Conv:
                l["kind"] = "conv";
                l["out_ch"] = s.out_ch;
                l["ksize"] = s.ksize;
                l["relu"] = s.relu;
                break;
            case LayerKind::Pool:
                l["kind"] = "pool";
                break;
            case LayerKind::FC:
                l["kind"] = "fc";
                l["out_dim"] = s.out_dim;
                l["relu"] = s.relu;
                break;
        }
        layers.push_back(l);
    }
    json a;
    a["input"] = {ck.input_ch, ck.input_h, ck.input_w};
    a["layers"] = layers;
    return a;
}

std::vector<LayerSpec> arch_from_json(const json& a, int& ch, int& h, int& w) {
    const auto& input = a.at("input");
    ch = input.at(0).get<int>();
    h = input.at(1).get<int>();
    w = input.at(2).get<int>();
    std::vector<LayerSpec> specs;
    for (const auto& l : a.at("layers")) {
        const std::string kind = l.at("kind").get<std::string>();
        const std::string name = l.at("name").get<std::string>();
        if (kind == "conv")
            specs.push_back(LayerSpec::conv(name, l.at("out_ch").get<int>(),
                                            l.at("ksize").get<int>(), l.at("relu").get<bool>()));
        else if (kind == "pool")
            specs.push_back(LayerSpec::pool(name));
        else if (kind == "fc")
            specs.push_back(
                LayerSpec::fc(name, l.at("out_dim").get<int>(), l.at("relu").get<bool>()));
        else
            throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
    }
    return specs;
}

} // namespace

Checkpoint Checkpoint::capture(const Network& net, const AdamState& opt,
                               const TrainConfig& cfg, std::int64_t step, float best_val_acc,
                               const std::string& rng_state) {
    Checkpoint ck;
    ck.config = cfg;
    ck.input_ch = net.input_ch;
    ck.input_h = net.input_h;
    ck.input_w = net.input_w;
    ck.step = step;
    ck.best_val_acc = best_val_acc;
    ck.rng_state = rng_state;
    for (const auto& L : net.layers) ck.arch.push_back(L.spec);

    for (const auto& L : net.layers) {
        if (!L.weighted()) continue;
        ck.tensors.emplace_back(L.spec.name + ".W", L.W);
        ck.tensors.emplace_back(L.spec.name + ".bias", L.bias);
        if (L.B0.numel() > 0) ck.tensors.emplace_back(L.spec.name + ".B0", L.B0);
    }
    const bool have_adam = opt.mW.size() == net.layers.size();
    if (have_adam) {
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            const auto& L = net.layers[i];
            if (!L.weighted()) continue;
            ck.tensors.emplace_back("adam." + L.spec.name + ".W.m", opt.mW[i]);
            ck.tensors.emplace_back("adam." + L.spec.name + ".W.v", opt.vW[i]);
            ck.tensors.emplace_back("adam." + L.spec.name + ".bias.m", opt.mB[i]);
            ck.tensors.emplace_back("adam." + L.spec.name + ".bias.v", opt.vB[i]);
        }
    }
    return ck;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw ConfigError("checkpoint has no tensor '" + name + "'");
}

Network Checkpoint::restore_network() const {
    Network net = Network::make(arch, input_ch, input_h, input_w);
    for (auto& L : net.layers) {
        if (!L.weighted()) continue;
        const Tensor& W = tensor(L.spec.name + ".W");
        if (!W.same_shape(L.W))
            throw FormatError("checkpoint: shape mismatch for " + L.spec.name + ".W");
        L.W = W;
        const Tensor& b = tensor(L.spec.name + ".bias");
        if (!b.same_shape(L.bias))
            throw FormatError("checkpoint: shape mismatch for " + L.spec.name + ".bias");
        L.bias = b;
        for (const auto& [n, t] : tensors)
            if (n == L.spec.name + ".B0") {
                L.B0 = t;
                L.b0_dense = L.spec.kind == LayerKind::Conv && t.ndim() == 2;
            }
    }
    return net;
}

AdamState Checkpoint::restore_adam(const Network& net) const {
    AdamState st = adam_init(net);
    st.step = step;
    bool any = false;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& L = net.layers[i];
        if (!L.weighted()) continue;
        for (const auto& [n, t] : tensors) {
            if (n == "adam." + L.spec.name + ".W.m") st.mW[i] = t, any = true;
            if (n == "adam." + L.spec.name + ".W.v") st.vW[i] = t;
            if (n == "adam." + L.spec.name + ".bias.m") st.mB[i] = t;
            if (n == "adam." + L.spec.name + ".bias.v") st.vB[i] = t;
        }
    }
    if (!any) st.step = 0; // a parameter-only checkpoint starts the optimizer fresh
    return st;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    json dir = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ck.tensors) {
        json e;
        e["name"] = name;
        e["shape"] = t.shape;
        e["offset"] = offset;
        dir.push_back(e);
        offset += t.data.size() * sizeof(float);
    }
    json header;
    header["arch"] = arch_to_json(ck);
    header["best_val_acc"] = ck.best_val_acc;
    header["config"] = config_to_json(ck.config);
    header["rng"] = ck.rng_state;
    header["step"] = ck.step;
    header["tensors"] = dir;

    const std::string head = header.dump(2);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = head.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, t] : ck.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("'" + path + "' is not a checkpoint file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1u << 26))
        throw FormatError("'" + path + "': implausible header length");
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError("'" + path + "': truncated header");

    json header;
    try {
        header = json::parse(head);
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': bad header: " + e.what());
    }

    Checkpoint ck;
    try {
        ck.config = config_from_json(header.at("config"));
        ck.arch = arch_from_json(header.at("arch"), ck.input_ch, ck.input_h, ck.input_w);
        ck.best_val_acc = header.at("best_val_acc").get<float>();
        ck.rng_state = header.at("rng").get<std::string>();
        ck.step = header.at("step").get<std::int64_t>();
        std::uint64_t expect_offset = 0;
        for (const auto& e : header.at("tensors")) {
            const std::string name = e.at("name").get<std::string>();
            const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
            if (e.at("offset").get<std::uint64_t>() != expect_offset)
                throw FormatError("'" + path + "': tensor directory offsets out of order");
            Tensor t(shape);
            in.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * sizeof(float)));
            if (!in) throw FormatError("'" + path + "': truncated payload at " + name);
            expect_offset += t.data.size() * sizeof(float);
            ck.tensors.emplace_back(name, std::move(t));
        }
    } catch (const json::exception& e) {
        throw FormatError("'" + path + "': bad header field: " + e.what());
    }
    return ck;
}

} // namespace credassign
