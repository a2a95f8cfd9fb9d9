#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "credassign/checkpoint.hpp"
#include "credassign/rng.hpp"

using namespace credassign;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    const fs::path p = fs::temp_directory_path() / (std::string("credassign_ckpt_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

Network small_net(std::uint64_t seed, FeedbackRule rule, double sigma) {
    auto net = Network::make({LayerSpec::conv("c1", 2, 3), LayerSpec::pool("p1"),
                              LayerSpec::fc("f1", 4, true), LayerSpec::fc("f2", 3, false)},
                             1, 6, 6);
    net.init_weights(seed);
    if (rule_uses_b0(rule)) net.init_feedback(rule, sigma, seed + 1);
    return net;
}

TrainConfig small_cfg(FeedbackRule rule) {
    TrainConfig cfg;
    cfg.rule = rule;
    cfg.lr = 3e-3f;
    cfg.sigma = 0.05f;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 77;
    cfg.data_dir = "/data";
    cfg.out_dir = "/out";
    return cfg;
}

} // namespace

TEST_CASE("checkpoints restore the exact parameters and optimizer state") {
    auto net = small_net(5, FeedbackRule::FA_TOEPLITZ, 0.05);
    AdamState opt = adam_init(net);
    // give the moments nonzero content
    Rng rng(6);
    GradsT<float> g;
    g.dW.resize(net.layers.size());
    g.dbias.resize(net.layers.size());
    for (int li : net.weighted_layer_indices()) {
        g.dW[static_cast<std::size_t>(li)] = randn<float>(rng, net.layers[li].W.shape, 1.0);
        g.dbias[static_cast<std::size_t>(li)] = randn<float>(rng, net.layers[li].bias.shape, 1.0);
    }
    adam_step(net, g, opt, AdamConfig{});

    Rng run_rng(99);
    (void)run_rng.gaussian(); // leave a cached spare in the state
    const Checkpoint ck =
        Checkpoint::capture(net, opt, small_cfg(FeedbackRule::FA_TOEPLITZ), 123, 0.625f,
                            run_rng.state_string());

    const fs::path dir = fresh_dir("roundtrip");
    save_checkpoint(ck, (dir / "a.ckpt").string());
    const Checkpoint back = load_checkpoint((dir / "a.ckpt").string());

    CHECK(back.step == 123);
    CHECK(back.best_val_acc == 0.625f);
    CHECK(back.config.rule == FeedbackRule::FA_TOEPLITZ);
    CHECK(back.config.lr == 3e-3f);
    CHECK(back.config.seed == 77);
    CHECK(back.config.data_dir == "/data");
    CHECK(back.rng_state == run_rng.state_string());

    Network net2 = back.restore_network();
    REQUIRE(net2.layers.size() == net.layers.size());
    for (int li : net.weighted_layer_indices()) {
        CHECK(net2.layers[li].W.data == net.layers[li].W.data);
        CHECK(net2.layers[li].bias.data == net.layers[li].bias.data);
        CHECK(net2.layers[li].B0.data == net.layers[li].B0.data);
        CHECK(net2.layers[li].b0_dense == net.layers[li].b0_dense);
    }
    AdamState opt2 = back.restore_adam(net2);
    CHECK(opt2.step == 123);
    for (int li : net.weighted_layer_indices()) {
        CHECK(opt2.mW[li].data == opt.mW[li].data);
        CHECK(opt2.vW[li].data == opt.vW[li].data);
        CHECK(opt2.mB[li].data == opt.mB[li].data);
        CHECK(opt2.vB[li].data == opt.vB[li].data);
    }

    // the restored net computes exactly what the original does
    Rng xr(7);
    const Tensor x = randn<float>(xr, {2, 1, 6, 6}, 1.0);
    CHECK(net2.forward(x).data == net.forward(x).data);

    // and the restored rng continues the exact stream
    Rng resumed(1);
    resumed.set_state_string(back.rng_state);
    Rng original(99);
    (void)original.gaussian();
    for (int i = 0; i < 17; ++i) CHECK(resumed.gaussian() == original.gaussian());
}

TEST_CASE("save -> load -> save is byte-identical") {
    auto net = small_net(11, FeedbackRule::FA_RANDOM, 0.1);
    AdamState opt = adam_init(net);
    const Checkpoint ck = Checkpoint::capture(net, opt, small_cfg(FeedbackRule::FA_RANDOM), 8,
                                              0.5f, Rng(3).state_string());
    const fs::path dir = fresh_dir("stable");
    save_checkpoint(ck, (dir / "one.ckpt").string());
    const Checkpoint mid = load_checkpoint((dir / "one.ckpt").string());
    save_checkpoint(mid, (dir / "two.ckpt").string());
    CHECK(slurp(dir / "one.ckpt") == slurp(dir / "two.ckpt"));
}

TEST_CASE("dense conv feedback survives the round trip") {
    // needs a conv layer that is not the first weighted one
    auto net = Network::make({LayerSpec::conv("c1", 2, 3), LayerSpec::conv("c2", 2, 3),
                              LayerSpec::fc("f", 3, false)},
                             1, 6, 6);
    net.init_weights(13);
    net.init_feedback(FeedbackRule::FA_RANDOM, 0.1, 14);
    REQUIRE(net.layers[1].b0_dense == true);
    REQUIRE(net.layers[1].B0.shape == std::vector<int>{8, 32});
    REQUIRE(net.layers[2].b0_dense == false); // fc feedback is matrix-shaped
    AdamState opt = adam_init(net);
    const Checkpoint ck = Checkpoint::capture(net, opt, small_cfg(FeedbackRule::FA_RANDOM), 0,
                                              0.0f, Rng(3).state_string());
    const fs::path dir = fresh_dir("dense");
    save_checkpoint(ck, (dir / "d.ckpt").string());
    Network net2 = load_checkpoint((dir / "d.ckpt").string()).restore_network();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(net2.layers[i].b0_dense == net.layers[i].b0_dense);
        CHECK(net2.layers[i].B0.shape == net.layers[i].B0.shape);
    }
}

TEST_CASE("checkpoints without optimizer state restore a fresh one") {
    auto net = small_net(17, FeedbackRule::BP, 0.0);
    AdamState empty; // no tensors captured
    const Checkpoint ck =
        Checkpoint::capture(net, empty, small_cfg(FeedbackRule::BP), 0, 0.0f,
                            Rng(3).state_string());
    const fs::path dir = fresh_dir("fresh");
    save_checkpoint(ck, (dir / "f.ckpt").string());
    const Checkpoint back = load_checkpoint((dir / "f.ckpt").string());
    Network net2 = back.restore_network();
    AdamState opt2 = back.restore_adam(net2);
    CHECK(opt2.step == 0);
    REQUIRE(opt2.mW.size() == net2.layers.size());
    for (int li : net2.weighted_layer_indices())
        for (float v : opt2.mW[static_cast<std::size_t>(li)].data) REQUIRE(v == 0.0f);
}

TEST_CASE("the header records sigma only for rules that draw feedback") {
    const fs::path dir = fresh_dir("sigma");
    auto bp_net = small_net(19, FeedbackRule::BP, 0.0);
    AdamState opt = adam_init(bp_net);
    save_checkpoint(Checkpoint::capture(bp_net, opt, small_cfg(FeedbackRule::BP), 0, 0.0f,
                                        Rng(3).state_string()),
                    (dir / "bp.ckpt").string());
    // read the raw header text
    const auto bytes = slurp(dir / "bp.ckpt");
    const std::string text(bytes.begin(), bytes.end());
    CHECK(text.find("\"sigma\": null") != std::string::npos);

    auto fa_net = small_net(19, FeedbackRule::FA_TOEPLITZ, 0.05);
    AdamState opt2 = adam_init(fa_net);
    save_checkpoint(Checkpoint::capture(fa_net, opt2, small_cfg(FeedbackRule::FA_TOEPLITZ), 0,
                                        0.0f, Rng(3).state_string()),
                    (dir / "fa.ckpt").string());
    const auto bytes2 = slurp(dir / "fa.ckpt");
    const std::string text2(bytes2.begin(), bytes2.end());
    CHECK(text2.find("\"sigma\": 0.05") != std::string::npos);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const fs::path dir = fresh_dir("corrupt");
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), IoError);

    auto net = small_net(23, FeedbackRule::BP, 0.0);
    AdamState opt = adam_init(net);
    const Checkpoint ck = Checkpoint::capture(net, opt, small_cfg(FeedbackRule::BP), 1, 0.1f,
                                              Rng(3).state_string());
    save_checkpoint(ck, (dir / "good.ckpt").string());

    auto bytes = slurp(dir / "good.ckpt");
    // wrong magic
    auto bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "magic.ckpt", std::ios::binary)
        .write(bad.data(), static_cast<std::streamsize>(bad.size()));
    CHECK_THROWS_AS(load_checkpoint((dir / "magic.ckpt").string()), FormatError);

    // truncated payload
    auto cut = bytes;
    cut.resize(cut.size() - 64);
    std::ofstream(dir / "cut.ckpt", std::ios::binary)
        .write(cut.data(), static_cast<std::streamsize>(cut.size()));
    CHECK_THROWS_AS(load_checkpoint((dir / "cut.ckpt").string()), FormatError);

    // garbage header json
    auto mangled = bytes;
    mangled[17] = '@'; // inside the json text
    std::ofstream(dir / "json.ckpt", std::ios::binary)
        .write(mangled.data(), static_cast<std::streamsize>(mangled.size()));
    CHECK_THROWS_AS(load_checkpoint((dir / "json.ckpt").string()), FormatError);
}

TEST_CASE("tensor lookup by name") {
    auto net = small_net(29, FeedbackRule::BP, 0.0);
    AdamState opt = adam_init(net);
    const Checkpoint ck = Checkpoint::capture(net, opt, small_cfg(FeedbackRule::BP), 0, 0.0f,
                                              Rng(3).state_string());
    CHECK(ck.tensor("c1.W").shape == std::vector<int>{2, 1, 3, 3});
    CHECK(ck.tensor("f2.bias").shape == std::vector<int>{3});
    CHECK_THROWS_AS(ck.tensor("nope.W"), ConfigError);
}
