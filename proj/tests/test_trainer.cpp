#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "credassign/trainer.hpp"

using namespace credassign;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    const fs::path p = fs::temp_directory_path() / (std::string("credassign_trainer_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Trivially separable data: every class paints the whole image in its own
// brightness band. A few steps of any rule should sort these out.
Dataset ramp_dataset(int n) {
    Dataset ds;
    ds.n = n;
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.pixels.resize(static_cast<std::size_t>(n) * kImageBytes);
    for (int i = 0; i < n; ++i) {
        const int k = i % kNumClasses;
        ds.labels[static_cast<std::size_t>(i)] = k;
        const auto v = static_cast<std::uint8_t>(25 + 22 * k);
        std::fill_n(ds.pixels.begin() + static_cast<std::size_t>(i) * kImageBytes, kImageBytes,
                    v);
    }
    return ds;
}

TrainConfig tiny_cfg(FeedbackRule rule) {
    TrainConfig cfg;
    cfg.rule = rule;
    cfg.lr = 1e-3f;
    cfg.sigma = 0.05f;
    cfg.epochs = 1;
    cfg.batch_size = 32;
    cfg.seed = 7;
    cfg.train_subset = 64;
    cfg.probe_every = 1000; // epoch-end records only
    return cfg;
}

std::string slurp_text(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// bit-level vector equality, so that NaN probe values compare equal between
// two identical runs
bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

} // namespace

TEST_CASE("zero epochs yields the initial checkpoint and no records") {
    const fs::path dir = fresh_dir("zero");
    TrainConfig cfg = tiny_cfg(FeedbackRule::BP);
    cfg.epochs = 0;
    cfg.out_dir = (dir / "run").string();
    const Dataset ds = ramp_dataset(100);
    const TrainResult res = train_on(cfg, ds);
    CHECK(res.records.empty());
    CHECK(res.best.step == 0);
    CHECK(res.best_val_acc == 0.0);
    CHECK_FALSE(res.diverged);
    CHECK(res.layer_names == std::vector<std::string>{"conv1", "conv2", "fc1", "fc2", "fc3"});
    CHECK(fs::exists(dir / "run" / "best.ckpt"));
    CHECK(slurp_text(dir / "run" / "metrics.csv") ==
          "step,epoch,train_loss,train_acc,val_acc"
          ",angle_conv1,angle_conv2,angle_fc1,angle_fc2,angle_fc3"
          ",concordance_conv1,concordance_conv2,concordance_fc1,concordance_fc2,"
          "concordance_fc3\n");

    // the checkpoint reproduces the seeded init exactly
    Network restored = res.best.restore_network();
    Network fresh = make_reference_network<float>();
    fresh.init_weights(derive_seed(cfg.seed, "weights"));
    for (int li : fresh.weighted_layer_indices())
        CHECK(restored.layers[li].W.data == fresh.layers[li].W.data);
}

TEST_CASE("identical configs give bitwise identical runs") {
    const Dataset ds = ramp_dataset(100);
    TrainConfig cfg = tiny_cfg(FeedbackRule::FA_TOEPLITZ);
    const TrainResult a = train_on(cfg, ds);
    const TrainResult b = train_on(cfg, ds);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].step == b.records[i].step);
        CHECK(a.records[i].train_loss == b.records[i].train_loss);
        CHECK(same_bits(a.records[i].angle, b.records[i].angle));
        CHECK(same_bits(a.records[i].concordance, b.records[i].concordance));
    }
    CHECK(a.best_val_acc == b.best_val_acc);
    REQUIRE(a.best.tensors.size() == b.best.tensors.size());
    for (std::size_t i = 0; i < a.best.tensors.size(); ++i) {
        CHECK(a.best.tensors[i].first == b.best.tensors[i].first);
        CHECK(a.best.tensors[i].second.data == b.best.tensors[i].second.data);
    }

    TrainConfig other = cfg;
    other.seed = 8;
    const TrainResult c = train_on(other, ds);
    bool all_same = true;
    for (std::size_t i = 0; i < a.best.tensors.size(); ++i)
        all_same = all_same && a.best.tensors[i].second.data == c.best.tensors[i].second.data;
    CHECK_FALSE(all_same);
}

TEST_CASE("records carry probes and the best checkpoint tracks val accuracy") {
    const Dataset ds = ramp_dataset(120);
    TrainConfig cfg = tiny_cfg(FeedbackRule::USF_INIT);
    cfg.epochs = 2;
    cfg.probe_every = 2;
    const TrainResult res = train_on(cfg, ds);
    REQUIRE_FALSE(res.records.empty());

    // first record lands before any validation pass
    CHECK(res.records.front().step >= 1);
    CHECK(std::isnan(res.records.front().val_acc));
    // every record carries one angle and one concordance per weighted layer
    for (const auto& r : res.records) {
        CHECK(r.angle.size() == 5);
        CHECK(r.concordance.size() == 5);
        CHECK(std::isnan(r.concordance[0])); // conv1 never holds feedback
        CHECK_FALSE(std::isnan(r.angle[4])); // the top layer probe always resolves
    }
    // the last record of each epoch knows that epoch's val accuracy
    CHECK_FALSE(std::isnan(res.records.back().val_acc));

    double max_val = 0.0;
    for (const auto& r : res.records)
        if (!std::isnan(r.val_acc)) max_val = std::max(max_val, r.val_acc);
    CHECK(res.best_val_acc == doctest::Approx(max_val));
    CHECK(res.best.best_val_acc == doctest::Approx(res.best_val_acc));
    CHECK(res.best.step > 0);
}

TEST_CASE("training fits trivially separable data") {
    const Dataset ds = ramp_dataset(200);
    TrainConfig cfg = tiny_cfg(FeedbackRule::BP);
    cfg.epochs = 10;
    cfg.train_subset = 0; // all 180 train records
    cfg.lr = 1e-3f;
    const TrainResult res = train_on(cfg, ds);
    CHECK_FALSE(res.diverged);
    CHECK(res.best_val_acc > 0.5); // 10 classes, chance is 0.1
}

TEST_CASE("a blown-up learning rate aborts with the last good checkpoint") {
    const Dataset ds = ramp_dataset(100);
    TrainConfig cfg = tiny_cfg(FeedbackRule::BP);
    cfg.lr = 1e6f;
    cfg.epochs = 3;
    const TrainResult res = train_on(cfg, ds);
    CHECK(res.diverged);
    CHECK(res.best.step < 5);
    Network net = res.best.restore_network(); // still loadable
    for (int li : net.weighted_layer_indices()) CHECK(net.layers[li].W.all_finite());
}

TEST_CASE("train_on validates its config") {
    const Dataset ds = ramp_dataset(50);
    TrainConfig cfg = tiny_cfg(FeedbackRule::BP);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train_on(cfg, ds), ConfigError);
    cfg = tiny_cfg(FeedbackRule::BP);
    cfg.epochs = -1;
    CHECK_THROWS_AS(train_on(cfg, ds), ConfigError);
    cfg = tiny_cfg(FeedbackRule::FA_RANDOM);
    cfg.sigma = 0.0f;
    CHECK_THROWS_AS(train_on(cfg, ds), ConfigError);
    CHECK_THROWS_AS(train(TrainConfig{}), ConfigError); // empty data_dir
}

TEST_CASE("evaluate reports per-sample outcomes consistent with its accuracy") {
    const Dataset ds = ramp_dataset(60);
    Network net = make_reference_network<float>();
    net.init_weights(77);
    std::vector<int> idx;
    for (int i = 0; i < 40; ++i) idx.push_back(i);
    const EvalResult res = evaluate(net, ds, idx, 16);
    REQUIRE(res.correct.size() == 40);
    REQUIRE(res.predictions.size() == 40);
    double mean = 0;
    for (std::size_t i = 0; i < res.correct.size(); ++i) {
        mean += res.correct[i];
        CHECK(res.correct[i] == (res.predictions[i] == res.labels[i] ? 1 : 0));
        CHECK(res.labels[i] == ds.labels[idx[i]]);
    }
    CHECK(res.accuracy == doctest::Approx(mean / 40.0));
    REQUIRE(res.logits.shape == std::vector<int>{40, 10});
    // the stored logits argmax to the stored predictions
    for (int i = 0; i < 40; ++i) {
        int best = 0;
        for (int c = 1; c < 10; ++c)
            if (res.logits.at(i, c) > res.logits.at(i, best)) best = c;
        CHECK(best == res.predictions[static_cast<std::size_t>(i)]);
    }
    CHECK_THROWS_AS(evaluate(net, ds, {}, 16), DomainError);

    // batch size must not affect results
    Network net2 = make_reference_network<float>();
    net2.init_weights(77);
    const EvalResult res2 = evaluate(net2, ds, idx, 7);
    CHECK(res2.logits.data == res.logits.data);
}

TEST_CASE("hyperparameter grids enumerate the pinned combinations") {
    const TrainConfig base = tiny_cfg(FeedbackRule::BP);

    const auto bp = grid_configs(FeedbackRule::BP, base);
    REQUIRE(bp.size() == 6);
    CHECK(bp[0].lr == 5e-4f);
    CHECK(bp[0].weight_decay == 0.0f);
    CHECK(bp[1].lr == 5e-4f);
    CHECK(bp[1].weight_decay == 1e-4f);
    CHECK(bp[5].lr == 3e-3f);
    CHECK(bp[5].weight_decay == 1e-4f);
    for (const auto& c : bp) CHECK(c.out_dir.empty());

    for (FeedbackRule r :
         {FeedbackRule::FA_RANDOM, FeedbackRule::FA_TOEPLITZ, FeedbackRule::USF_INIT}) {
        const auto g = grid_configs(r, base);
        REQUIRE(g.size() == 9);
        CHECK(g[0].lr == 1e-3f);
        CHECK(g[0].sigma == 0.01f);
        CHECK(g[8].lr == 1e-2f);
        CHECK(g[8].sigma == 0.1f);
        for (const auto& c : g) CHECK(c.weight_decay == 0.0f);
    }

    const auto sn = grid_configs(FeedbackRule::USF_SN, base);
    REQUIRE(sn.size() == 4);
    CHECK(sn[0].lr == 1e-3f);
    CHECK(sn[3].lr == 3e-2f);
}

TEST_CASE("grid search ranks probes and is scheduling-independent") {
    const fs::path dir = fresh_dir("grid");
    // a real (tiny) dataset on disk: grid_search loads from data_dir
    TrainConfig base = tiny_cfg(FeedbackRule::USF_SN);
    base.epochs = 1;
    base.train_subset = 32;
    base.data_dir = (dir / "data").string();
    {
        const Dataset ds = ramp_dataset(24);
        fs::create_directories(dir / "data");
        for (int f = 1; f <= 5; ++f) {
            std::ofstream out(dir / "data" / ("data_batch_" + std::to_string(f) + ".bin"),
                              std::ios::binary);
            for (int i = 0; i < ds.n; ++i) {
                const char label = static_cast<char>(ds.labels[static_cast<std::size_t>(i)]);
                out.put(label);
                out.write(reinterpret_cast<const char*>(ds.record(i)), kImageBytes);
            }
        }
    }

    const GridResult serial = grid_search(FeedbackRule::USF_SN, base, 1);
    REQUIRE(serial.ranked.size() == 4);
    for (std::size_t i = 1; i < serial.ranked.size(); ++i)
        CHECK(serial.ranked[i - 1].val_acc >= serial.ranked[i].val_acc);
    CHECK(serial.best.lr == serial.ranked.front().config.lr);

    const GridResult parallel = grid_search(FeedbackRule::USF_SN, base, 3);
    REQUIRE(parallel.ranked.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(parallel.ranked[i].config.lr == serial.ranked[i].config.lr);
        CHECK(parallel.ranked[i].val_acc == serial.ranked[i].val_acc);
    }

    // ties resolve to grid order: equal accuracies must keep ascending
    // grid positions among themselves
    const auto grid = grid_configs(FeedbackRule::USF_SN, base);
    auto grid_pos = [&](const TrainConfig& c) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (grid[i].lr == c.lr) return i;
        return std::size_t(99);
    };
    for (std::size_t i = 1; i < serial.ranked.size(); ++i)
        if (serial.ranked[i - 1].val_acc == serial.ranked[i].val_acc)
            CHECK(grid_pos(serial.ranked[i - 1].config) < grid_pos(serial.ranked[i].config));

    const fs::path csv = dir / "grid.csv";
    write_grid_csv(csv.string(), serial);
    const std::string text = slurp_text(csv);
    CHECK(text.rfind("rank,method,lr,sigma,weight_decay,val_acc,diverged\n", 0) == 0);
    CHECK(text.find("usf_sn") != std::string::npos);
    CHECK(text.find(",,") != std::string::npos); // sigma column empty for this rule
}

TEST_CASE("metrics csv serializes records with nan markers") {
    const fs::path dir = fresh_dir("metrics");
    RunRecord r;
    r.step = 3;
    r.epoch = 1;
    r.train_loss = 2.25;
    r.train_acc = 0.5;
    r.val_acc = std::numeric_limits<double>::quiet_NaN();
    r.angle = {std::numeric_limits<double>::quiet_NaN(), 90.0};
    r.concordance = {std::numeric_limits<double>::quiet_NaN(), 0.5};
    write_metrics_csv((dir / "m.csv").string(), {"conv1", "fc1"}, {r});
    CHECK(slurp_text(dir / "m.csv") ==
          "step,epoch,train_loss,train_acc,val_acc,angle_conv1,angle_fc1,"
          "concordance_conv1,concordance_fc1\n"
          "3,1,2.250000,0.500000,nan,nan,90.000000,nan,0.500000\n");
}

TEST_CASE("backward benchmarks cover every rule") {
    const BenchResult b = bench_backward(2, 1, 123);
    CHECK(b.batch == 2);
    REQUIRE(b.ms.size() == 5);
    for (const auto& [name, ms] : b.ms) CHECK(ms > 0.0);
    CHECK(b.ms_of("bp") > 0.0);
    CHECK(b.ms_of("fa_random") > 0.0);
    CHECK_THROWS_AS(b.ms_of("nope"), ConfigError);
}
