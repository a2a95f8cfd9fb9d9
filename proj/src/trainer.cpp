#include "credassign/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "credassign/analysis.hpp"
#include "credassign/errors.hpp"
#include "credassign/optimizer.hpp"

namespace credassign {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.batch_size <= 0) throw ConfigError("batch size must be positive");
    if (!(cfg.lr > 0.0f)) throw ConfigError("learning rate must be positive");
    if (cfg.weight_decay < 0.0f) throw ConfigError("weight decay must be >= 0");
    if (rule_uses_b0(cfg.rule) && !(cfg.sigma > 0.0f))
        throw ConfigError(std::string(rule_name(cfg.rule)) + " needs a positive sigma");
    if (cfg.probe_every <= 0) throw ConfigError("probe cadence must be positive");
}

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

double batch_accuracy(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), c = logits.dim(1);
    int hits = 0;
    for (int i = 0; i < n; ++i)
        if (argmax_row(logits.ptr() + static_cast<std::size_t>(i) * c, c) ==
            labels[static_cast<std::size_t>(i)])
            ++hits;
    return static_cast<double>(hits) / n;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(rng.uniform_int(0, i))]);
}

} // namespace

EvalResult evaluate(Network& net, const Dataset& ds, const std::vector<int>& indices,
                    int batch_size) {
    if (indices.empty()) throw DomainError("evaluate: no samples");
    EvalResult res;
    const int n = static_cast<int>(indices.size());
    res.logits = Tensor({n, net.layers.back().out_dim});
    res.correct.resize(static_cast<std::size_t>(n));
    res.predictions.resize(static_cast<std::size_t>(n));
    res.labels.resize(static_cast<std::size_t>(n));

    Tensor x;
    std::vector<int> labels;
    int hits = 0;
    for (int at = 0; at < n; at += batch_size) {
        const int count = std::min(batch_size, n - at);
        fill_eval_batch(ds, indices, static_cast<std::size_t>(at), count, x, labels);
        const Tensor logits = net.forward(x);
        const int c = logits.dim(1);
        for (int i = 0; i < count; ++i) {
            const float* row = logits.ptr() + static_cast<std::size_t>(i) * c;
            std::copy(row, row + c, res.logits.ptr() + static_cast<std::size_t>(at + i) * c);
            const int pred = argmax_row(row, c);
            const int label = labels[static_cast<std::size_t>(i)];
            res.predictions[static_cast<std::size_t>(at + i)] = pred;
            res.labels[static_cast<std::size_t>(at + i)] = label;
            const bool ok = pred == label;
            res.correct[static_cast<std::size_t>(at + i)] = ok ? 1 : 0;
            hits += ok;
        }
    }
    res.accuracy = static_cast<double>(hits) / n;
    return res;
}

TrainResult train_on(const TrainConfig& cfg, const Dataset& train_set) {
    validate(cfg);

    const Split split = split_train_val(train_set.n, kValFraction, kSplitSeed);
    std::vector<int> train_idx = split.train;
    if (cfg.train_subset > 0 &&
        cfg.train_subset < static_cast<int>(train_idx.size()))
        train_idx.resize(static_cast<std::size_t>(cfg.train_subset));
    if (train_idx.empty() || split.val.empty())
        throw ConfigError("training needs non-empty train and val splits");

    Network net = make_reference_network<float>();
    net.init_weights(derive_seed(cfg.seed, "weights"));
    net.init_feedback(cfg.rule, cfg.sigma, derive_seed(cfg.seed, "feedback"));
    AdamState opt = adam_init(net);
    AdamConfig adam;
    adam.lr = cfg.lr;
    adam.weight_decay = cfg.weight_decay;

    TrainResult result;
    for (int i : net.weighted_layer_indices())
        result.layer_names.push_back(net.layers[static_cast<std::size_t>(i)].spec.name);

    // fixed probe batch: the head of the validation split, at most 128 samples
    const int probe_n = std::min<int>(128, static_cast<int>(split.val.size()));
    Tensor probe_x;
    std::vector<int> probe_labels;
    fill_eval_batch(train_set, split.val, 0, probe_n, probe_x, probe_labels);

    Rng run_rng(derive_seed(cfg.seed, "run"));
    result.best = Checkpoint::capture(net, opt, cfg, 0, 0.0f, run_rng.state_string());
    result.best_val_acc = 0.0;

    std::int64_t step = 0;
    double last_val = kNan;
    double win_loss = 0.0, win_acc = 0.0;
    int win_n = 0;
    double last_loss = kNan, last_acc = kNan;

    auto make_record = [&](int epoch) {
        RunRecord r;
        r.step = step;
        r.epoch = epoch;
        r.train_loss = win_n > 0 ? win_loss / win_n : last_loss;
        r.train_acc = win_n > 0 ? win_acc / win_n : last_acc;
        r.val_acc = last_val;
        const AngleReport ar = gradient_angle(net, probe_x, probe_labels, cfg.rule);
        r.angle = ar.degrees;
        const ConcordanceReport cr = sign_concordance_report(net);
        r.concordance = cr.value;
        win_loss = win_acc = 0.0;
        win_n = 0;
        return r;
    };

    bool stop = false;
    for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, "epoch." + std::to_string(epoch)));
        std::vector<int> order = train_idx;
        shuffle_indices(order, epoch_rng);

        Tensor x;
        std::vector<int> labels;
        const int n = static_cast<int>(order.size());
        for (int at = 0; at < n && !stop; at += cfg.batch_size) {
            const int count = std::min(cfg.batch_size, n - at);
            fill_train_batch(train_set, order, static_cast<std::size_t>(at), count, epoch_rng,
                             x, labels);
            const Tensor logits = net.forward(x);
            auto [loss, dlogits] = softmax_cross_entropy(logits, labels);
            if (!std::isfinite(loss)) {
                result.diverged = true; // keep the last good checkpoint
                stop = true;
                break;
            }
            const GradsT<float> grads = net.backward(dlogits, cfg.rule);
            adam_step(net, grads, opt, adam);
            ++step;

            last_loss = static_cast<double>(loss);
            last_acc = batch_accuracy(logits, labels);
            win_loss += last_loss;
            win_acc += last_acc;
            ++win_n;

            if (step % cfg.probe_every == 0) result.records.push_back(make_record(epoch));
        }
        if (stop) break;

        const EvalResult val = evaluate(net, train_set, split.val, cfg.batch_size);
        last_val = val.accuracy;
        result.records.push_back(make_record(epoch));
        if (val.accuracy > result.best_val_acc || result.best.step == 0) {
            result.best_val_acc = val.accuracy;
            result.best = Checkpoint::capture(net, opt, cfg, step,
                                              static_cast<float>(val.accuracy),
                                              run_rng.state_string());
        }
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_metrics_csv(cfg.out_dir + "/metrics.csv", result.layer_names, result.records);
        save_checkpoint(result.best, cfg.out_dir + "/best.ckpt");
    }
    return result;
}

TrainResult train(const TrainConfig& cfg) {
    if (cfg.data_dir.empty()) throw ConfigError("train: data directory not set");
    const Dataset train_set = load_train_set(cfg.data_dir);
    return train_on(cfg, train_set);
}

std::vector<TrainConfig> grid_configs(FeedbackRule rule, const TrainConfig& base) {
    std::vector<TrainConfig> out;
    auto push = [&](float lr, float sigma, float wd) {
        TrainConfig c = base;
        c.rule = rule;
        c.lr = lr;
        c.sigma = sigma;
        c.weight_decay = wd;
        c.out_dir.clear(); // probes never write files
        out.push_back(c);
    };
    switch (rule) {
        case FeedbackRule::BP:
            for (float lr : {5e-4f, 1e-3f, 3e-3f})
                for (float wd : {0.0f, 1e-4f}) push(lr, 0.0f, wd);
            break;
        case FeedbackRule::FA_RANDOM:
        case FeedbackRule::FA_TOEPLITZ:
        case FeedbackRule::USF_INIT:
            for (float lr : {1e-3f, 3e-3f, 1e-2f})
                for (float sigma : {0.01f, 0.05f, 0.1f}) push(lr, sigma, 0.0f);
            break;
        case FeedbackRule::USF_SN:
            for (float lr : {1e-3f, 3e-3f, 1e-2f, 3e-2f}) push(lr, 0.0f, 0.0f);
            break;
    }
    return out;
}

GridResult grid_search(FeedbackRule rule, const TrainConfig& base, int jobs) {
    if (base.epochs < 1) throw ConfigError("grid probes need at least one epoch");
    if (base.data_dir.empty()) throw ConfigError("grid: data directory not set");
    const std::vector<TrainConfig> configs = grid_configs(rule, base);
    if (configs.empty()) throw ConfigError("empty hyperparameter grid");

    const Dataset train_set = load_train_set(base.data_dir);
    std::vector<GridEntry> entries(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) return;
            const TrainResult r = train_on(configs[i], train_set);
            entries[i] = {configs[i], r.best_val_acc, r.diverged};
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(configs.size()));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    GridResult g;
    g.ranked = entries;
    std::stable_sort(g.ranked.begin(), g.ranked.end(),
                     [](const GridEntry& a, const GridEntry& b) { return a.val_acc > b.val_acc; });
    g.best = g.ranked.front().config;
    return g;
}

BenchResult bench_backward(int batch, int reps, std::uint64_t seed) {
    if (batch <= 0 || reps <= 0) throw DomainError("bench: batch and reps must be positive");
    Network net = make_reference_network<float>();
    net.init_weights(derive_seed(seed, "weights"));

    Rng rng(derive_seed(seed, "bench"));
    const Tensor x = randn<float>(rng, {batch, 3, 24, 24}, 1.0);
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (auto& l : labels) l = rng.uniform_int(0, kNumClasses - 1);

    const Tensor logits = net.forward(x);
    const auto [loss, dlogits] = softmax_cross_entropy(logits, labels);
    (void)loss;

    BenchResult res;
    res.batch = batch;
    res.reps = reps;
    using clock = std::chrono::steady_clock;
    for (FeedbackRule rule : {FeedbackRule::BP, FeedbackRule::FA_RANDOM,
                              FeedbackRule::FA_TOEPLITZ, FeedbackRule::USF_INIT,
                              FeedbackRule::USF_SN}) {
        if (rule_uses_b0(rule))
            net.init_feedback(rule, 0.05, derive_seed(seed, "feedback"));
        net.backward(dlogits, rule); // warmup
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < reps; ++r) {
            const auto t0 = clock::now();
            net.backward(dlogits, rule);
            const auto t1 = clock::now();
            best = std::min(best,
                            std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        res.ms.emplace_back(rule_name(rule), best);
    }
    return res;
}

double BenchResult::ms_of(const std::string& rule) const {
    for (const auto& [name, v] : ms)
        if (name == rule) return v;
    throw ConfigError("bench has no entry for '" + rule + "'");
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

void write_metrics_csv(const std::string& path, const std::vector<std::string>& layer_names,
                       const std::vector<RunRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "step,epoch,train_loss,train_acc,val_acc";
    for (const auto& l : layer_names) out << ",angle_" << l;
    for (const auto& l : layer_names) out << ",concordance_" << l;
    out << "\n";
    for (const auto& r : records) {
        out << r.step << "," << r.epoch << "," << fmt(r.train_loss) << "," << fmt(r.train_acc)
            << "," << fmt(r.val_acc);
        for (std::size_t i = 0; i < layer_names.size(); ++i)
            out << "," << fmt(i < r.angle.size() ? r.angle[i] : kNan);
        for (std::size_t i = 0; i < layer_names.size(); ++i)
            out << "," << fmt(i < r.concordance.size() ? r.concordance[i] : kNan);
        out << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_grid_csv(const std::string& path, const GridResult& grid) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "rank,method,lr,sigma,weight_decay,val_acc,diverged\n";
    char buf[160];
    for (std::size_t i = 0; i < grid.ranked.size(); ++i) {
        const GridEntry& e = grid.ranked[i];
        const char* method = rule_name(e.config.rule);
        if (rule_uses_b0(e.config.rule))
            std::snprintf(buf, sizeof(buf), "%zu,%s,%g,%g,%g,%.6f,%d\n", i + 1, method,
                          e.config.lr, e.config.sigma, e.config.weight_decay, e.val_acc,
                          e.diverged ? 1 : 0);
        else
            std::snprintf(buf, sizeof(buf), "%zu,%s,%g,,%g,%.6f,%d\n", i + 1, method,
                          e.config.lr, e.config.weight_decay, e.val_acc, e.diverged ? 1 : 0);
        out << buf;
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace credassign
