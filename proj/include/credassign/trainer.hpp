#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "credassign/checkpoint.hpp"
#include "credassign/data.hpp"

namespace credassign {

// The train/val split is a property of the dataset layout, not of a run, so
// its seed is fixed: every run sees the same 90/10 partition.
inline constexpr std::uint64_t kSplitSeed = 42;
inline constexpr double kValFraction = 0.1;

struct RunRecord {
    std::int64_t step = 0;
    int epoch = 0;
    double train_loss = 0.0; // mean over the window since the last record
    double train_acc = 0.0;
    double val_acc = 0.0;            // last known; NaN before the first eval
    std::vector<double> angle;       // per weighted layer, degrees (probe batch)
    std::vector<double> concordance; // per weighted layer; NaN where undefined
};

struct TrainResult {
    Checkpoint best;
    std::vector<RunRecord> records;
    std::vector<std::string> layer_names; // column labels for the csv
    double best_val_acc = 0.0;
    bool diverged = false; // loss went non-finite; best holds the last good state
};

/// Full training run per the config: shuffled augmented batches, per-epoch
/// validation, best-val checkpoint retention, probe records every
/// cfg.probe_every steps plus one at every epoch end. When cfg.out_dir is
/// set, writes metrics.csv and best.ckpt there.
TrainResult train(const TrainConfig& cfg);

/// Same, against a pre-loaded training set (grid search shares one copy).
TrainResult train_on(const TrainConfig& cfg, const Dataset& train_set);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::uint8_t> correct;
    std::vector<int> predictions;
    std::vector<int> labels;
    Tensor logits; // [n, classes]
};

/// Deterministic center-crop evaluation over ds records idx.
EvalResult evaluate(Network& net, const Dataset& ds, const std::vector<int>& indices,
                    int batch_size);

struct GridEntry {
    TrainConfig config;
    double val_acc = 0.0;
    bool diverged = false;
};

struct GridResult {
    std::vector<GridEntry> ranked; // descending val accuracy, stable in grid order
    TrainConfig best;
};

/// The per-rule hyperparameter grid, probe-ready: every entry copies base
/// and overrides lr / sigma / weight_decay.
std::vector<TrainConfig> grid_configs(FeedbackRule rule, const TrainConfig& base);

/// Exhaustive probe of the rule's grid (base.epochs epochs per probe). Ties
/// resolve to the earliest grid entry. jobs > 1 runs probes on threads;
/// results are independent of scheduling.
GridResult grid_search(FeedbackRule rule, const TrainConfig& base, int jobs = 1);

struct BenchResult {
    int batch = 0;
    int reps = 0;
    std::vector<std::pair<std::string, double>> ms; // rule name -> ms per backward
    double ms_of(const std::string& rule) const;
};

/// Times backward passes per rule on the reference architecture (one shared
/// forward; best of reps). Forward time is excluded by construction.
BenchResult bench_backward(int batch, int reps, std::uint64_t seed);

void write_metrics_csv(const std::string& path, const std::vector<std::string>& layer_names,
                       const std::vector<RunRecord>& records);
void write_grid_csv(const std::string& path, const GridResult& grid);

} // namespace credassign
