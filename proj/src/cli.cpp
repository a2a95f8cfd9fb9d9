#include "credassign/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "credassign/analysis.hpp"
#include "credassign/checkpoint.hpp"
#include "credassign/errors.hpp"
#include "credassign/trainer.hpp"

namespace credassign {

namespace {

using json = nlohmann::json;

std::string resolve_data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("CREDASSIGN_DATA_DIR"); env && *env) return env;
    throw ConfigError("no data directory (use --data-dir or CREDASSIGN_DATA_DIR)");
}

void write_manifest(const std::string& out_dir, const std::string& command, json flags) {
    std::filesystem::create_directories(out_dir);
    json m;
    m["command"] = command;
    m["flags"] = std::move(flags);
    std::ofstream out(out_dir + "/manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_dir + "/manifest.json'");
    out << m.dump(2) << "\n";
}

json config_flags(const TrainConfig& c) {
    json f;
    f["method"] = rule_name(c.rule);
    f["lr"] = c.lr;
    if (rule_uses_b0(c.rule))
        f["sigma"] = c.sigma;
    else
        f["sigma"] = nullptr;
    f["weight_decay"] = c.weight_decay;
    f["epochs"] = c.epochs;
    f["batch_size"] = c.batch_size;
    f["seed"] = c.seed;
    f["data_dir"] = c.data_dir;
    f["out_dir"] = c.out_dir;
    f["subset"] = c.train_subset;
    f["probe_every"] = c.probe_every;
    return f;
}

std::string fmt_deg(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// Shared probe batch convention: the head of the validation split.
void probe_batch(const std::string& data_dir, int batch_size, Tensor& x,
                 std::vector<int>& labels) {
    const Dataset train_set = load_train_set(data_dir);
    const Split split = split_train_val(train_set.n, kValFraction, kSplitSeed);
    const int n = std::min<int>(batch_size, static_cast<int>(split.val.size()));
    if (n <= 0) throw ConfigError("validation split is empty");
    fill_eval_batch(train_set, split.val, 0, n, x, labels);
}

std::vector<int> split_indices(const Dataset& ds, const std::string& which,
                               const std::string& data_dir, Dataset& out_ds) {
    // returns evaluation indices and the dataset they refer to
    if (which == "test") {
        out_ds = ds;
        std::vector<int> idx(static_cast<std::size_t>(out_ds.n));
        for (int i = 0; i < out_ds.n; ++i) idx[static_cast<std::size_t>(i)] = i;
        return idx;
    }
    out_ds = load_train_set(data_dir);
    const Split split = split_train_val(out_ds.n, kValFraction, kSplitSeed);
    if (which == "val") return split.val;
    if (which == "train") return split.train;
    throw ConfigError("unknown split '" + which + "' (expected test|val|train)");
}

// ---- subcommands ----

int cmd_train(const TrainConfig& cfg_in, const std::string& data_dir_flag) {
    TrainConfig cfg = cfg_in;
    cfg.data_dir = resolve_data_dir(data_dir_flag);
    if (cfg.out_dir.empty()) throw ConfigError("train needs --out");
    write_manifest(cfg.out_dir, "train", config_flags(cfg));
    const TrainResult r = train(cfg);
    std::printf("best val accuracy %.4f at step %lld (%zu records)\n", r.best_val_acc,
                static_cast<long long>(r.best.step), r.records.size());
    if (r.diverged) {
        std::cerr << "error: loss diverged; best.ckpt holds the last good state\n";
        return 8;
    }
    return 0;
}

int cmd_grid(const std::string& method, TrainConfig base, const std::string& data_dir_flag,
             const std::string& out_dir, int jobs) {
    base.rule = rule_from_name(method);
    base.data_dir = resolve_data_dir(data_dir_flag);
    json flags = config_flags(base);
    flags.erase("lr");
    flags.erase("sigma");
    flags.erase("weight_decay");
    flags["jobs"] = jobs;
    flags["out_dir"] = out_dir;
    write_manifest(out_dir, "grid", flags);

    const GridResult g = grid_search(base.rule, base, jobs);
    write_grid_csv(out_dir + "/grid_results.csv", g);
    const GridEntry& top = g.ranked.front();
    if (rule_uses_b0(top.config.rule))
        std::printf("best: lr=%g sigma=%g val_acc=%.4f\n", top.config.lr, top.config.sigma,
                    top.val_acc);
    else
        std::printf("best: lr=%g weight_decay=%g val_acc=%.4f\n", top.config.lr,
                    top.config.weight_decay, top.val_acc);
    return 0;
}

int cmd_eval(const std::string& model, const std::string& data_dir_flag,
             const std::string& split, int batch_size, const std::string& out_dir) {
    const std::string data_dir = resolve_data_dir(data_dir_flag);
    write_manifest(out_dir, "eval",
                   {{"model", model}, {"data_dir", data_dir}, {"split", split},
                    {"batch_size", batch_size}, {"out_dir", out_dir}});
    const Checkpoint ck = load_checkpoint(model);
    Network net = ck.restore_network();

    Dataset ds;
    const std::vector<int> idx =
        split_indices(load_test_set(data_dir), split, data_dir, ds);
    const EvalResult r = evaluate(net, ds, idx, batch_size);

    std::ofstream pred(out_dir + "/predictions.csv", std::ios::trunc);
    if (!pred) throw IoError("cannot write '" + out_dir + "/predictions.csv'");
    pred << "sample_index,label,predicted,correct\n";
    for (std::size_t i = 0; i < idx.size(); ++i)
        pred << idx[i] << "," << r.labels[i] << "," << r.predictions[i] << ","
             << int(r.correct[i]) << "\n";

    json summary;
    summary["accuracy"] = r.accuracy;
    summary["n"] = static_cast<int>(idx.size());
    summary["split"] = split;
    std::ofstream js(out_dir + "/eval.json", std::ios::trunc);
    if (!js) throw IoError("cannot write '" + out_dir + "/eval.json'");
    js << summary.dump(2) << "\n";

    std::printf("%s accuracy %.4f over %zu samples\n", split.c_str(), r.accuracy, idx.size());
    return 0;
}

int cmd_angle(const std::string& model, const std::string& method,
              const std::string& data_dir_flag, int batch_size, const std::string& out_dir) {
    const std::string data_dir = resolve_data_dir(data_dir_flag);
    const Checkpoint ck = load_checkpoint(model);
    Network net = ck.restore_network();
    const FeedbackRule rule = method.empty() ? ck.config.rule : rule_from_name(method);
    write_manifest(out_dir, "angle",
                   {{"model", model}, {"method", rule_name(rule)}, {"data_dir", data_dir},
                    {"batch_size", batch_size}, {"out_dir", out_dir}});

    Tensor x;
    std::vector<int> labels;
    probe_batch(data_dir, batch_size, x, labels);
    const AngleReport rep = gradient_angle(net, x, labels, rule);

    std::ofstream out(out_dir + "/angle.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_dir + "/angle.csv'");
    out << "layer,angle_degrees\n";
    for (std::size_t i = 0; i < rep.layer.size(); ++i) {
        out << rep.layer[i] << "," << fmt_deg(rep.degrees[i]) << "\n";
        std::printf("%-8s %s\n", rep.layer[i].c_str(), fmt_deg(rep.degrees[i]).c_str());
    }
    return 0;
}

int cmd_sign(const std::string& model, const std::string& out_dir) {
    write_manifest(out_dir, "sign", {{"model", model}, {"out_dir", out_dir}});
    const Checkpoint ck = load_checkpoint(model);
    const Network net = ck.restore_network();
    const ConcordanceReport rep = sign_concordance_report(net);
    std::ofstream out(out_dir + "/sign.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_dir + "/sign.csv'");
    out << "layer,concordance\n";
    for (std::size_t i = 0; i < rep.layer.size(); ++i) {
        out << rep.layer[i] << "," << fmt_deg(rep.value[i]) << "\n";
        std::printf("%-8s %s\n", rep.layer[i].c_str(), fmt_deg(rep.value[i]).c_str());
    }
    return 0;
}

int cmd_cka(const std::string& model_a, const std::string& model_b,
            const std::string& subset_str, const std::string& data_dir_flag,
            const std::string& split, int max_samples, int batch_size,
            const std::string& out_dir) {
    const std::string data_dir = resolve_data_dir(data_dir_flag);
    const CkaSubset subset = subset_from_name(subset_str);
    write_manifest(out_dir, "cka",
                   {{"model_a", model_a}, {"model_b", model_b}, {"subset", subset_str},
                    {"data_dir", data_dir}, {"split", split}, {"max_samples", max_samples},
                    {"batch_size", batch_size}, {"out_dir", out_dir}});

    Network net_a = load_checkpoint(model_a).restore_network();
    Network net_b = load_checkpoint(model_b).restore_network();

    Dataset ds;
    const std::vector<int> idx =
        split_indices(load_test_set(data_dir), split, data_dir, ds);
    const EvalResult ea = evaluate(net_a, ds, idx, batch_size);
    const EvalResult eb = evaluate(net_b, ds, idx, batch_size);

    // pick the subset once, then dump only those rows for both models
    std::vector<int> chosen;
    int n_a = 0, n_b = 0, n_both = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const bool ca = ea.correct[i] != 0, cb = eb.correct[i] != 0;
        n_a += ca;
        n_b += cb;
        n_both += ca && cb;
        const bool keep = subset == CkaSubset::All ||
                          (subset == CkaSubset::BothCorrect && ca && cb) ||
                          (subset == CkaSubset::ACorrectBWrong && ca && !cb);
        if (keep) chosen.push_back(idx[i]);
    }
    if (static_cast<int>(chosen.size()) < 2)
        throw EmptySubsetError("subset '" + subset_str + "' has " +
                               std::to_string(chosen.size()) + " samples (n=" +
                               std::to_string(idx.size()) + ", a_correct=" +
                               std::to_string(n_a) + ", b_correct=" + std::to_string(n_b) +
                               ", both=" + std::to_string(n_both) + ")");
    if (max_samples > 0 && static_cast<int>(chosen.size()) > max_samples)
        chosen.resize(static_cast<std::size_t>(max_samples));

    const ActivationDump da = write_activation_dump(out_dir + "/dump_a.bin", model_a, net_a,
                                                    ds, chosen, batch_size);
    const ActivationDump db = write_activation_dump(out_dir + "/dump_b.bin", model_b, net_b,
                                                    ds, chosen, batch_size);
    const CKAMatrix m = cka_grid(da, db, subset);
    write_cka_csv(out_dir + "/cka_" + subset_str + ".csv", m);

    std::printf("cka over %d samples (%s)\n        ", m.samples, subset_str.c_str());
    for (const auto& b : m.layers_b) std::printf("%8s", b.c_str());
    std::printf("\n");
    for (std::size_t i = 0; i < m.layers_a.size(); ++i) {
        std::printf("%-8s", m.layers_a[i].c_str());
        for (std::size_t j = 0; j < m.layers_b.size(); ++j)
            std::printf("%8.3f", m.at(static_cast<int>(i), static_cast<int>(j)));
        std::printf("\n");
    }
    return 0;
}

int cmd_channels(const std::string& model, const std::string& class_str,
                 const std::string& layer, int top_k, const std::string& data_dir_flag,
                 int batch_size, const std::string& out_dir) {
    const std::string data_dir = resolve_data_dir(data_dir_flag);
    const int class_id = class_id_from_name(class_str);
    write_manifest(out_dir, "channels",
                   {{"model", model}, {"class", class_str}, {"layer", layer},
                    {"top_k", top_k}, {"data_dir", data_dir}, {"batch_size", batch_size},
                    {"out_dir", out_dir}});

    Network net = load_checkpoint(model).restore_network();
    const Dataset test = load_test_set(data_dir);
    const ChannelImportance ci = channel_importance(net, test, layer, class_id, batch_size);

    const std::string cls = kClassNames[static_cast<std::size_t>(class_id)];
    write_importance_csv(out_dir + "/importance_" + cls + "_" + layer + ".csv", ci);
    for (int r = 0; r < std::min<int>(top_k, static_cast<int>(ci.ranking.size())); ++r) {
        const int c = ci.ranking[static_cast<std::size_t>(r)];
        std::printf("#%d channel %d score %.6g\n", r + 1, c,
                    ci.score[static_cast<std::size_t>(c)]);
    }
    return 0;
}

int cmd_exemplars(const std::string& model, const std::string& layer, int channel, int k,
                  const std::string& data_dir_flag, int batch_size,
                  const std::string& out_dir) {
    const std::string data_dir = resolve_data_dir(data_dir_flag);
    write_manifest(out_dir, "exemplars",
                   {{"model", model}, {"layer", layer}, {"channel", channel}, {"k", k},
                    {"data_dir", data_dir}, {"batch_size", batch_size},
                    {"out_dir", out_dir}});

    Network net = load_checkpoint(model).restore_network();
    const Dataset test = load_test_set(data_dir);
    const std::vector<Exemplar> ex = top_exemplars(net, test, layer, channel, k, batch_size);

    std::vector<int> indices;
    for (const auto& e : ex) indices.push_back(e.sample_index);
    const std::string stem =
        out_dir + "/exemplars_" + layer + "_" + std::to_string(channel);
    write_ppm_montage(stem + ".ppm", test, indices);
    write_exemplars_json(stem + ".json", layer, channel, ex);
    for (std::size_t i = 0; i < ex.size(); ++i)
        std::printf("#%zu sample %d mean activation %.6g\n", i + 1, ex[i].sample_index,
                    static_cast<double>(ex[i].mean_activation));
    return 0;
}

int cmd_bench(int batch, int reps, std::uint64_t seed, const std::string& out_dir) {
    write_manifest(out_dir, "bench-backward",
                   {{"batch", batch}, {"reps", reps}, {"seed", seed}, {"out_dir", out_dir}});
    const BenchResult r = bench_backward(batch, reps, seed);
    std::ofstream out(out_dir + "/bench.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_dir + "/bench.csv'");
    out << "method,ms_per_backward,ratio_vs_bp\n";
    const double bp = r.ms_of("bp");
    char buf[96];
    for (const auto& [name, ms] : r.ms) {
        std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f\n", name.c_str(), ms, ms / bp);
        out << buf;
        std::printf("%-12s %8.2f ms  %.2fx\n", name.c_str(), ms, ms / bp);
    }
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"credit-assignment training and analysis toolkit"};
    app.require_subcommand(1);

    // train
    TrainConfig tc;
    std::string t_method, t_data;
    auto* train_cmd = app.add_subcommand("train", "train one model");
    train_cmd->add_option("--method", t_method, "bp|fa_random|fa_toeplitz|usf_init|usf_sn")
        ->required();
    train_cmd->add_option("--lr", tc.lr, "learning rate");
    train_cmd->add_option("--sigma", tc.sigma, "feedback init scale");
    train_cmd->add_option("--weight-decay", tc.weight_decay, "L2 coefficient");
    train_cmd->add_option("--epochs", tc.epochs, "training epochs");
    train_cmd->add_option("--batch-size", tc.batch_size, "batch size");
    train_cmd->add_option("--seed", tc.seed, "master seed");
    train_cmd->add_option("--data-dir", t_data, "dataset directory");
    train_cmd->add_option("--out", tc.out_dir, "output directory")->required();
    train_cmd->add_option("--subset", tc.train_subset, "cap on training samples (0 = all)");
    train_cmd->add_option("--probe-every", tc.probe_every, "steps between metric probes");

    // grid
    TrainConfig gc;
    gc.epochs = 3;
    std::string g_method, g_data, g_out;
    int g_jobs = 1;
    auto* grid_cmd = app.add_subcommand("grid", "hyperparameter grid probe");
    grid_cmd->add_option("--method", g_method, "rule to tune")->required();
    grid_cmd->add_option("--epochs", gc.epochs, "epochs per probe");
    grid_cmd->add_option("--batch-size", gc.batch_size, "batch size");
    grid_cmd->add_option("--seed", gc.seed, "master seed");
    grid_cmd->add_option("--data-dir", g_data, "dataset directory");
    grid_cmd->add_option("--out", g_out, "output directory")->required();
    grid_cmd->add_option("--subset", gc.train_subset, "cap on training samples (0 = all)");
    grid_cmd->add_option("--jobs", g_jobs, "parallel probes");

    // eval
    std::string e_model, e_data, e_split = "test", e_out;
    int e_bs = 128;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--model", e_model, "checkpoint path")->required();
    eval_cmd->add_option("--data-dir", e_data, "dataset directory");
    eval_cmd->add_option("--split", e_split, "test|val|train");
    eval_cmd->add_option("--batch-size", e_bs, "batch size");
    eval_cmd->add_option("--out", e_out, "output directory")->required();

    // angle
    std::string a_model, a_method, a_data, a_out;
    int a_bs = 128;
    auto* angle_cmd = app.add_subcommand("angle", "error-signal angles vs the true gradient");
    angle_cmd->add_option("--model", a_model, "checkpoint path")->required();
    angle_cmd->add_option("--method", a_method, "rule to probe (default: checkpoint's)");
    angle_cmd->add_option("--data-dir", a_data, "dataset directory");
    angle_cmd->add_option("--batch-size", a_bs, "probe batch size");
    angle_cmd->add_option("--out", a_out, "output directory")->required();

    // sign
    std::string s_model, s_out;
    auto* sign_cmd = app.add_subcommand("sign", "weight/feedback sign concordance");
    sign_cmd->add_option("--model", s_model, "checkpoint path")->required();
    sign_cmd->add_option("--out", s_out, "output directory")->required();

    // cka
    std::string c_a, c_b, c_subset = "all", c_data, c_split = "test", c_out;
    int c_max = 2000, c_bs = 128;
    auto* cka_cmd = app.add_subcommand("cka", "layer-by-layer representation similarity");
    cka_cmd->add_option("--model-a", c_a, "first checkpoint")->required();
    cka_cmd->add_option("--model-b", c_b, "second checkpoint")->required();
    cka_cmd->add_option("--subset", c_subset, "all|both_correct|a_correct_b_wrong");
    cka_cmd->add_option("--data-dir", c_data, "dataset directory");
    cka_cmd->add_option("--split", c_split, "test|val|train");
    cka_cmd->add_option("--max-samples", c_max, "subset cap (0 = no cap)");
    cka_cmd->add_option("--batch-size", c_bs, "batch size");
    cka_cmd->add_option("--out", c_out, "output directory")->required();

    // channels
    std::string ch_model, ch_class, ch_layer, ch_data, ch_out;
    int ch_topk = 3, ch_bs = 128;
    auto* ch_cmd = app.add_subcommand("channels", "class-conditioned channel importance");
    ch_cmd->add_option("--model", ch_model, "checkpoint path")->required();
    ch_cmd->add_option("--class", ch_class, "class name or id")->required();
    ch_cmd->add_option("--layer", ch_layer, "conv layer name")->required();
    ch_cmd->add_option("--top-k", ch_topk, "channels to print");
    ch_cmd->add_option("--data-dir", ch_data, "dataset directory");
    ch_cmd->add_option("--batch-size", ch_bs, "batch size");
    ch_cmd->add_option("--out", ch_out, "output directory")->required();

    // exemplars
    std::string x_model, x_layer, x_data, x_out;
    int x_channel = 0, x_k = 9, x_bs = 128;
    auto* ex_cmd = app.add_subcommand("exemplars", "top-activating images for a channel");
    ex_cmd->add_option("--model", x_model, "checkpoint path")->required();
    ex_cmd->add_option("--layer", x_layer, "layer name")->required();
    ex_cmd->add_option("--channel", x_channel, "channel index")->required();
    ex_cmd->add_option("--k", x_k, "images to keep");
    ex_cmd->add_option("--data-dir", x_data, "dataset directory");
    ex_cmd->add_option("--batch-size", x_bs, "batch size");
    ex_cmd->add_option("--out", x_out, "output directory")->required();

    // bench-backward
    int b_batch = 128, b_reps = 5;
    std::uint64_t b_seed = 42;
    std::string b_out;
    auto* bench_cmd = app.add_subcommand("bench-backward", "time backward passes per rule");
    bench_cmd->add_option("--batch", b_batch, "batch size");
    bench_cmd->add_option("--reps", b_reps, "timed repetitions");
    bench_cmd->add_option("--seed", b_seed, "seed");
    bench_cmd->add_option("--out", b_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) {
            tc.rule = rule_from_name(t_method);
            return cmd_train(tc, t_data);
        }
        if (grid_cmd->parsed()) return cmd_grid(g_method, gc, g_data, g_out, g_jobs);
        if (eval_cmd->parsed()) return cmd_eval(e_model, e_data, e_split, e_bs, e_out);
        if (angle_cmd->parsed()) return cmd_angle(a_model, a_method, a_data, a_bs, a_out);
        if (sign_cmd->parsed()) return cmd_sign(s_model, s_out);
        if (cka_cmd->parsed())
            return cmd_cka(c_a, c_b, c_subset, c_data, c_split, c_max, c_bs, c_out);
        if (ch_cmd->parsed())
            return cmd_channels(ch_model, ch_class, ch_layer, ch_topk, ch_data, ch_bs, ch_out);
        if (ex_cmd->parsed())
            return cmd_exemplars(x_model, x_layer, x_channel, x_k, x_data, x_bs, x_out);
        if (bench_cmd->parsed()) return cmd_bench(b_batch, b_reps, b_seed, b_out);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const EmptySubsetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 7;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 7;
    } catch (const StateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 7;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 8;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("credassign");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

} // namespace credassign
