#pragma once
// Command-line front end: train, eval, bench, sweep and export.
//
// Precedence is defaults < --config file (JSON) < explicit flags. Every
// command writes the resolved configuration to <out>/run_config.json.
//
// Exit codes: 0 success, 2 usage, 3 data, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kge/checkpoint.hpp"
#include "kge/data.hpp"
#include "kge/error.hpp"
#include "kge/eval.hpp"
#include "kge/models.hpp"
#include "kge/sweep.hpp"
#include "kge/training.hpp"

namespace kge::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

inline constexpr const char* kDataRootEnv = "KGE_DATA_ROOT";

struct RunConfig {
    std::string command;
    std::string dataset;
    std::string model = "rot2l";
    std::size_t dim = 32;
    double lr = 0.001;
    std::size_t batch = 500;
    std::size_t neg = 50;
    double gamma = 0.5;
    double adv_temp = 1.0;
    std::size_t epochs = 500;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool reciprocal = true;
    std::string alpha_mode = "shared-vector";
    std::string distance = "phi";
    std::size_t patience = 10;
    std::size_t eval_every = 5;
    std::string out = "out";
    std::string checkpoint;
    std::vector<std::string> models = {"rote", "roth", "rotl", "rot2l"};
    std::vector<std::size_t> dims = {8, 16, 32, 64, 128};
    bool f32 = false;
};

inline nlohmann::json to_json(const RunConfig& c) {
    return {{"command", c.command},   {"dataset", c.dataset},       {"model", c.model},
            {"dim", c.dim},           {"lr", c.lr},                 {"batch", c.batch},
            {"neg", c.neg},           {"gamma", c.gamma},           {"adv_temp", c.adv_temp},
            {"epochs", c.epochs},     {"seed", c.seed},             {"threads", c.threads},
            {"reciprocal", c.reciprocal}, {"alpha_mode", c.alpha_mode}, {"distance", c.distance},
            {"patience", c.patience}, {"eval_every", c.eval_every}, {"out", c.out},
            {"checkpoint", c.checkpoint}, {"models", c.models},     {"dims", c.dims},
            {"f32", c.f32}};
}

/// Applies the keys present in `j` onto `c`; unknown keys are a usage error.
inline void apply_json(const nlohmann::json& j, RunConfig& c) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "command") continue;
        else if (k == "dataset") c.dataset = v.get<std::string>();
        else if (k == "model") c.model = v.get<std::string>();
        else if (k == "dim") c.dim = v.get<std::size_t>();
        else if (k == "lr") c.lr = v.get<double>();
        else if (k == "batch") c.batch = v.get<std::size_t>();
        else if (k == "neg") c.neg = v.get<std::size_t>();
        else if (k == "gamma") c.gamma = v.get<double>();
        else if (k == "adv_temp") c.adv_temp = v.get<double>();
        else if (k == "epochs") c.epochs = v.get<std::size_t>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else if (k == "threads") c.threads = v.get<std::size_t>();
        else if (k == "reciprocal") c.reciprocal = v.is_boolean() ? v.get<bool>() : v.get<std::string>() == "on";
        else if (k == "alpha_mode") c.alpha_mode = v.get<std::string>();
        else if (k == "distance") c.distance = v.get<std::string>();
        else if (k == "patience") c.patience = v.get<std::size_t>();
        else if (k == "eval_every") c.eval_every = v.get<std::size_t>();
        else if (k == "out") c.out = v.get<std::string>();
        else if (k == "checkpoint") c.checkpoint = v.get<std::string>();
        else if (k == "models") c.models = v.get<std::vector<std::string>>();
        else if (k == "dims") c.dims = v.get<std::vector<std::size_t>>();
        else if (k == "f32") c.f32 = v.get<bool>();
        else throw InputError("unknown config key '" + k + "'");
    }
}

inline ModelConfig model_config(const RunConfig& c, const Dictionary& dict) {
    ModelConfig mc;
    mc.kind = parse_model_kind(c.model);
    mc.dim = c.dim;
    mc.n_entities = dict.n_entities();
    mc.n_relations = dict.n_relations();
    mc.gamma = c.gamma;
    mc.alpha_mode = parse_alpha_mode(c.alpha_mode);
    mc.distance = parse_distance_kind(c.distance);
    return mc;
}

inline TrainConfig train_config(const RunConfig& c) {
    TrainConfig tc;
    tc.lr = c.lr;
    tc.batch_size = c.batch;
    tc.negatives = c.neg;
    tc.epochs = c.epochs;
    tc.adv_temperature = c.adv_temp;
    tc.seed = c.seed;
    tc.patience = c.patience;
    tc.eval_every = c.eval_every;
    tc.threads = c.threads;
    return tc;
}

/// Checks everything that can be checked before touching the filesystem.
inline void validate(const RunConfig& c) {
    if (c.dim == 0 || c.dim % 2 != 0) throw InputError("dimension must be even");
    for (std::size_t d : c.dims)
        if (d == 0 || d % 2 != 0) throw InputError("dimension must be even");
    parse_model_kind(c.model);
    for (const auto& m : c.models) parse_model_kind(m);
    parse_alpha_mode(c.alpha_mode);
    parse_distance_kind(c.distance);
    if (c.batch == 0) throw InputError("--batch must be at least 1");
    if (c.neg == 0) throw InputError("--neg must be at least 1");
    if (!(c.adv_temp > 0.0)) throw InputError("--adv-temp must be positive");
    if (c.threads == 0) throw InputError("--threads must be at least 1");
}

/// Resolves a dataset argument, falling back to $KGE_DATA_ROOT for relative paths.
inline std::filesystem::path resolve_dataset(const std::string& arg) {
    namespace fs = std::filesystem;
    if (arg.empty()) {
        if (const char* root = std::getenv(kDataRootEnv)) return root;
        throw InputError("--dataset is required");
    }
    fs::path p(arg);
    if (fs::exists(p) || p.is_absolute()) return p;
    if (const char* root = std::getenv(kDataRootEnv)) {
        const fs::path alt = fs::path(root) / p;
        if (fs::exists(alt)) return alt;
    }
    return p;
}

inline void write_run_config(const RunConfig& c) {
    std::filesystem::create_directories(c.out);
    std::ofstream(std::filesystem::path(c.out) / "run_config.json") << to_json(c).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// commands

inline int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Dataset ds = load_dataset(resolve_dataset(c.dataset), c.reciprocal);
    const ModelConfig mc = model_config(c, ds.dict);
    const TrainConfig tc = train_config(c);
    for (const auto& w : grid_warnings(tc, mc)) err << "warning: " << w << '\n';
    write_run_config(c);

    const std::filesystem::path dir(c.out);
    std::ofstream progress(dir / "train_progress.jsonl");
    auto res = train(Model(mc, c.seed), ds, tc, &progress);
    {
        std::ofstream log(dir / "train_log.jsonl");
        write_train_log(res.log, log);
    }
    save_checkpoint(res.model, checkpoint_info(res.model, ds.dict, c.seed), dir / "checkpoint", &ds.dict);
    for (const auto& e : res.log.epochs)
        if (!std::isfinite(e.loss)) throw NumericError("training loss became non-finite");
    out << "trained " << c.model << " for " << res.log.epochs.size() << " epochs";
    if (res.log.best_epoch) out << ", best validation MRR " << res.log.best_val_mrr << " at epoch " << *res.log.best_epoch;
    out << "\ncheckpoint: " << (dir / "checkpoint").string() << '\n';
    return kOk;
}

inline int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream&) {
    const Dataset ds = load_dataset(resolve_dataset(c.dataset), c.reciprocal);
    Model model;
    if (c.checkpoint.empty()) {
        model = Model(model_config(c, ds.dict), c.seed);
    } else {
        auto loaded = load_checkpoint(c.checkpoint);
        check_compatible(loaded.info, ds.dict);
        model = std::move(loaded.model);
    }
    write_run_config(c);
    const auto rep = evaluate(model, ds, {Split::Test, true, c.threads});
    write_report(rep, c.out);
    std::ifstream table(std::filesystem::path(c.out) / "report.txt");
    out << table.rdbuf();
    return kOk;
}

inline int cmd_bench(const RunConfig& c, std::ostream& out, std::ostream&) {
    const Dataset ds = load_dataset(resolve_dataset(c.dataset), c.reciprocal);
    std::vector<ModelKind> kinds;
    for (const auto& m : c.models) kinds.push_back(parse_model_kind(m));
    write_run_config(c);
    const auto rows = benchmark_epoch_time(kinds, ds, model_config(c, ds.dict), train_config(c), &out);
    std::ofstream csv(std::filesystem::path(c.out) / "bench.csv");
    csv << "model,median_seconds,ratio_to_roth,epoch_seconds\n";
    out << "model   s/epoch   ratio vs roth\n";
    for (const auto& r : rows) {
        csv << to_string(r.kind) << ',' << r.median_seconds << ',' << r.ratio_to_roth << ',';
        for (std::size_t i = 0; i < r.epoch_seconds.size(); ++i) csv << (i ? ";" : "") << r.epoch_seconds[i];
        csv << '\n';
        char line[96];
        std::snprintf(line, sizeof line, "%-7s %9.3f %9.3f\n", std::string(to_string(r.kind)).c_str(),
                      r.median_seconds, r.ratio_to_roth);
        out << line;
    }
    return kOk;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream&) {
    const Dataset ds = load_dataset(resolve_dataset(c.dataset), c.reciprocal);
    std::vector<ModelKind> kinds;
    for (const auto& m : c.models) kinds.push_back(parse_model_kind(m));
    write_run_config(c);
    const auto rows = dimension_sweep(kinds, c.dims, ds, model_config(c, ds.dict), train_config(c), &out);
    std::ofstream csv(std::filesystem::path(c.out) / "sweep.csv");
    write_sweep_csv(rows, csv);
    return kOk;
}

inline int cmd_export(const RunConfig& c, std::ostream& out, std::ostream&) {
    if (c.checkpoint.empty()) throw InputError("export needs --checkpoint DIR");
    auto loaded = load_checkpoint(c.checkpoint);
    write_run_config(c);
    save_checkpoint(loaded.model, loaded.info, c.out, nullptr, c.f32);
    for (const char* dict : {"entities.dict", "relations.dict"}) {
        const auto src = std::filesystem::path(c.checkpoint) / dict;
        if (std::filesystem::exists(src))
            std::filesystem::copy_file(src, std::filesystem::path(c.out) / dict,
                                       std::filesystem::copy_options::overwrite_existing);
    }
    out << "exported " << loaded.model.params().count() << " tensors to " << c.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Rotation-based knowledge graph embeddings (RotE, RotH, RotL, Rot2L)", "kge"};
    app.require_subcommand(1);

    std::optional<std::string> config_file, dataset, model, reciprocal, alpha_mode, distance, out_dir, checkpoint;
    std::optional<std::size_t> dim, batch, neg, epochs, threads, patience, eval_every;
    std::optional<double> lr, gamma, adv_temp;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::string>> models;
    std::optional<std::vector<std::size_t>> dims;
    bool f32 = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON file with default settings (flags override it)");
        sub->add_option("--dataset", dataset, "directory with train.txt, valid.txt, test.txt");
        sub->add_option("--model", model, "rote | roth | rotl | rot2l");
        sub->add_option("--dim", dim, "embedding dimension (even)");
        sub->add_option("--lr", lr, "Adam learning rate");
        sub->add_option("--batch", batch, "positive triples per batch");
        sub->add_option("--neg", neg, "negative samples per positive");
        sub->add_option("--gamma", gamma, "Rot2L mid-layer balance");
        sub->add_option("--adv-temp", adv_temp, "self-adversarial softmax temperature");
        sub->add_option("--epochs", epochs, "maximum epochs");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--threads", threads, "worker thread budget");
        sub->add_option("--reciprocal", reciprocal, "on | off")->check(CLI::IsMember({"on", "off"}));
        sub->add_option("--alpha-mode", alpha_mode, "shared-vector | per-relation-scalar");
        sub->add_option("--distance", distance, "phi | squared (RotL/Rot2L distance non-linearity)");
        sub->add_option("--patience", patience, "validations without improvement before stopping");
        sub->add_option("--eval-every", eval_every, "epochs between validations (0 disables)");
        sub->add_option("--out", out_dir, "output directory");
    };

    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint and log");
    auto* eval_cmd = app.add_subcommand("eval", "filtered link-prediction evaluation on the test split");
    auto* bench_cmd = app.add_subcommand("bench", "median seconds per training epoch for several models");
    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate over embedding dimensions");
    auto* export_cmd = app.add_subcommand("export", "write flat embedding arrays and a manifest");
    for (auto* sub : {train_cmd, eval_cmd, bench_cmd, sweep_cmd, export_cmd}) common(sub);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory (random init when omitted)");
    export_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    export_cmd->add_flag("--f32", f32, "write single-precision arrays");
    bench_cmd->add_option("--models", models, "model kinds to time")->delimiter(',');
    sweep_cmd->add_option("--models", models, "model kinds to train")->delimiter(',');
    sweep_cmd->add_option("--dims", dims, "embedding dimensions")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    RunConfig c;
    for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
    if (c.command == "bench") c.epochs = 5;
    try {
        if (config_file) {
            std::ifstream in(*config_file);
            if (!in) throw InputError("cannot read config file " + *config_file);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw InputError("config file: " + std::string(e.what()));
            }
            apply_json(j, c);
        }
        if (dataset) c.dataset = *dataset;
        if (model) c.model = *model;
        if (dim) c.dim = *dim;
        if (lr) c.lr = *lr;
        if (batch) c.batch = *batch;
        if (neg) c.neg = *neg;
        if (gamma) c.gamma = *gamma;
        if (adv_temp) c.adv_temp = *adv_temp;
        if (epochs) c.epochs = *epochs;
        if (seed) c.seed = *seed;
        if (threads) c.threads = *threads;
        if (reciprocal) c.reciprocal = *reciprocal == "on";
        if (alpha_mode) c.alpha_mode = *alpha_mode;
        if (distance) c.distance = *distance;
        if (patience) c.patience = *patience;
        if (eval_every) c.eval_every = *eval_every;
        if (out_dir) c.out = *out_dir;
        if (checkpoint) c.checkpoint = *checkpoint;
        if (models) c.models = *models;
        if (dims) c.dims = *dims;
        if (f32) c.f32 = true;
        validate(c);

        if (c.command == "train") return cmd_train(c, out, err);
        if (c.command == "eval") return cmd_eval(c, out, err);
        if (c.command == "bench") return cmd_bench(c, out, err);
        if (c.command == "sweep") return cmd_sweep(c, out, err);
        return cmd_export(c, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kNumeric;
    } catch (const nlohmann::json::exception& e) {
        err << "error: config: " << e.what() << '\n';
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
}

}  // namespace kge::cli
