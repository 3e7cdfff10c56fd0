#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wmrb/data.hpp"
#include "wmrb/errors.hpp"
#include "wmrb/estimator_lab.hpp"
#include "wmrb/eval.hpp"
#include "wmrb/model.hpp"
#include "wmrb/trainer.hpp"

namespace {

using nlohmann::json;

// Everything a run can configure. A config file fills these first; command
// line flags override individual fields afterwards.
struct RunConfig {
    std::string manifest;
    wmrb::TrainConfig train;
    std::vector<uint32_t> k = {5, 30};
    std::string model;       // evaluate: model to load
    std::string model_out;   // train: where the model goes
    std::string report_out;  // train: report file (default: stdout)
};

std::string resolve_against(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (base / fp).lexically_normal().string();
}

wmrb::OwaKind parse_owa_kind(const std::string& name) {
    if (name == "harmonic") return wmrb::OwaKind::harmonic;
    if (name == "top1") return wmrb::OwaKind::top1;
    if (name == "uniform") return wmrb::OwaKind::uniform;
    throw wmrb::ConfigError("unknown owa weighting '" + name +
                            "' (valid: harmonic, top1, uniform)");
}

int64_t config_int(const json& j, const char* key, int64_t lo, int64_t hi) {
    if (!j.is_number_integer())
        throw wmrb::ConfigError(std::string("config key '") + key + "' must be an integer");
    auto v = j.get<int64_t>();
    if (v < lo || v > hi)
        throw wmrb::ConfigError(std::string("config key '") + key + "' out of range");
    return v;
}

double config_num(const json& j, const char* key) {
    if (!j.is_number())
        throw wmrb::ConfigError(std::string("config key '") + key + "' must be a number");
    return j.get<double>();
}

std::string config_str(const json& j, const char* key) {
    if (!j.is_string())
        throw wmrb::ConfigError(std::string("config key '") + key + "' must be a string");
    return j.get<std::string>();
}

void apply_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw wmrb::ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw wmrb::ConfigError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw wmrb::ConfigError("config " + path + ": not a JSON object");

    auto base = std::filesystem::path(path).parent_path();
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        if (key == "manifest") rc.manifest = resolve_against(base, config_str(v, "manifest"));
        else if (key == "loss") rc.train.loss = wmrb::parse_loss_kind(config_str(v, "loss"));
        else if (key == "dim") rc.train.dim = uint32_t(config_int(v, "dim", 1, 1 << 20));
        else if (key == "epochs") rc.train.epochs = uint32_t(config_int(v, "epochs", 1, 1 << 20));
        else if (key == "lr") rc.train.learning_rate = config_num(v, "lr");
        else if (key == "l2") rc.train.l2 = config_num(v, "l2");
        else if (key == "batch_size")
            rc.train.batch_size = uint32_t(config_int(v, "batch_size", 1, INT32_MAX));
        else if (key == "candidates")
            rc.train.candidate_count = uint32_t(config_int(v, "candidates", 0, INT32_MAX));
        else if (key == "seed") rc.train.seed = uint64_t(config_int(v, "seed", 0, INT64_MAX));
        else if (key == "adagrad_eps") rc.train.adagrad_epsilon = config_num(v, "adagrad_eps");
        else if (key == "init_scale") rc.train.init_scale = config_num(v, "init_scale");
        else if (key == "max_trials")
            rc.train.max_trials = uint32_t(config_int(v, "max_trials", 0, INT32_MAX));
        else if (key == "owa") rc.train.owa = parse_owa_kind(config_str(v, "owa"));
        else if (key == "freeze_biases") {
            if (!v.is_boolean())
                throw wmrb::ConfigError("config key 'freeze_biases' must be a boolean");
            rc.train.freeze_biases = v.get<bool>();
        } else if (key == "threads")
            rc.train.threads = uint32_t(config_int(v, "threads", 1, 4096));
        else if (key == "k") {
            if (!v.is_array() || v.empty())
                throw wmrb::ConfigError("config key 'k' must be a non-empty array");
            rc.k.clear();
            for (const json& e : v) rc.k.push_back(uint32_t(config_int(e, "k", 1, INT32_MAX)));
        } else if (key == "model") rc.model = resolve_against(base, config_str(v, "model"));
        else if (key == "model_out")
            rc.model_out = resolve_against(base, config_str(v, "model_out"));
        else if (key == "report_out")
            rc.report_out = resolve_against(base, config_str(v, "report_out"));
        else throw wmrb::ConfigError("config " + path + ": unknown key '" + key + "'");
    }
}

// Interactions plus feature matrices, ready for training or evaluation.
struct LoadedData {
    wmrb::InteractionDataset dataset;
    wmrb::FeatureMatrix user_features;
    wmrb::FeatureMatrix item_features;
};

LoadedData load_data(const std::string& manifest_path) {
    if (manifest_path.empty())
        throw wmrb::ConfigError("a dataset manifest is required (config key 'manifest')");
    wmrb::DatasetManifest manifest = wmrb::load_manifest(manifest_path);
    LoadedData data;
    data.dataset = wmrb::load_interactions(manifest.interactions, manifest);
    if (manifest.test_fraction > 0.0)
        data.dataset =
            wmrb::split_interactions(data.dataset, manifest.test_fraction, manifest.seed);
    data.user_features = manifest.user_features.empty()
                             ? wmrb::FeatureMatrix::identity(manifest.num_users)
                             : wmrb::load_features(manifest.user_features, manifest.num_users);
    data.item_features = manifest.item_features.empty()
                             ? wmrb::FeatureMatrix::identity(manifest.num_items)
                             : wmrb::load_features(manifest.item_features, manifest.num_items);
    return data;
}

void emit_artifact(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw wmrb::ConfigError("cannot write output file: " + out_path);
    out << text;
    if (!out) throw wmrb::ConfigError("write failed: " + out_path);
}

int cmd_train(const RunConfig& rc, const std::string& out_flag) {
    std::string model_path = out_flag.empty() ? rc.model_out : out_flag;
    if (model_path.empty())
        throw wmrb::ConfigError("train needs a model output path (--out or config 'model_out')");

    LoadedData data = load_data(rc.manifest);
    wmrb::TrainResult result =
        wmrb::train(data.dataset, data.user_features, data.item_features, rc.train);
    wmrb::save_model(result.params, model_path);
    emit_artifact(result.report.to_json().dump(2) + "\n", rc.report_out);
    return 0;
}

int cmd_evaluate(const RunConfig& rc, const std::string& model_flag,
                 const std::string& baseline, bool percent, const std::string& out_flag) {
    LoadedData data = load_data(rc.manifest);

    std::unique_ptr<wmrb::ItemScorer> scorer;
    wmrb::ModelParams params;
    if (!baseline.empty()) {
        if (baseline != "pop")
            throw wmrb::ConfigError("unknown baseline '" + baseline + "' (valid: pop)");
        scorer = std::make_unique<wmrb::PopularityScorer>(data.dataset);
    } else {
        std::string model_path = model_flag.empty() ? rc.model : model_flag;
        if (model_path.empty())
            throw wmrb::ConfigError("evaluate needs --model, config 'model', or --baseline pop");
        params = wmrb::load_model(model_path);
        wmrb::validate_shape(params, params.dim, data.user_features.num_features,
                             data.item_features.num_features);
        scorer = std::make_unique<wmrb::ModelScorer>(params, data.user_features,
                                                     data.item_features);
    }

    wmrb::MetricsReport report =
        wmrb::evaluate(*scorer, data.dataset, rc.k, rc.train.threads);
    emit_artifact(report.to_json(percent).dump(2) + "\n", out_flag);
    return 0;
}

int cmd_popularity(const RunConfig& rc, const std::string& out_flag) {
    LoadedData data = load_data(rc.manifest);
    std::vector<uint32_t> ranking = wmrb::popularity_ranking(data.dataset);
    uint32_t cut = rc.k.empty() ? 0 : *std::max_element(rc.k.begin(), rc.k.end());
    if (cut > 0 && cut < ranking.size()) ranking.resize(cut);
    json j;
    j["ranking"] = ranking;
    emit_artifact(j.dump(2) + "\n", out_flag);
    return 0;
}

int cmd_simulate(const wmrb::SimulateOptions& options, const std::string& out_flag) {
    wmrb::EstimatorStats stats = wmrb::simulate_estimators(options);
    emit_artifact(stats.to_csv(), out_flag);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wmrb: margin-rank batch training for implicit-feedback ranking"};
    app.require_subcommand(1);

    std::string config_path, loss_flag, out_flag, model_flag, baseline, owa_flag;
    uint32_t dim = 0, epochs = 0, batch_size = 0, candidates = 0, threads = 0;
    double lr = 0.0;
    uint64_t seed = 0;
    bool percent = false, hinge = false;
    std::vector<uint32_t> k_flag;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration file");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--threads", threads, "worker thread count");
        sub->add_option("--out", out_flag, "output path (default: stdout artifacts)");
    };

    CLI::App* train = app.add_subcommand("train", "fit a ranking model");
    add_common(train);
    train->add_option("--loss", loss_flag, "warp | wmrb | ce");
    train->add_option("--dim", dim, "embedding dimension");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--batch-size", batch_size, "pairs per batch");
    train->add_option("--candidates", candidates, "sampled candidate set size");

    CLI::App* evaluate = app.add_subcommand("evaluate", "rank and score held-out items");
    add_common(evaluate);
    evaluate->add_option("--model", model_flag, "model file to evaluate");
    evaluate->add_option("--k", k_flag, "cutoffs, e.g. 5,30")->delimiter(',');
    evaluate->add_option("--baseline", baseline, "evaluate a baseline instead (pop)");
    evaluate->add_flag("--percent", percent, "report metrics x100");

    CLI::App* popularity = app.add_subcommand("popularity", "item ranking by train count");
    add_common(popularity);
    popularity->add_option("--k", k_flag, "truncate the ranking")->delimiter(',');

    CLI::App* simulate = app.add_subcommand("simulate", "rank-estimator bias/variance table");
    add_common(simulate);
    wmrb::SimulateOptions sim;
    simulate->add_option("--item-set-size", sim.item_set_size, "catalog size N");
    simulate->add_option("--q", sim.q_list, "candidate fractions, e.g. 0.001,0.01,0.1")
        ->delimiter(',');
    simulate->add_option("--trials", sim.trials, "Monte Carlo draws (0: closed forms only)");
    simulate->add_flag("--hinge", hinge, "append hinge-magnitude sensitivity columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        auto given = [&](const std::string& name) {
            const CLI::Option* opt = active->get_option_no_throw(name);
            return opt != nullptr && opt->count() > 0;
        };

        RunConfig rc;
        if (!config_path.empty()) apply_config_file(rc, config_path);

        // flags win over config values
        if (given("--loss")) rc.train.loss = wmrb::parse_loss_kind(loss_flag);
        if (given("--dim")) rc.train.dim = dim;
        if (given("--epochs")) rc.train.epochs = epochs;
        if (given("--lr")) rc.train.learning_rate = lr;
        if (given("--batch-size")) rc.train.batch_size = batch_size;
        if (given("--candidates")) rc.train.candidate_count = candidates;
        if (given("--seed")) rc.train.seed = seed;
        if (given("--threads")) rc.train.threads = threads;
        if (!k_flag.empty()) rc.k = k_flag;

        if (train->parsed()) return cmd_train(rc, out_flag);
        if (evaluate->parsed()) return cmd_evaluate(rc, model_flag, baseline, percent, out_flag);
        if (popularity->parsed()) return cmd_popularity(rc, out_flag);
        if (simulate->parsed()) {
            sim.include_hinge = hinge;
            if (given("--seed")) sim.seed = seed;
            if (given("--threads")) sim.threads = threads;
            return cmd_simulate(sim, out_flag);
        }
        return 1;
    } catch (const wmrb::DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const wmrb::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const wmrb::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
