#include "rtsf/cli/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rtsf/data/datasets.hpp"
#include "rtsf/data/metrics.hpp"
#include "rtsf/model/network.hpp"
#include "rtsf/nn/gradcheck.hpp"
#include "rtsf/train/trainer.hpp"
#include "rtsf/tsf/engine.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rtsf::cli {

namespace {

struct GlobalOpts {
    uint64_t seed = 42;
    size_t workers = 1;
};

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw InputError("cannot create output directory: " + out);
}

// RunManifest: enough to reproduce the run; written before any long work.
void write_manifest(const std::string& out, const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ofstream m(out + "/manifest.txt", std::ios::trunc);
    if (!m) throw InputError("cannot write manifest under " + out);
    for (const auto& [k, v] : fields) m << k << ": " << v << "\n";
}

std::string dataset_root_or_env(const std::string& root) {
    if (!root.empty()) return root;
    if (const char* env = std::getenv("RTSF_DATASET_ROOT")) return env;
    throw UsageError("no dataset root given (use --root or RTSF_DATASET_ROOT)");
}

data::SegmentStore load_split_store(const std::string& data_dir, const std::string& split) {
    if (split != "train" && split != "validation" && split != "test")
        throw UsageError("split must be train|validation|test, got " + split);
    return data::load_store(data_dir + "/" + split + ".seg");
}

// Completes a model config against a segment store: channel layout, segment
// length and class count are taken from the store and must agree with any
// values the config pins explicitly.
model::ModelConfig config_for_store(model::ModelConfig cfg, const data::SegmentStore& store) {
    if (cfg.channels.empty()) cfg.channels = store.channels;
    else if (cfg.channels.size() != store.channels.size())
        throw ConfigError("config channel layout does not match segment store");
    if (cfg.segment_length == 0) cfg.segment_length = store.window;
    else if (cfg.segment_length != store.window)
        throw ConfigError("config segment_length " + std::to_string(cfg.segment_length) +
                          " does not match store window " + std::to_string(store.window));
    if (cfg.class_count == 0) cfg.class_count = store.class_count;
    else if (cfg.class_count != store.class_count)
        throw ConfigError("config class_count does not match store");
    return cfg;
}

int cmd_prepare(const std::string& dataset, const std::string& root, const std::string& out,
                const GlobalOpts& g) {
    ensure_out_dir(out);
    const std::string resolved_root = dataset_root_or_env(root);
    write_manifest(out, {{"command", "prepare"},
                         {"dataset", dataset},
                         {"root", resolved_root},
                         {"seed", std::to_string(g.seed)},
                         {"workers", std::to_string(g.workers)},
                         {"out", out}});
    auto ds = data::prepare_dataset(dataset, resolved_root, g.workers);

    json splits;
    splits["dataset"] = ds.dataset_id;
    splits["window"] = ds.window;
    splits["stride"] = ds.stride;
    splits["sample_rate_hz"] = ds.sample_rate_hz;
    splits["class_names"] = ds.class_names;
    splits["norm_mean"] = ds.norm.mean;
    splits["norm_stddev"] = ds.norm.stddev;
    for (const auto& tag : {"train", "validation", "test"}) {
        auto store = data::make_store(ds, tag);
        data::save_store(out + "/" + tag + ".seg", store);
        splits["splits"][tag]["segments"] = store.segments.size();
        std::set<std::string> trials;
        std::set<int> subjects;
        for (const auto& seg : store.segments) {
            trials.insert(seg.trial);
            subjects.insert(seg.subject);
        }
        splits["splits"][tag]["subjects"] = subjects;
        splits["splits"][tag]["trials"] = trials;
        auto hist = store.class_histogram();
        splits["splits"][tag]["class_histogram"] = hist;
        std::cout << tag << ": " << store.segments.size() << " segments, class histogram [";
        for (size_t i = 0; i < hist.size(); ++i) std::cout << (i ? "," : "") << hist[i];
        std::cout << "]\n";
    }
    std::ofstream sj(out + "/splits.json", std::ios::trunc);
    sj << splits.dump(2) << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out, const GlobalOpts& g, bool seed_given,
              int max_epochs_override, int batch_override, double lr_override) {
    ensure_out_dir(out);
    auto train_store = load_split_store(data_dir, "train");
    auto val_store = load_split_store(data_dir, "validation");
    auto cfg = config_for_store(model::load_model_config(config_path), train_store);
    if (seed_given) cfg.seed = g.seed;
    model::validate_config(cfg);
    const std::string canonical = model::canonical_config_json(cfg);

    train::TrainSchedule sched;
    sched.seed = cfg.seed;
    if (max_epochs_override > 0) sched.max_epochs = max_epochs_override;
    if (batch_override > 0) sched.batch_size = static_cast<size_t>(batch_override);
    if (lr_override > 0) sched.initial_lr = lr_override;

    write_manifest(out, {{"command", "train"},
                         {"config", config_path},
                         {"config_hash", std::to_string(nn::fnv1a_hash(canonical))},
                         {"data", data_dir},
                         {"dataset", train_store.dataset_id},
                         {"seed", std::to_string(cfg.seed)},
                         {"max_epochs", std::to_string(sched.max_epochs)},
                         {"batch_size", std::to_string(sched.batch_size)},
                         {"initial_lr", std::to_string(sched.initial_lr)},
                         {"out", out}});

    model::RtsfNet<float> net(cfg);
    std::cout << "training " << train_store.dataset_id << ": "
              << train_store.segments.size() << " train / " << val_store.segments.size()
              << " validation segments, " << net.parameter_count() << " parameters\n";
    auto result = train::train(net, train_store.segments, val_store.segments, sched,
                               &std::cout);
    result.history.write_csv(out + "/history.csv");
    nn::save_checkpoint(out + "/checkpoint-best.bin", result.best);
    nn::save_checkpoint(out + "/checkpoint-final.bin", result.final);
    auto selected = train::select_final_model(net, result.best, result.final,
                                              val_store.segments, sched.batch_size);
    bool kept_best = true;
    for (size_t i = 0; i < selected.blocks.size() && kept_best; ++i)
        if (selected.blocks[i].data != result.best.blocks[i].data) kept_best = false;
    std::ofstream sel(out + "/selected.txt", std::ios::trunc);
    sel << (kept_best ? "best" : "final") << "\n";
    std::cout << "best epoch " << result.best_epoch << ", last epoch " << result.last_epoch
              << ", selected " << (kept_best ? "best" : "final") << " checkpoint\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& split, const std::string& out) {
    ensure_out_dir(out);
    auto ckpt = nn::load_checkpoint(checkpoint);
    auto store = load_split_store(data_dir, split);
    write_manifest(out, {{"command", "eval"},
                         {"checkpoint", checkpoint},
                         {"config_hash", std::to_string(ckpt.config_hash)},
                         {"data", data_dir},
                         {"split", split},
                         {"out", out}});
    auto cfg = config_for_store(model::parse_model_config(ckpt.config_text), store);
    model::validate_config(cfg);
    model::RtsfNet<float> net(cfg);
    net.load_checkpoint_blocks(ckpt);
    auto report = train::evaluate(net, store.segments);
    data::write_confusion_csv(out + "/confusion.csv", report.confusion);
    const std::string text = data::report_text(report, store.class_names);
    std::ofstream rt(out + "/report.txt", std::ios::trunc);
    rt << text;
    std::cout << text;
    return 0;
}

int cmd_features(const std::string& data_path, const std::string& blockspec_path,
                 const std::string& out, size_t limit) {
    ensure_out_dir(out);
    write_manifest(out, {{"command", "features"},
                         {"data", data_path},
                         {"blockspec", blockspec_path},
                         {"out", out}});
    std::ifstream bs(blockspec_path);
    if (!bs) throw InputError("cannot open block spec: " + blockspec_path);
    json jb;
    try {
        bs >> jb;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("block spec is not valid JSON: ") + e.what());
    }
    tsf::BlockSpec spec;
    spec.block_length = jb.at("length").get<size_t>();
    spec.overlap = jb.value("overlap", size_t{0});
    if (jb.contains("features_file")) {
        spec.features = tsf::parse_selection_file(jb.at("features_file").get<std::string>());
    } else if (jb.contains("features")) {
        for (const auto& jf : jb.at("features")) {
            if (jf.is_number_integer()) {
                tsf::FeatureDef def;
                def.id = jf.get<int>();
                spec.features.push_back(def);
            } else {
                tsf::FeatureDef def;
                def.id = jf.at("id").get<int>();
                if (jf.contains("kind"))
                    def.qkind = jf.at("kind").get<std::string>() == "time"
                                    ? tsf::QuantKind::Time
                                    : tsf::QuantKind::Value;
                if (jf.contains("level")) def.level = jf.at("level").get<double>();
                if (jf.contains("lag")) def.lag = jf.at("lag").get<int>();
                if (jf.contains("n")) def.step = jf.at("n").get<int>();
                spec.features.push_back(def);
            }
        }
    } else {
        spec.features = model::default_feature_selection();
    }

    const std::string store_path =
        fs::is_directory(data_path) ? data_path + "/train.seg" : data_path;
    auto store = data::load_store(store_path);
    spec.validate(store.window);

    std::vector<std::array<int, 3>> tags;
    for (const auto& ch : store.channels)
        tags.push_back({ch.location, static_cast<int>(ch.sensor), static_cast<int>(ch.axis)});

    const auto names = tsf::feature_column_names(spec);
    std::ofstream csv(out + "/features.csv", std::ios::trunc);
    csv << "segment,axis,block,feature,value\n";
    csv.precision(10);
    const size_t count = limit ? std::min(limit, store.segments.size())
                               : store.segments.size();
    for (size_t s = 0; s < count; ++s) {
        std::vector<std::vector<double>> axes(store.channels.size(),
                                              std::vector<double>(store.window));
        for (size_t c = 0; c < store.channels.size(); ++c)
            for (size_t t = 0; t < store.window; ++t)
                axes[c][t] = store.segments[s].data[c * store.window + t];
        auto tensor = tsf::extract_block_features(axes, tags, spec);
        for (size_t a = 0; a < tensor.axes; ++a)
            for (size_t b = 0; b < tensor.blocks; ++b)
                for (size_t f = 0; f < tensor.width; ++f)
                    csv << s << "," << a << "," << b << "," << names[f] << ","
                        << tensor.at(a, b, f) << "\n";
    }
    std::cout << "wrote features for " << count << " segments to " << out
              << "/features.csv\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path, double eps, double threshold,
                  size_t batch, uint64_t seed) {
    model::ModelConfig cfg =
        config_path.empty() ? model::tiny_test_config() : model::load_model_config(config_path);
    cfg.dropout = 0.0;  // the check needs a deterministic forward
    if (cfg.channels.empty() || cfg.segment_length == 0 || cfg.class_count == 0)
        throw ConfigError("gradcheck config must pin channels, segment_length and classes");
    model::validate_config(cfg);
    model::RtsfNet<double> net(cfg);

    std::mt19937_64 rng(seed_stream(seed, 21));
    std::normal_distribution<double> dist(0.0, 1.0);
    nn::Array<double> batch_x({batch, cfg.channels.size(), cfg.segment_length});
    for (auto& v : batch_x.v) v = dist(rng);
    std::vector<int> labels(batch);
    for (auto& l : labels)
        l = static_cast<int>(rng() % cfg.class_count);

    auto f = [&]() { return net.training_loss(batch_x, labels, /*training=*/false); };
    const auto report = nn::grad_check(f, net.parameters(), eps);
    const bool pass = report.max_rel_error < threshold;
    std::cout << "checked " << report.checked << " parameters, max relative error "
              << report.max_rel_error << " (worst: " << report.worst_param << ")";
    if (report.kink_points)
        std::cout << ", " << report.kink_points << " kink points matched one-sided";
    std::cout << "\n" << (pass ? "PASS" : "FAIL") << " at threshold " << threshold << "\n";
    return pass ? 0 : 1;
}

int cmd_report(const std::string& confusion_path, const std::string& out) {
    ensure_out_dir(out);
    write_manifest(out, {{"command", "report"},
                         {"confusion", confusion_path},
                         {"out", out}});
    auto confusion = data::read_confusion_csv(confusion_path);
    auto report = data::compute_metrics(confusion);
    const std::string text = data::report_text(report);
    std::ofstream rt(out + "/report.txt", std::ios::trunc);
    rt << text;
    std::cout << text;
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"IMU activity recognition with learned 3D rotation bases and "
                 "time-series feature extraction"};
    app.require_subcommand(1);
    GlobalOpts g;

    std::string dataset, root, out, config_path, data_dir, checkpoint, split = "test";
    std::string blockspec, confusion_path;
    size_t limit = 0;
    int max_epochs = 0, batch_size = 0;
    double lr = 0.0, eps = 1e-4, threshold = 1e-3;
    size_t gc_batch = 2;
    bool seed_given = false;

    auto* prepare = app.add_subcommand("prepare", "Parse a dataset into segment stores");
    prepare->add_option("--dataset", dataset, "Dataset id")->required();
    prepare->add_option("--root", root, "Dataset root directory");
    prepare->add_option("--out", out, "Output directory")->required();
    prepare->add_option("--workers", g.workers, "Parallel file parsers");

    auto* train = app.add_subcommand("train", "Train a model on a prepared dataset");
    train->add_option("--config", config_path, "Model configuration JSON")->required();
    train->add_option("--data", data_dir, "Directory with segment stores")->required();
    train->add_option("--out", out, "Output directory")->required();
    train->add_option("--seed", g.seed, "Run seed")->each([&](const std::string&) {
        seed_given = true;
    });
    train->add_option("--max-epochs", max_epochs, "Override the epoch limit");
    train->add_option("--batch-size", batch_size, "Override the batch size");
    train->add_option("--lr", lr, "Override the initial learning rate");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    eval->add_option("--data", data_dir, "Directory with segment stores")->required();
    eval->add_option("--split", split, "train|validation|test");
    eval->add_option("--out", out, "Output directory")->required();

    auto* features = app.add_subcommand("features", "Dump block features to CSV");
    features->add_option("--data", data_dir, "Segment store file or directory")->required();
    features->add_option("--blockspec", blockspec, "Block spec JSON file")->required();
    features->add_option("--out", out, "Output directory")->required();
    features->add_option("--limit", limit, "Segment count limit");

    auto* gradcheck = app.add_subcommand("gradcheck",
                                         "Finite-difference check of the model gradients");
    gradcheck->add_option("--config", config_path, "Model configuration JSON");
    gradcheck->add_option("--eps", eps, "Finite-difference step");
    gradcheck->add_option("--threshold", threshold, "Pass threshold");
    gradcheck->add_option("--batch", gc_batch, "Probe batch size");
    gradcheck->add_option("--seed", g.seed, "Probe seed");

    auto* report = app.add_subcommand("report", "Recompute metrics from a confusion CSV");
    report->add_option("--confusion", confusion_path, "Confusion matrix CSV")->required();
    report->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (prepare->parsed()) return cmd_prepare(dataset, root, out, g);
        if (train->parsed())
            return cmd_train(config_path, data_dir, out, g, seed_given, max_epochs,
                             batch_size, lr);
        if (eval->parsed()) return cmd_eval(checkpoint, data_dir, split, out);
        if (features->parsed()) return cmd_features(data_dir, blockspec, out, limit);
        if (gradcheck->parsed())
            return cmd_gradcheck(config_path, eps, threshold, gc_batch, g.seed);
        if (report->parsed()) return cmd_report(confusion_path, out);
    } catch (const Error& e) {
        std::cerr << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "E_INTERNAL: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.push_back("rtsf");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace rtsf::cli
