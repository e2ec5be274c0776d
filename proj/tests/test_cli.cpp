#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rtsf/cli/commands.hpp"
#include "rtsf/data/store.hpp"
#include "rtsf/model/config.hpp"

using namespace rtsf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("rtsf_cli_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Six-channel two-triad store with two classes separable by signal level.
void write_toy_stores(const fs::path& dir, size_t per_split = 16) {
    std::mt19937_64 rng(42);
    std::normal_distribution<float> noise(0.0f, 0.25f);
    for (const char* tag : {"train", "validation", "test"}) {
        data::SegmentStore store;
        store.dataset_id = "toy";
        store.split_tag = tag;
        store.window = 16;
        store.stride = 8;
        store.class_count = 2;
        store.class_names = {"low", "high"};
        const char* names[6] = {"acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"};
        for (int i = 0; i < 6; ++i)
            store.channels.push_back({names[i], 1,
                                      i < 3 ? rot::SensorType::Acc : rot::SensorType::Gyro,
                                      static_cast<rot::AxisType>(i % 3 + 1)});
        for (size_t i = 0; i < per_split; ++i) {
            data::Segment seg;
            seg.label = static_cast<int>(i % 2);
            seg.subject = 1;
            seg.trial = tag;
            seg.data.resize(6 * 16);
            const float level = seg.label == 0 ? -1.0f : 1.0f;
            for (auto& v : seg.data) v = level + noise(rng);
            store.segments.push_back(std::move(seg));
        }
        data::save_store((dir / (std::string(tag) + ".seg")).string(), store);
    }
}

void write_toy_config(const fs::path& path) {
    std::ofstream out(path);
    out << R"({
  "seed": 7,
  "heads": 2,
  "mlp_bk": [8,8,8,8,8,8,8,8,8,8,8,8,8,8],
  "mlp_d":  [1,1,1,1,1,1,1,1,1,1,1,1,1,1],
  "dropout": 0.25,
  "block_sets": [ {"length": 8}, {"length": 16} ]
})";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("unknown dataset id fails with a nonzero exit") {
    TempDir dir("prep_bad");
    CHECK(cli::run({"prepare", "--dataset", "bogus", "--root", dir.str(), "--out",
                    dir.str() + "/out"}) != 0);
}

TEST_CASE("train, eval and report over a toy store") {
    TempDir dir("flow");
    write_toy_stores(dir.path);
    write_toy_config(dir.path / "config.json");
    const std::string out1 = dir.str() + "/run1";
    const std::string out2 = dir.str() + "/run2";

    REQUIRE(cli::run({"train", "--config", dir.str() + "/config.json", "--data", dir.str(),
                      "--out", out1, "--max-epochs", "2", "--batch-size", "8"}) == 0);
    CHECK(fs::exists(out1 + "/manifest.txt"));
    CHECK(fs::exists(out1 + "/history.csv"));
    CHECK(fs::exists(out1 + "/checkpoint-best.bin"));
    CHECK(fs::exists(out1 + "/checkpoint-final.bin"));
    CHECK(slurp(out1 + "/manifest.txt").find("command: train") != std::string::npos);

    SUBCASE("identical runs produce identical artifacts") {
        REQUIRE(cli::run({"train", "--config", dir.str() + "/config.json", "--data",
                          dir.str(), "--out", out2, "--max-epochs", "2", "--batch-size",
                          "8"}) == 0);
        CHECK(slurp(out1 + "/history.csv") == slurp(out2 + "/history.csv"));
        CHECK(slurp(out1 + "/checkpoint-final.bin") == slurp(out2 + "/checkpoint-final.bin"));
    }

    SUBCASE("evaluation writes the report and confusion counts") {
        const std::string eval_out = dir.str() + "/eval";
        REQUIRE(cli::run({"eval", "--checkpoint", out1 + "/checkpoint-best.bin", "--data",
                          dir.str(), "--split", "test", "--out", eval_out}) == 0);
        CHECK(fs::exists(eval_out + "/report.txt"));
        CHECK(fs::exists(eval_out + "/confusion.csv"));
        const auto text = slurp(eval_out + "/report.txt");
        CHECK(text.find("accuracy:") != std::string::npos);
        CHECK(text.find("macro_f1:") != std::string::npos);
        CHECK(text.find("weighted_f1:") != std::string::npos);

        SUBCASE("report recomputes the same metrics from the csv") {
            const std::string rep_out = dir.str() + "/rep";
            REQUIRE(cli::run({"report", "--confusion", eval_out + "/confusion.csv", "--out",
                              rep_out}) == 0);
            CHECK(slurp(rep_out + "/report.txt").find("accuracy:") != std::string::npos);
        }

        SUBCASE("validation and test reports are distinct") {
            const std::string eval_val = dir.str() + "/eval_val";
            REQUIRE(cli::run({"eval", "--checkpoint", out1 + "/checkpoint-best.bin",
                              "--data", dir.str(), "--split", "validation", "--out",
                              eval_val}) == 0);
            CHECK(fs::exists(eval_val + "/report.txt"));
        }
    }

    SUBCASE("config validation failures surface before training") {
        std::ofstream bad(dir.path / "bad.json");
        bad << R"({"heads": 0, "mlp_bk": [8,8,8,8,8,8,8,8,8,8,8,8,8,8],
                   "mlp_d": [1,1,1,1,1,1,1,1,1,1,1,1,1,1],
                   "block_sets": [{"length": 8}]})";
        bad.close();
        CHECK(cli::run({"train", "--config", dir.str() + "/bad.json", "--data", dir.str(),
                        "--out", dir.str() + "/bad_out"}) != 0);
    }
}

TEST_CASE("feature dumps") {
    TempDir dir("features");
    // constant-valued store: variance columns must be exactly zero
    data::SegmentStore store;
    store.dataset_id = "toy";
    store.split_tag = "train";
    store.window = 8;
    store.stride = 8;
    store.class_count = 2;
    store.channels.push_back({"acc_x", 1, rot::SensorType::Acc, rot::AxisType::X});
    data::Segment seg;
    seg.label = 0;
    seg.data.assign(8, 2.5f);
    store.segments.push_back(seg);
    data::save_store(dir.str() + "/train.seg", store);

    std::ofstream spec(dir.path / "spec.json");
    spec << R"({"length": 8, "features": [1, 7, 9]})";
    spec.close();

    REQUIRE(cli::run({"features", "--data", dir.str(), "--blockspec",
                      dir.str() + "/spec.json", "--out", dir.str() + "/f"}) == 0);
    const auto csv = slurp(dir.str() + "/f/features.csv");
    CHECK(csv.find("variance,0") != std::string::npos);
    CHECK(csv.find("mean,2.5") != std::string::npos);

    SUBCASE("unknown feature ids are rejected") {
        std::ofstream bad(dir.path / "bad.json");
        bad << R"({"length": 8, "features": [99]})";
        bad.close();
        CHECK(cli::run({"features", "--data", dir.str(), "--blockspec",
                        dir.str() + "/bad.json", "--out", dir.str() + "/g"}) != 0);
    }
}

TEST_CASE("gradient check command passes on a small configuration") {
    TempDir dir("gradcheck");
    auto cfg = model::tiny_test_config();
    cfg.heads = 1;
    cfg.block_sets.resize(1);
    cfg.block_sets[0].block_length = 8;
    // trim the selection to keep the finite-difference sweep quick
    cfg.block_sets[0].features = tsf::parse_selection_line("9");
    std::ofstream out(dir.path / "cfg.json");
    out << model::canonical_config_json(cfg);
    out.close();
    CHECK(cli::run({"gradcheck", "--config", dir.str() + "/cfg.json", "--batch", "2"}) == 0);
}

}  // TEST_SUITE
