#include "rtsf/model/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rtsf::model {

using nlohmann::json;

std::vector<tsf::FeatureDef> default_feature_selection() {
    std::vector<tsf::FeatureDef> defs;
    for (int id : {2, 3, 9, 10, 13, 14, 19, 23, 26, 28, 38, 40, 46, 49}) {
        tsf::FeatureDef d;
        d.id = id;
        defs.push_back(d);
    }
    return defs;
}

namespace {

tsf::FeatureDef feature_from_json(const json& j) {
    tsf::FeatureDef def;
    if (j.is_number_integer()) {
        def.id = j.get<int>();
        return def;
    }
    if (!j.is_object()) throw ConfigError("feature entry must be an id or an object");
    def.id = j.at("id").get<int>();
    if (j.contains("kind")) {
        const std::string k = j.at("kind").get<std::string>();
        if (k == "value") def.qkind = tsf::QuantKind::Value;
        else if (k == "time") def.qkind = tsf::QuantKind::Time;
        else throw ConfigError("quantile kind must be value|time");
    }
    if (j.contains("level")) def.level = j.at("level").get<double>();
    if (j.contains("lag")) def.lag = j.at("lag").get<int>();
    if (j.contains("n")) def.step = j.at("n").get<int>();
    return def;
}

json feature_to_json(const tsf::FeatureDef& def) {
    const bool plain = def.qkind == tsf::QuantKind::Value && def.level == 0.5 &&
                       def.lag == 1 && def.step == 1;
    if (plain) return json(def.id);
    json j;
    j["id"] = def.id;
    if (def.id == tsf::kQuantile) {
        j["kind"] = def.qkind == tsf::QuantKind::Value ? "value" : "time";
        j["level"] = def.level;
    }
    if (def.id == tsf::kAutocorrelation) j["lag"] = def.lag;
    if (def.id >= tsf::kAcMean && def.id <= tsf::kAcKurtosis) j["n"] = def.step;
    return j;
}

}  // namespace

ModelConfig parse_model_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.seed = j.value("seed", uint64_t{42});
        cfg.class_count = j.value("class_count", size_t{0});
        cfg.heads = j.at("heads").get<size_t>();
        const auto bk = j.at("mlp_bk").get<std::vector<size_t>>();
        const auto d = j.at("mlp_d").get<std::vector<size_t>>();
        if (bk.size() != 14 || d.size() != 14)
            throw ConfigError("mlp_bk and mlp_d must list exactly 14 values");
        std::copy(bk.begin(), bk.end(), cfg.base_kernels.begin());
        std::copy(d.begin(), d.end(), cfg.depths.begin());
        cfg.meta_tying = j.value("meta_tying", false);
        cfg.leaky_slope = j.value("leaky_slope", 0.3);
        cfg.dropout = j.value("dropout", 0.5);
        cfg.hard_gates = j.value("hard_gates", false);
        cfg.disable_rotation = j.value("disable_rotation", false);
        cfg.segment_length = j.value("segment_length", size_t{0});
        for (const auto& jb : j.at("block_sets")) {
            tsf::BlockSpec spec;
            spec.block_length = jb.at("length").get<size_t>();
            spec.overlap = jb.value("overlap", size_t{0});
            if (jb.contains("features"))
                for (const auto& jf : jb.at("features"))
                    spec.features.push_back(feature_from_json(jf));
            else if (jb.contains("features_file"))
                spec.features =
                    tsf::parse_selection_file(jb.at("features_file").get<std::string>());
            else
                spec.features = default_feature_selection();
            cfg.block_sets.push_back(std::move(spec));
        }
        if (j.contains("channels")) {
            for (const auto& jc : j.at("channels")) {
                rot::ChannelInfo ch;
                ch.name = jc.at("name").get<std::string>();
                ch.location = jc.at("location").get<int>();
                ch.sensor = rot::sensor_type_from_string(jc.at("sensor").get<std::string>());
                ch.axis = rot::axis_type_from_string(jc.at("axis").get<std::string>());
                cfg.channels.push_back(std::move(ch));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model_config(ss.str());
}

std::string canonical_config_json(const ModelConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["class_count"] = cfg.class_count;
    j["heads"] = cfg.heads;
    j["mlp_bk"] = cfg.base_kernels;
    j["mlp_d"] = cfg.depths;
    j["meta_tying"] = cfg.meta_tying;
    j["leaky_slope"] = cfg.leaky_slope;
    j["dropout"] = cfg.dropout;
    j["hard_gates"] = cfg.hard_gates;
    j["disable_rotation"] = cfg.disable_rotation;
    j["segment_length"] = cfg.segment_length;
    j["block_sets"] = json::array();
    for (const auto& spec : cfg.block_sets) {
        json jb;
        jb["length"] = spec.block_length;
        jb["overlap"] = spec.overlap;
        jb["features"] = json::array();
        for (const auto& def : spec.features) jb["features"].push_back(feature_to_json(def));
        j["block_sets"].push_back(jb);
    }
    j["channels"] = json::array();
    for (const auto& ch : cfg.channels) {
        json jc;
        jc["name"] = ch.name;
        jc["location"] = ch.location;
        jc["sensor"] = rot::to_string(ch.sensor);
        jc["axis"] = rot::to_string(ch.axis);
        j["channels"].push_back(jc);
    }
    return j.dump();
}

namespace {

void require(bool ok, const std::string& constraint) {
    if (!ok) throw ConfigError("config constraint violated: " + constraint);
}

}  // namespace

void validate_config(const ModelConfig& cfg) {
    require(cfg.heads >= 1, "head count must be >= 1");
    for (size_t i = 1; i <= 14; ++i) {
        require(cfg.bk(i) >= 1, "base kernel slot " + std::to_string(i) + " must be >= 1");
        require(cfg.d(i) >= 1, "depth slot " + std::to_string(i) + " must be >= 1");
    }
    require(cfg.class_count >= 2, "class_count must be >= 2");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout must lie in [0,1)");
    require(cfg.leaky_slope >= 0.0, "leaky_relu slope must be >= 0");
    require(!cfg.block_sets.empty(), "at least one block set is required");
    require(cfg.segment_length > 0, "segment_length must be positive");
    for (const auto& spec : cfg.block_sets) spec.validate(cfg.segment_length);
    if (cfg.meta_tying) {
        require(cfg.heads == 4, "meta tying fixes the head count at 4");
        auto tie2 = [&](size_t i, size_t jj) {
            require(cfg.bk(i) == cfg.bk(jj), "meta tying requires base_kernels[" +
                                                 std::to_string(i) + "] == base_kernels[" +
                                                 std::to_string(jj) + "]");
            require(cfg.d(i) == cfg.d(jj), "meta tying requires depths[" + std::to_string(i) +
                                               "] == depths[" + std::to_string(jj) + "]");
        };
        tie2(2, 9);
        tie2(6, 13);
        for (size_t s : {3, 5, 8, 10, 12}) tie2(1, s);
    }
    if (!cfg.channels.empty()) {
        const auto map = rot::derive_triads(cfg.channels);
        require(!map.triads.empty(), "channel layout yields no rotatable triad");
    }
}

ModelConfig tiny_test_config() {
    ModelConfig cfg;
    cfg.seed = 7;
    cfg.class_count = 3;
    cfg.heads = 2;
    cfg.base_kernels.fill(8);
    cfg.depths.fill(1);
    cfg.dropout = 0.0;
    cfg.segment_length = 16;
    for (size_t len : {size_t{8}, size_t{16}}) {
        tsf::BlockSpec spec;
        spec.block_length = len;
        spec.overlap = 0;
        spec.features = default_feature_selection();
        cfg.block_sets.push_back(std::move(spec));
    }
    const char* names[6] = {"acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"};
    for (int i = 0; i < 6; ++i) {
        rot::ChannelInfo ch;
        ch.name = names[i];
        ch.location = 1;
        ch.sensor = i < 3 ? rot::SensorType::Acc : rot::SensorType::Gyro;
        ch.axis = static_cast<rot::AxisType>(i % 3 + 1);
        cfg.channels.push_back(ch);
    }
    return cfg;
}

}  // namespace rtsf::model
