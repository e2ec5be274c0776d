#include "rtsf/data/datasets.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace rtsf::data {

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& file,
                              size_t lineno) {
    std::vector<double> out;
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p) {
        while (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r') ++p;
        if (!*p) break;
        const double v = std::strtod(p, &end);
        if (end == p)
            throw InputError("malformed row at " + file + ":" + std::to_string(lineno));
        out.push_back(v);
        p = end;
    }
    return out;
}

std::vector<std::vector<double>> read_matrix(const std::string& path, size_t expect_cols) {
    std::ifstream in(path);
    if (!in) throw InputError("missing dataset file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto row = parse_row(line, path, lineno);
        if (expect_cols && row.size() != expect_cols)
            throw InputError("expected " + std::to_string(expect_cols) + " columns, got " +
                             std::to_string(row.size()) + " at " + path + ":" +
                             std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<int> read_int_column(const std::string& path) {
    auto rows = read_matrix(path, 1);
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(static_cast<int>(r[0]));
    return out;
}

rot::ChannelInfo channel(const std::string& name, int location, rot::SensorType sensor,
                         rot::AxisType axis) {
    rot::ChannelInfo ch;
    ch.name = name;
    ch.location = location;
    ch.sensor = sensor;
    ch.axis = axis;
    return ch;
}

void add_triad(std::vector<rot::ChannelInfo>& chs, const std::string& prefix, int location,
               rot::SensorType sensor) {
    chs.push_back(channel(prefix + "_x", location, sensor, rot::AxisType::X));
    chs.push_back(channel(prefix + "_y", location, sensor, rot::AxisType::Y));
    chs.push_back(channel(prefix + "_z", location, sensor, rot::AxisType::Z));
}

std::vector<std::string> list_files(const std::string& dir, const std::string& ext) {
    if (!fs::exists(dir)) throw InputError("missing dataset directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ext)
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no " + ext + " files under " + dir);
    return files;
}

// Applies fn to every file, optionally in parallel, preserving file order.
template <typename Fn>
auto map_files(const std::vector<std::string>& files, size_t workers, Fn fn)
    -> std::vector<decltype(fn(files[0]))> {
    using R = decltype(fn(files[0]));
    std::vector<R> results(files.size());
    if (workers <= 1 || files.size() <= 1) {
        for (size_t i = 0; i < files.size(); ++i) results[i] = fn(files[i]);
        return results;
    }
    std::vector<std::future<R>> futs(files.size());
    size_t next = 0;
    while (next < files.size()) {
        const size_t batch = std::min(workers, files.size() - next);
        for (size_t i = 0; i < batch; ++i)
            futs[next + i] = std::async(std::launch::async, fn, files[next + i]);
        for (size_t i = 0; i < batch; ++i) results[next + i] = futs[next + i].get();
        next += batch;
    }
    return results;
}

struct RawSetup {
    double rate = 0.0;
    size_t window = 0;
    std::vector<rot::ChannelInfo> channels;
    std::vector<std::string> class_names;
};

RawSetup pamap2_setup() {
    RawSetup s;
    s.rate = 100.0;
    s.window = 256;
    const char* locs[3] = {"hand", "chest", "ankle"};
    for (int i = 0; i < 3; ++i) {
        add_triad(s.channels, std::string(locs[i]) + "_acc", i + 1, rot::SensorType::Acc);
        add_triad(s.channels, std::string(locs[i]) + "_gyro", i + 1, rot::SensorType::Gyro);
        add_triad(s.channels, std::string(locs[i]) + "_mag", i + 1, rot::SensorType::Mag);
    }
    s.class_names = {"lying",          "sitting",          "standing",
                     "walking",        "running",          "cycling",
                     "nordic_walking", "ascending_stairs", "descending_stairs",
                     "vacuum_cleaning", "ironing"};
    return s;
}

RawSetup daphnet_setup() {
    RawSetup s;
    s.rate = 64.0;
    s.window = 192;
    add_triad(s.channels, "shank_acc", 1, rot::SensorType::Acc);
    add_triad(s.channels, "thigh_acc", 2, rot::SensorType::Acc);
    add_triad(s.channels, "trunk_acc", 3, rot::SensorType::Acc);
    s.class_names = {"no_freeze", "freeze"};
    return s;
}

RawSetup opportunity_setup() {
    RawSetup s;
    s.rate = 30.0;
    s.window = 32;
    const char* jackets[5] = {"back", "rua", "rla", "lua", "lla"};
    for (int i = 0; i < 5; ++i) {
        add_triad(s.channels, std::string(jackets[i]) + "_acc", i + 1, rot::SensorType::Acc);
        add_triad(s.channels, std::string(jackets[i]) + "_gyro", i + 1,
                  rot::SensorType::Gyro);
        add_triad(s.channels, std::string(jackets[i]) + "_mag", i + 1, rot::SensorType::Mag);
    }
    add_triad(s.channels, "lshoe_acc", 6, rot::SensorType::Acc);
    add_triad(s.channels, "lshoe_gyro", 6, rot::SensorType::Gyro);
    add_triad(s.channels, "rshoe_acc", 7, rot::SensorType::Acc);
    add_triad(s.channels, "rshoe_gyro", 7, rot::SensorType::Gyro);
    s.class_names = {"open_door_1",   "open_door_2",   "close_door_1", "close_door_2",
                     "open_fridge",   "close_fridge",  "open_dishwasher",
                     "close_dishwasher", "open_drawer_1", "close_drawer_1",
                     "open_drawer_2", "close_drawer_2", "open_drawer_3",
                     "close_drawer_3", "clean_table",  "drink_from_cup",
                     "toggle_switch"};
    return s;
}

// PAMAP2 column layout: timestamp, activity id, heart rate, then three
// 17-column IMU blocks (temp, acc 16g, acc 6g, gyro, mag, orientation).
LabeledStream parse_pamap2_file(const std::string& path) {
    auto rows = read_matrix(path, 54);
    static const std::vector<int> activity_map_keys = {1, 2, 3, 4, 5, 6, 7, 12, 13, 16, 17};
    LabeledStream st;
    st.sample_rate_hz = 100.0;
    st.trial = fs::path(path).stem().string();
    int subject = 0;
    const std::string stem = st.trial;  // subject10X
    if (stem.size() >= 3) subject = std::atoi(stem.substr(stem.size() - 3).c_str()) - 100;
    st.subject = subject;
    st.channels.assign(27, {});
    st.labels.reserve(rows.size());
    const int imu_base[3] = {3, 20, 37};
    for (const auto& row : rows) {
        const int act = static_cast<int>(row[1]);
        int label = kNullLabel;
        for (size_t k = 0; k < activity_map_keys.size(); ++k)
            if (act == activity_map_keys[k]) label = static_cast<int>(k);
        st.labels.push_back(label);
        for (int imu = 0; imu < 3; ++imu) {
            const int base = imu_base[imu];
            for (int c = 0; c < 3; ++c) st.channels[imu * 9 + c].push_back(row[base + 1 + c]);
            for (int c = 0; c < 3; ++c)
                st.channels[imu * 9 + 3 + c].push_back(row[base + 7 + c]);
            for (int c = 0; c < 3; ++c)
                st.channels[imu * 9 + 6 + c].push_back(row[base + 10 + c]);
        }
    }
    return st;
}

// Daphnet column layout: time ms, shank/thigh/trunk acceleration triads,
// annotation (0 outside experiment, 1 no freeze, 2 freeze).
LabeledStream parse_daphnet_file(const std::string& path) {
    auto rows = read_matrix(path, 11);
    LabeledStream st;
    st.sample_rate_hz = 64.0;
    st.trial = fs::path(path).stem().string();
    st.subject = st.trial.size() >= 3 ? std::atoi(st.trial.substr(1, 2).c_str()) : 0;
    st.channels.assign(9, {});
    for (const auto& row : rows) {
        const int ann = static_cast<int>(row[10]);
        st.labels.push_back(ann == 1 ? 0 : (ann == 2 ? 1 : kNullLabel));
        for (int c = 0; c < 9; ++c) st.channels[c].push_back(row[1 + c]);
    }
    return st;
}

// OPPORTUNITY column layout (1-based): jacket IMUs at 38 (back), 51 (rua),
// 64 (rla), 77 (lua), 90 (lla) with acc/gyro/mag triads; shoe units at 103
// and 119 with body-frame acceleration at +6 and body-frame angular velocity
// at +9; mid-level gesture label in column 250.
LabeledStream parse_opportunity_file(const std::string& path) {
    auto rows = read_matrix(path, 250);
    static const int gesture_ids[17] = {406516, 406517, 404516, 404517, 406520, 404520,
                                        406505, 404505, 406519, 404519, 406511, 404511,
                                        406508, 404508, 408512, 405506, 404504};
    LabeledStream st;
    st.sample_rate_hz = 30.0;
    st.trial = fs::path(path).stem().string();
    st.subject = st.trial.size() >= 2 ? std::atoi(st.trial.substr(1, 1).c_str()) : 0;
    st.channels.assign(57, {});
    const int jacket_base[5] = {37, 50, 63, 76, 89};  // 0-based acc offsets
    const int shoe_base[2] = {102, 118};
    for (const auto& row : rows) {
        const int gesture = static_cast<int>(row[249]);
        int label = kNullLabel;
        for (int k = 0; k < 17; ++k)
            if (gesture == gesture_ids[k]) label = k;
        st.labels.push_back(label);
        size_t ch = 0;
        for (int imu = 0; imu < 5; ++imu)
            for (int c = 0; c < 9; ++c) st.channels[ch++].push_back(row[jacket_base[imu] + c]);
        for (int shoe = 0; shoe < 2; ++shoe) {
            for (int c = 0; c < 3; ++c)
                st.channels[ch++].push_back(row[shoe_base[shoe] + 6 + c]);
            for (int c = 0; c < 3; ++c)
                st.channels[ch++].push_back(row[shoe_base[shoe] + 9 + c]);
        }
    }
    return st;
}

enum class Membership { Train, Validation, Test };

PreparedDataset prepare_raw(const std::string& kind, const std::string& root,
                            size_t workers) {
    RawSetup setup;
    std::vector<std::string> files;
    std::function<LabeledStream(const std::string&)> parse;
    std::function<Membership(const LabeledStream&)> membership;

    if (kind == "pamap2") {
        setup = pamap2_setup();
        const std::string dir =
            fs::exists(root + "/Protocol") ? root + "/Protocol" : root;
        files = list_files(dir, ".dat");
        parse = parse_pamap2_file;
        membership = [](const LabeledStream& s) {
            if (s.subject == 5) return Membership::Validation;
            if (s.subject == 6) return Membership::Test;
            return Membership::Train;
        };
    } else if (kind == "daphnet") {
        setup = daphnet_setup();
        const std::string dir = fs::exists(root + "/dataset") ? root + "/dataset" : root;
        files = list_files(dir, ".txt");
        parse = parse_daphnet_file;
        membership = [](const LabeledStream& s) {
            static const std::set<std::string> val = {"S02R02", "S03R03", "S05R01"};
            static const std::set<std::string> test = {"S02R01", "S04R01", "S05R02"};
            if (val.count(s.trial)) return Membership::Validation;
            if (test.count(s.trial)) return Membership::Test;
            return Membership::Train;
        };
    } else if (kind == "opportunity") {
        setup = opportunity_setup();
        const std::string dir = fs::exists(root + "/dataset") ? root + "/dataset" : root;
        files = list_files(dir, ".dat");
        parse = parse_opportunity_file;
        membership = [](const LabeledStream& s) {
            static const std::set<std::string> val = {"S1-ADL1", "S3-ADL3", "S3-Drill",
                                                      "S4-ADL4"};
            static const std::set<std::string> test = {"S2-ADL2", "S2-Drill", "S3-ADL1",
                                                       "S4-ADL5"};
            if (val.count(s.trial)) return Membership::Validation;
            if (test.count(s.trial)) return Membership::Test;
            return Membership::Train;
        };
    } else {
        throw InputError("unknown dataset kind: " + kind);
    }

    PreparedDataset ds;
    ds.dataset_id = kind;
    ds.window = setup.window;
    ds.stride = setup.window / 2;  // 50% overlap
    ds.sample_rate_hz = setup.rate;
    ds.channels = setup.channels;
    ds.class_names = setup.class_names;
    ds.class_count = setup.class_names.size();

    auto streams = map_files(files, workers, [&](const std::string& f) {
        LabeledStream st = parse(f);
        st.check();
        return interpolate_nan(st);
    });
    for (const auto& st : streams) {
        auto segs = segment_stream(st, ds.window, ds.stride);
        auto& dest = membership(st) == Membership::Train
                         ? ds.train
                         : (membership(st) == Membership::Validation ? ds.validation
                                                                     : ds.test);
        dest.insert(dest.end(), segs.begin(), segs.end());
    }

    ds.norm = compute_norm_stats(ds.train, ds.channels.size(), ds.window);
    apply_norm(ds.train, ds.norm, ds.window);
    apply_norm(ds.validation, ds.norm, ds.window);
    apply_norm(ds.test, ds.norm, ds.window);
    return ds;
}

}  // namespace

std::vector<std::string> supported_datasets() {
    return {"ucihar", "pamap2", "daphnet", "opportunity"};
}

std::vector<LabeledStream> ingest_raw(const std::string& kind,
                                      const std::vector<std::string>& files) {
    std::vector<LabeledStream> out;
    for (const auto& f : files) {
        if (kind == "pamap2") out.push_back(parse_pamap2_file(f));
        else if (kind == "daphnet") out.push_back(parse_daphnet_file(f));
        else if (kind == "opportunity") out.push_back(parse_opportunity_file(f));
        else throw InputError("unknown dataset kind: " + kind);
        out.back().check();
    }
    return out;
}

PreparedDataset load_ucihar(const std::string& root) {
    PreparedDataset ds;
    ds.dataset_id = "ucihar";
    ds.window = 128;
    ds.stride = 64;  // pre-segmented with 50% overlap
    ds.sample_rate_hz = 50.0;
    add_triad(ds.channels, "body_acc", 1, rot::SensorType::Acc);
    add_triad(ds.channels, "body_gyro", 1, rot::SensorType::Gyro);
    ds.class_names = {"walking", "walking_upstairs", "walking_downstairs",
                      "sitting", "standing", "laying"};
    ds.class_count = 6;

    static const char* kSignals[6] = {"body_acc_x", "body_acc_y", "body_acc_z",
                                      "body_gyro_x", "body_gyro_y", "body_gyro_z"};
    auto load_split = [&](const std::string& split) {
        const std::string base = root + "/" + split + "/";
        std::vector<std::vector<std::vector<double>>> signals;
        for (const auto* sig : kSignals)
            signals.push_back(read_matrix(
                base + "Inertial Signals/" + sig + "_" + split + ".txt", 128));
        auto labels = read_int_column(base + "y_" + split + ".txt");
        auto subjects = read_int_column(base + "subject_" + split + ".txt");
        const size_t n = labels.size();
        for (const auto& sig : signals)
            if (sig.size() != n)
                throw InputError("signal row count mismatch under " + base);
        if (subjects.size() != n)
            throw InputError("subject row count mismatch under " + base);
        std::vector<Segment> segs(n);
        for (size_t i = 0; i < n; ++i) {
            if (labels[i] < 1 || labels[i] > 6)
                throw InputError("activity label out of range in " + base + "y_" + split +
                                 ".txt");
            segs[i].label = labels[i] - 1;
            segs[i].subject = subjects[i];
            segs[i].trial = split;
            segs[i].data.resize(6 * 128);
            for (size_t c = 0; c < 6; ++c)
                for (size_t t = 0; t < 128; ++t)
                    segs[i].data[c * 128 + t] = static_cast<float>(signals[c][i][t]);
        }
        return segs;
    };

    auto train_all = load_split("train");
    ds.test = load_split("test");
    static const std::set<int> kValidationSubjects = {7, 22};
    for (auto& seg : train_all) {
        if (kValidationSubjects.count(seg.subject)) ds.validation.push_back(std::move(seg));
        else ds.train.push_back(std::move(seg));
    }

    ds.norm = compute_norm_stats(ds.train, ds.channels.size(), ds.window);
    apply_norm(ds.train, ds.norm, ds.window);
    apply_norm(ds.validation, ds.norm, ds.window);
    apply_norm(ds.test, ds.norm, ds.window);
    return ds;
}

PreparedDataset prepare_dataset(const std::string& kind, const std::string& root,
                                size_t workers) {
    const auto known = supported_datasets();
    if (std::find(known.begin(), known.end(), kind) == known.end()) {
        std::string ids;
        for (const auto& k : known) ids += (ids.empty() ? "" : ", ") + k;
        throw InputError("unknown dataset '" + kind + "'; supported: " + ids);
    }
    if (kind == "ucihar") return load_ucihar(root);
    return prepare_raw(kind, root, workers);
}

SegmentStore make_store(const PreparedDataset& ds, const std::string& split_tag) {
    SegmentStore store;
    store.dataset_id = ds.dataset_id;
    store.split_tag = split_tag;
    store.window = ds.window;
    store.stride = ds.stride;
    store.class_count = ds.class_count;
    store.class_names = ds.class_names;
    store.channels = ds.channels;
    if (split_tag == "train") store.segments = ds.train;
    else if (split_tag == "validation") store.segments = ds.validation;
    else if (split_tag == "test") store.segments = ds.test;
    else throw UsageError("unknown split tag: " + split_tag);
    return store;
}

}  // namespace rtsf::data
