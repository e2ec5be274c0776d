// Acceptance suite: one line per criterion, nonzero exit if any blocking
// criterion fails. --only=<substring> runs a subset; --stretch enables the
// long full-dataset run (needs --data-root pointing at the raw dataset).

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "../oracle.hpp"
#include "rtsf/data/datasets.hpp"
#include "rtsf/data/metrics.hpp"
#include "rtsf/model/network.hpp"
#include "rtsf/nn/gradcheck.hpp"
#include "rtsf/train/trainer.hpp"
#include "rtsf/tsf/engine.hpp"

using namespace rtsf;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Feature oracle equivalence

std::vector<tsf::FeatureDef> catalog_defs(size_t window_len) {
    std::vector<tsf::FeatureDef> defs;
    for (int id = 1; id <= 49; ++id) {
        tsf::FeatureDef d;
        d.id = id;
        if (id == tsf::kQuantile) {
            for (double level : {0.25, 0.5, 0.75}) {
                d.level = level;
                d.qkind = tsf::QuantKind::Value;
                defs.push_back(d);
                d.qkind = tsf::QuantKind::Time;
                defs.push_back(d);
            }
        } else if (id == tsf::kAutocorrelation) {
            for (int lag : {0, 1, static_cast<int>(window_len / 4)}) {
                d.lag = lag;
                defs.push_back(d);
            }
        } else if (id >= tsf::kAcMean && id <= tsf::kAcKurtosis) {
            d.step = 1;
            defs.push_back(d);
        } else {
            defs.push_back(d);
        }
    }
    return defs;
}

Outcome check_feature_oracle() {
    std::mt19937_64 rng(1009);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(-2.0, 2.0);
    std::uniform_int_distribution<size_t> len_dist(8, 256);
    size_t checked = 0, failures = 0;
    std::string first_failure;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = len_dist(rng);
        std::vector<double> x(n);
        switch (trial % 5) {
            case 0: for (auto& v : x) v = normal(rng); break;
            case 1: for (auto& v : x) v = uniform(rng); break;
            case 2: {
                double acc = 0;
                for (auto& v : x) v = (acc += 0.3 * normal(rng));
                break;
            }
            case 3: for (auto& v : x) v = std::floor(3.0 * uniform(rng)); break;
            default: std::fill(x.begin(), x.end(), uniform(rng)); break;
        }
        tsf::WindowContext<double> ctx{std::span<const double>(x)};
        for (const auto& def : catalog_defs(n)) {
            std::vector<double> got(tsf::feature_width(def, n));
            tsf::eval_feature(ctx, def, got.data());
            const auto want = oracle::eval(def, x);
            const bool fft = def.id >= tsf::kFftAmplitude && def.id <= tsf::kFftAngle;
            const double tol = fft ? 1e-6 : 1e-9;
            for (size_t k = 0; k < got.size(); ++k) {
                ++checked;
                const double denom = std::max({std::fabs(got[k]), std::fabs(want[k]), 1.0});
                if (std::fabs(got[k] - want[k]) > tol * denom) {
                    ++failures;
                    if (first_failure.empty()) {
                        std::ostringstream os;
                        os << "id " << def.id << " bin " << k << ": " << got[k] << " vs "
                           << want[k];
                        first_failure = os.str();
                    }
                }
            }
        }
    }
    std::ostringstream os;
    os << checked << " values over 1000 series";
    if (failures) os << ", " << failures << " mismatches, first: " << first_failure;
    return {failures == 0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Rotation properties

Outcome check_rotation() {
    std::mt19937_64 rng(2027);
    std::normal_distribution<double> dist;
    double worst_ortho = 0, worst_det = 0, worst_norm = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        rot::RotationParams p;
        p.axis = {std::tanh(dist(rng)), std::tanh(dist(rng)), std::tanh(dist(rng))};
        p.angle_raw = std::tanh(dist(rng));
        const auto r = rot::rodrigues_matrix(p);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot = 0;
                for (int k = 0; k < 3; ++k) dot += r[k][i] * r[k][j];
                worst_ortho = std::max(worst_ortho, std::fabs(dot - (i == j ? 1.0 : 0.0)));
            }
        worst_det = std::max(worst_det, std::fabs(rot::det3(r) - 1.0));
        const rot::Vec3 v{dist(rng), dist(rng), dist(rng)};
        const auto w = rot::apply(r, v);
        const double n0 = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        const double n1 = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
        worst_norm = std::max(worst_norm, std::fabs(n0 - n1));
    }
    // zero angle must give the identity exactly
    bool identity_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        rot::RotationParams p;
        p.axis = {std::tanh(dist(rng)), std::tanh(dist(rng)), std::tanh(dist(rng))};
        p.angle_raw = 0.0;
        const auto r = rot::rodrigues_matrix(p);
        const auto eye = rot::identity3();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (r[i][j] != eye[i][j]) identity_exact = false;
    }
    std::ostringstream os;
    os << "orthonormality " << worst_ortho << ", det " << worst_det << ", norm drift "
       << worst_norm << ", zero-angle identity " << (identity_exact ? "exact" : "BROKEN");
    return {worst_ortho < 1e-6 && worst_det < 1e-6 && worst_norm < 1e-9 && identity_exact,
            os.str()};
}

// ---------------------------------------------------------------------------
// 3. End-to-end gradient check on the tiny configuration

Outcome check_gradients() {
    auto cfg = model::tiny_test_config();
    model::RtsfNet<double> net(cfg);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> dist;
    nn::Array<double> batch({3, cfg.channels.size(), cfg.segment_length});
    for (auto& v : batch.v) v = dist(rng);
    const std::vector<int> labels = {0, 1, 2};
    auto f = [&] { return net.training_loss(batch, labels, /*training=*/false); };
    const auto rep = nn::grad_check(f, net.parameters(), 1e-4);
    std::ostringstream os;
    os << rep.checked << " parameters, max rel error " << rep.max_rel_error << " (worst "
       << rep.worst_param << ")";
    if (rep.kink_points) os << ", " << rep.kink_points << " kink points one-sided";
    return {rep.max_rel_error < 1e-3, os.str()};
}

// ---------------------------------------------------------------------------
// 4. Metric reproduction

Outcome check_metrics() {
    const data::ConfusionMatrix six = {
        {495, 1, 0, 0, 0, 0},  {4, 466, 1, 0, 0, 0},  {2, 6, 412, 0, 0, 0},
        {0, 0, 0, 462, 29, 0}, {0, 0, 0, 23, 509, 0}, {0, 0, 0, 0, 0, 537},
    };
    const data::ConfusionMatrix gait = {{2095, 8}, {89, 37}};
    const data::ConfusionMatrix perfect = {{7, 0}, {0, 3}};
    const auto r6 = data::compute_metrics(six);
    const auto rg = data::compute_metrics(gait);
    const auto rp = data::compute_metrics(perfect);
    const bool pass = std::fabs(r6.accuracy - 97.76) < 0.005 &&
                      std::fabs(r6.macro_f1 - 0.9779) < 0.0005 &&
                      std::fabs(r6.weighted_f1 - 0.9776) < 0.0005 &&
                      std::fabs(rg.accuracy - 95.65) < 0.005 &&
                      std::fabs(rg.macro_f1 - 0.7051) < 0.0005 &&
                      rp.accuracy == 100.0 && rp.macro_f1 == 1.0 && rp.weighted_f1 == 1.0;
    std::ostringstream os;
    os << "six-class acc " << r6.accuracy << " mf1 " << r6.macro_f1 << " wf1 "
       << r6.weighted_f1 << "; gait acc " << rg.accuracy << " mf1 " << rg.macro_f1;
    return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 5. Pipeline properties

Outcome check_pipeline() {
    constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
    bool pass = true;
    std::ostringstream os;

    // Two trials; the second carries a NULL run and two NaN gaps (3 and 20
    // samples) at 50 Hz.
    data::LabeledStream t1;
    t1.sample_rate_hz = 50.0;
    t1.trial = "trial1";
    t1.channels.assign(2, std::vector<double>(200, 1.0));
    t1.labels.assign(200, 0);

    data::LabeledStream t2 = t1;
    t2.trial = "trial2";
    for (int i = 60; i < 80; ++i) t2.labels[i] = data::kNullLabel;  // NULL run
    for (int i = 100; i < 103; ++i) t2.channels[0][i] = kNan;       // short gap
    for (int i = 150; i < 170; ++i) t2.channels[1][i] = kNan;       // long gap

    const size_t window = 40, stride = 20;
    auto s1 = data::segment_stream(t1, window, stride);
    auto t2i = data::interpolate_nan(t2, 0.2);
    auto s2 = data::segment_stream(t2i, window, stride);

    // trial 1: one clean run of 200 -> floor((200-40)/20)+1 = 9
    if (s1.size() != 9) {
        pass = false;
        os << "trial1 windows " << s1.size() << " (want 9); ";
    }
    // trial 2 after interpolation: clean runs [0,60), [80,150), [170,200)
    // -> 2 + 2 + 0 windows; the 3-sample gap is filled, the 20-sample gap
    // stays and splits the run
    if (s2.size() != 4) {
        pass = false;
        os << "trial2 windows " << s2.size() << " (want 4); ";
    }
    for (const auto& seg : s2)
        for (float v : seg.data)
            if (std::isnan(v)) pass = false;
    // check the short gap really was interpolated
    if (std::isnan(t2i.channels[0][101])) {
        pass = false;
        os << "3-sample gap not interpolated; ";
    }
    if (!std::isnan(t2i.channels[1][160])) {
        pass = false;
        os << "20-sample gap interpolated; ";
    }
    // no segment may span trials: segment streams are per trial by
    // construction, verify the trial tag is uniform per segment
    for (const auto& seg : s1)
        if (seg.trial != "trial1") pass = false;
    for (const auto& seg : s2)
        if (seg.trial != "trial2") pass = false;

    // labels are uniform by construction: a labelled break splits runs
    data::LabeledStream t3 = t1;
    for (int i = 100; i < 200; ++i) t3.labels[i] = 1;
    auto s3 = data::segment_stream(t3, window, stride);
    // two runs of 100: floor((100-40)/20)+1 = 4 windows each
    if (s3.size() != 8) {
        pass = false;
        os << "label-break windows " << s3.size() << " (want 8); ";
    }
    for (const auto& seg : s3)
        if (seg.label != 0 && seg.label != 1) pass = false;

    os << "boundary, NULL, and NaN rules hold over " << (s1.size() + s2.size() + s3.size())
       << " segments";
    return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Schedule properties

Outcome check_schedule() {
    bool pass = true;
    std::ostringstream os;
    train::TrainSchedule sched;

    {   // 20% cut after ten flat training epochs
        train::ScheduleTracker tracker(sched);
        auto d = tracker.observe(1.0, 1.0);
        for (int i = 0; i < 9; ++i) d = tracker.observe(1.0, 1.0);
        if (d.lr != 0.001) pass = false;
        d = tracker.observe(1.0, 1.0);
        if (std::fabs(d.lr - 0.0008) > 1e-15) {
            pass = false;
            os << "lr after plateau " << d.lr << " (want 0.0008); ";
        }
    }
    {   // flat validation never stops at or before the bootstrap epoch
        train::ScheduleTracker tracker(sched);
        int stop_epoch = 0;
        for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
            const auto d = tracker.observe(1.0 / epoch, 2.0);
            if (d.stop) {
                stop_epoch = epoch;
                break;
            }
        }
        if (stop_epoch <= 150) {
            pass = false;
            os << "stopped at " << stop_epoch << " (bootstrap violated); ";
        }
        if (stop_epoch != sched.bootstrap_epochs + sched.early_stop_patience) {
            pass = false;
            os << "stop at " << stop_epoch << " (want bootstrap+patience = "
               << sched.bootstrap_epochs + sched.early_stop_patience << "); ";
        }
    }
    os << "cut factor exact, bootstrap-protected stop at "
       << sched.bootstrap_epochs + sched.early_stop_patience;
    return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 7. End-to-end learning on rotated sinusoid mixtures

// Classes differ only by which frequency pair shares a source axis; every
// sample is observed through one of a handful of fixed random sensor mounts,
// so the per-channel view of a class depends on the mount. Rotation-invariant
// summaries cannot separate the classes.
std::vector<data::Segment> synth_rotated(size_t count, uint64_t seed,
                                         const std::vector<rot::Mat3>& mounts) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> amp(0.9, 1.1);
    std::normal_distribution<double> noise(0.0, 0.05);
    const size_t window = 64;
    const double fs = 32.0;
    const double freqs[3] = {3.0, 6.0, 10.0};
    std::vector<data::Segment> segs(count);
    for (size_t i = 0; i < count; ++i) {
        auto& seg = segs[i];
        seg.label = static_cast<int>(i % 3);
        seg.subject = 1;
        seg.trial = "synth";
        seg.data.assign(3 * window, 0.0f);
        const auto& mount = mounts[rng() % mounts.size()];
        // class c puts frequencies {c-th pair} on source axis 1 and the
        // remaining frequency on source axis 2
        int pair_a = 0, pair_b = 1, solo = 2;
        if (seg.label == 1) {
            pair_a = 0;
            pair_b = 2;
            solo = 1;
        } else if (seg.label == 2) {
            pair_a = 1;
            pair_b = 2;
            solo = 0;
        }
        const double pa = phase(rng), pb = phase(rng), ps = phase(rng);
        const double aa = amp(rng), ab = amp(rng), as = amp(rng);
        for (size_t t = 0; t < window; ++t) {
            const double tt = static_cast<double>(t) / fs;
            rot::Vec3 u;
            u[0] = aa * std::sin(2.0 * M_PI * freqs[pair_a] * tt + pa) +
                   ab * std::sin(2.0 * M_PI * freqs[pair_b] * tt + pb);
            u[1] = as * std::sin(2.0 * M_PI * freqs[solo] * tt + ps);
            u[2] = 0.0;
            const auto v = rot::apply(mount, u);
            for (int c = 0; c < 3; ++c)
                seg.data[c * window + t] = static_cast<float>(v[c] + noise(rng));
        }
    }
    return segs;
}

std::vector<rot::Mat3> make_mounts(uint64_t seed, size_t count) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    std::vector<rot::Mat3> mounts;
    for (size_t i = 0; i < count; ++i) {
        rot::RotationParams p;
        p.axis = {dist(rng), dist(rng), dist(rng)};
        p.angle_raw = std::tanh(dist(rng));
        mounts.push_back(rot::rodrigues_matrix(p));
    }
    return mounts;
}

model::ModelConfig synth_config(bool rotation_enabled, uint64_t seed) {
    model::ModelConfig cfg;
    cfg.seed = seed;
    cfg.class_count = 3;
    cfg.heads = 4;
    cfg.base_kernels.fill(16);
    cfg.depths.fill(1);
    cfg.dropout = 0.1;
    cfg.segment_length = 64;
    cfg.disable_rotation = !rotation_enabled;
    for (size_t len : {size_t{16}, size_t{64}}) {
        tsf::BlockSpec spec;
        spec.block_length = len;
        spec.features = model::default_feature_selection();
        cfg.block_sets.push_back(spec);
    }
    const char* names[3] = {"acc_x", "acc_y", "acc_z"};
    for (int i = 0; i < 3; ++i) {
        rot::ChannelInfo ch;
        ch.name = names[i];
        ch.location = 1;
        ch.sensor = rot::SensorType::Acc;
        ch.axis = static_cast<rot::AxisType>(i + 1);
        cfg.channels.push_back(ch);
    }
    return cfg;
}

double run_synth_training(bool rotation_enabled, uint64_t seed, std::string* note) {
    const auto mounts = make_mounts(seed_stream(seed, 100), 48);
    auto train_set = synth_rotated(360, seed_stream(seed, 101), mounts);
    auto val_set = synth_rotated(90, seed_stream(seed, 102), mounts);
    auto test_set = synth_rotated(180, seed_stream(seed, 103), mounts);
    auto cfg = synth_config(rotation_enabled, seed);
    model::RtsfNet<float> net(cfg);
    train::TrainSchedule sched;
    sched.max_epochs = 100;
    sched.batch_size = 32;
    sched.seed = seed;
    auto result = train::train(net, train_set, val_set, sched);
    auto selected = train::select_final_model(net, result.best, result.final, val_set);
    const auto report = train::evaluate(net, test_set);
    if (note) {
        std::ostringstream os;
        os << (rotation_enabled ? "full" : "ablated") << " seed " << seed << " acc "
           << report.accuracy;
        *note = os.str();
    }
    return report.accuracy / 100.0;
}

Outcome check_learning() {
    const std::vector<uint64_t> seeds = {1, 2};
    double full_sum = 0;
    bool strictly_lower = true;
    std::ostringstream os;
    for (uint64_t seed : seeds) {
        std::string note;
        const double full = run_synth_training(true, seed, &note);
        full_sum += full;
        os << note << "; ";
        const double ablated = run_synth_training(false, seed, &note);
        os << note << "; ";
        if (ablated >= full) strictly_lower = false;
    }
    const double full_mean = full_sum / seeds.size();
    os << "mean full " << full_mean << (strictly_lower ? ", ablation lower on every seed"
                                                       : ", ablation NOT lower");
    return {full_mean >= 0.90 && strictly_lower, os.str()};
}

// ---------------------------------------------------------------------------
// 8. Stretch: full-scale benchmark training (opt-in)

Outcome check_stretch(const std::string& data_root) {
    auto ds = data::load_ucihar(data_root);
    auto cfg = model::parse_model_config(R"({
      "heads": 4,
      "mlp_bk": [128,128,128,128,128,64,16,128,128,128,16,128,64,32],
      "mlp_d":  [2,3,2,4,2,1,3,2,3,2,4,2,1,1],
      "meta_tying": true,
      "block_sets": [{"length": 32}, {"length": 128}]
    })");
    cfg.class_count = ds.class_count;
    cfg.segment_length = ds.window;
    cfg.channels = ds.channels;
    model::RtsfNet<float> net(cfg);
    train::TrainSchedule sched;
    auto result = train::train(net, ds.train, ds.validation, sched, &std::cout);
    train::select_final_model(net, result.best, result.final, ds.validation);
    const auto report = train::evaluate(net, ds.test);
    std::ostringstream os;
    os << "test acc " << report.accuracy << " mf1 " << report.macro_f1 << " wf1 "
       << report.weighted_f1;
    return {report.accuracy >= 95.0, os.str()};
}

struct Criterion {
    std::string name;
    std::function<Outcome()> fn;
    bool blocking = true;
};

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    std::string data_root;
    bool stretch = false;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--only=", 0) == 0) only = arg.substr(7);
        else if (arg == "--stretch") stretch = true;
        else if (arg.rfind("--data-root=", 0) == 0) data_root = arg.substr(12);
        else {
            std::cerr << "unknown argument: " << arg << "\n";
            return 2;
        }
    }

    std::vector<Criterion> criteria = {
        {"feature-oracle", check_feature_oracle},
        {"rotation", check_rotation},
        {"gradient-check", check_gradients},
        {"metric-reproduction", check_metrics},
        {"pipeline-properties", check_pipeline},
        {"schedule-properties", check_schedule},
        {"end-to-end-learning", check_learning},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && c.name.find(only) == std::string::npos) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << c.name << " (" << secs << "s) "
                  << out.detail << "\n"
                  << std::flush;
        if (!out.pass) ++failures;
    }

    if (only.empty() || std::string("full-benchmark-stretch").find(only) != std::string::npos) {
        if (stretch && !data_root.empty()) {
            const auto t0 = std::chrono::steady_clock::now();
            Outcome out;
            try {
                out = check_stretch(data_root);
            } catch (const std::exception& e) {
                out = {false, std::string("exception: ") + e.what()};
            }
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << "full-benchmark-stretch ("
                      << secs << "s, non-blocking) " << out.detail << "\n";
        } else {
            std::cout << "[SKIP] full-benchmark-stretch (non-blocking; enable with "
                         "--stretch --data-root=<dir>)\n";
        }
    }

    return failures == 0 ? 0 : 1;
}
