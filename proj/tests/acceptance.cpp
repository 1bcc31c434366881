// Acceptance suite: runs every gate criterion at its pinned tolerance and
// prints one pass/fail line per criterion. Exit code is the failure count.
//
// The heavy criteria train on the fixed synthetic benchmark (6 drivers x 4
// sessions x 15 min, 20 channels, seed 7) with hidden 32 / embed 16 and report
// 5-seed medians.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "d2v/d2v.hpp"
#include "test_util.hpp"

using namespace d2v;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
unsigned g_threads = 2;

void report(int n, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", n, name.c_str(),
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run(int n, const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        auto [pass, detail] = fn();
        report(n, name, pass, detail);
    } catch (const std::exception& e) {
        report(n, name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.5g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// shared benchmark state

constexpr uint64_t kFleetSeed = 7;
const std::vector<uint64_t> kSeeds = {1, 2, 3, 4, 5};

ArchConfig bench_arch() { return ArchConfig{0, 10, 32, 16}; }

TrainConfig bench_train() {
    TrainConfig tc;
    tc.epochs = 24;
    tc.batch_size = 128;
    tc.lr = 1e-3;
    tc.patience = 6;
    tc.clip_norm = 5.0;
    return tc;
}

struct Benchmark {
    FleetResult fleet;
    PreparedData prep;
    std::vector<Table1SeedResult> seeds;  // aligned with kSeeds
};

Benchmark* g_bench = nullptr;

Benchmark& benchmark() {
    if (!g_bench) {
        g_bench = new Benchmark();
        SynthConfig cfg;
        cfg.seed = kFleetSeed;
        g_bench->fleet = make_fleet(cfg);
        SplitSpec split;
        split.seed = derive_seed(kFleetSeed, "split");
        Horizons hz;
        hz.k_grid = {0.5, 1.0, 2.0, 3.0};
        g_bench->prep = prepare(g_bench->fleet.data, split, hz, 10);
        std::printf("benchmark fleet: %zu sessions, windows train/val/test %zu/%zu/%zu\n",
                    g_bench->fleet.data.sessions.size(), g_bench->prep.wtrain.size(),
                    g_bench->prep.wval.size(), g_bench->prep.wtest.size());
        std::fflush(stdout);
        for (uint64_t seed : kSeeds) {
            auto t0 = Clock::now();
            g_bench->seeds.push_back(table1_single_seed(g_bench->prep, bench_arch(), bench_train(),
                                                        HeadConfig{}, seed,
                                                        g_bench->fleet.data.schema.hash(),
                                                        g_threads));
            std::printf("  seed %llu trained (%.0fs)\n", (unsigned long long)seed,
                        std::chrono::duration<double>(Clock::now() - t0).count());
            std::fflush(stdout);
        }
    }
    return *g_bench;
}

double method_median(const Benchmark& b, const std::string& method, PredTask task) {
    std::vector<double> v;
    for (const auto& s : b.seeds)
        v.push_back(task == PredTask::Short ? s.scores.at(method).short_mse
                                            : s.scores.at(method).long_mse);
    return median(v);
}

// ---------------------------------------------------------------------------
// criteria

std::pair<bool, std::string> c1_gradient_check() {
    const auto t0 = Clock::now();
    const std::vector<bool> is_bool = {false, false, false, false, true, true};
    ArchConfig arch{6, 10, 8, 4};
    Drive2VecModel m = build_model(arch, 99);
    std::mt19937_64 rng(17);
    Matrix window(10, 6);
    for (auto& v : window.data) v = oracle::random_vec(1, rng, 0.7)[0];
    WindowSample tgt;
    tgt.exact1s = oracle::random_vec(6, rng);
    tgt.exact1s[4] = 1.0;
    tgt.exact1s[5] = 0.0;
    tgt.avg1s = oracle::random_vec(6, rng);
    tgt.avg10s = oracle::random_vec(6, rng);
    tgt.avg100s = oracle::random_vec(6, rng);

    auto loss = [&]() {
        FullOutput out = forward_full(m, window);
        return composite_loss(out.out, tgt, is_bool, LossMask::all()).total;
    };
    ModelCache cache;
    forward_full(m, window, cache);
    Vec d_out;
    composite_loss(cache.out, tgt, is_bool, LossMask::all(), &d_out);
    ModelGrads g = ModelGrads::like(m);
    backward(m, cache, d_out, g);
    auto fd = oracle::finite_diff(loss, m.arrays(), 1e-5);
    const double err = oracle::max_rel_err(std::as_const(g).arrays(), fd);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    return {err < 1e-4 && secs < 60.0,
            "max rel err " + fmt(err) + " (tol 1e-4), " + fmt(secs) + "s"};
}

std::pair<bool, std::string> c2_gru_oracle() {
    GruParams p = GruParams::zeros(1, 1);
    for (auto* m : {&p.Wz, &p.Uz, &p.Wr, &p.Ur, &p.Wh, &p.Uh}) (*m)(0, 0) = 1.0;
    oracle::ScalarGru ref;

    double worst = 0.0;
    Vec h = gru_cell_step({1.0}, {0.0}, p);
    worst = std::max(worst, std::abs(h[0] - ref.step(1.0, 0.0)));

    auto hs = gru_sequence({{1.0}, {1.0}, {1.0}}, p);
    auto expect = ref.sequence({1.0, 1.0, 1.0});
    for (size_t t = 0; t < 3; ++t) worst = std::max(worst, std::abs(hs[t][0] - expect[t]));

    // zero-weight halving case
    GruParams z = GruParams::zeros(2, 2);
    Vec hz = gru_cell_step({0.0, 0.0}, {0.8, -0.4}, z);
    worst = std::max(worst, std::abs(hz[0] - 0.4));
    worst = std::max(worst, std::abs(hz[1] + 0.2));
    return {worst < 1e-12, "max deviation " + fmt(worst) + " (tol 1e-12)"};
}

std::pair<bool, std::string> c3_pca_oracle() {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_val = 0.0, worst_vec = 0.0, worst_ortho = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Matrix rows(50, 6);
        for (size_t i = 0; i < 50; ++i) {
            const double base = n(rng);
            for (size_t j = 0; j < 6; ++j)
                rows(i, j) = base * double(j + 1) * 0.5 + n(rng) * (1.0 + 0.2 * double(j));
        }
        PcaModel m = pca_fit(rows, 3);

        // independent route: power iteration with deflation
        Vec mean(6, 0.0);
        for (size_t i = 0; i < 50; ++i)
            for (size_t j = 0; j < 6; ++j) mean[j] += rows(i, j);
        for (auto& v : mean) v /= 50.0;
        Matrix cov(6, 6);
        for (size_t i = 0; i < 50; ++i)
            for (size_t a = 0; a < 6; ++a)
                for (size_t b = 0; b < 6; ++b)
                    cov(a, b) += (rows(i, a) - mean[a]) * (rows(i, b) - mean[b]);
        for (auto& v : cov.data) v /= 49.0;
        for (size_t c = 0; c < 3; ++c) {
            Vec v(6);
            for (size_t j = 0; j < 6; ++j) v[j] = 1.0 + 0.01 * double(j + c);
            for (int it = 0; it < 5000; ++it) {
                Vec w = matvec(cov, v);
                double norm = 0;
                for (double x : w) norm += x * x;
                norm = std::sqrt(norm);
                for (auto& x : w) x /= norm;
                v = w;
            }
            Vec cv = matvec(cov, v);
            double lambda = 0;
            for (size_t j = 0; j < 6; ++j) lambda += v[j] * cv[j];
            worst_val = std::max(worst_val,
                                 std::abs(m.variances[c] - lambda) / std::max(1.0, lambda));
            double dot = 0;
            for (size_t j = 0; j < 6; ++j) dot += m.components(c, j) * v[j];
            worst_vec = std::max(worst_vec, 1.0 - std::abs(dot));
            for (size_t a = 0; a < 6; ++a)
                for (size_t b = 0; b < 6; ++b) cov(a, b) -= lambda * v[a] * v[b];
        }
        for (size_t a = 0; a < 3; ++a) {
            double norm = 0;
            for (size_t j = 0; j < 6; ++j) norm += m.components(a, j) * m.components(a, j);
            worst_ortho = std::max(worst_ortho, std::abs(std::sqrt(norm) - 1.0));
            for (size_t b = a + 1; b < 3; ++b) {
                double dot = 0;
                for (size_t j = 0; j < 6; ++j) dot += m.components(a, j) * m.components(b, j);
                worst_ortho = std::max(worst_ortho, std::abs(dot));
            }
        }
    }
    return {worst_val < 1e-8 && worst_vec < 1e-8 && worst_ortho < 1e-9,
            "eigenvalue err " + fmt(worst_val) + ", subspace err " + fmt(worst_vec) +
                ", orthonormality " + fmt(worst_ortho)};
}

std::pair<bool, std::string> c4_auroc_oracle() {
    std::mt19937_64 rng(13);
    size_t exact_matches = 0;
    const size_t trials = 100;
    for (size_t trial = 0; trial < trials; ++trial) {
        std::vector<double> pos, neg;
        const size_t np = 10 + rng() % 190, nn = 10 + rng() % 190;
        for (size_t i = 0; i < np; ++i) pos.push_back(double(rng() % 24) / 4.0 + 0.25);
        for (size_t i = 0; i < nn; ++i) neg.push_back(double(rng() % 24) / 4.0);
        double brute = 0.0;
        for (double p : pos)
            for (double q : neg) brute += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
        brute /= double(np) * double(nn);
        if (auroc(pos, neg) == brute) ++exact_matches;
    }
    return {exact_matches == trials,
            std::to_string(exact_matches) + "/" + std::to_string(trials) + " exact matches"};
}

std::pair<bool, std::string> c5_table1_ordering() {
    Benchmark& b = benchmark();
    const double d2v_s = method_median(b, "d2v", PredTask::Short);
    const double short_s = method_median(b, "short_only", PredTask::Short);
    const double long_s = method_median(b, "long_only", PredTask::Short);
    const double pca_s = method_median(b, "pca", PredTask::Short);
    const double last_s = method_median(b, "last", PredTask::Short);
    const double d2v_l = method_median(b, "d2v", PredTask::Long);
    const double short_l = method_median(b, "short_only", PredTask::Long);
    const double long_l = method_median(b, "long_only", PredTask::Long);
    const double last_l = method_median(b, "last", PredTask::Long);

    struct Clause {
        const char* name;
        bool ok;
    };
    const Clause clauses[] = {
        {"short: d2v<long_only", d2v_s < long_s},
        {"short: long_only<pca", long_s < pca_s},
        {"short: pca<=last", pca_s <= last_s},
        {"short: d2v<=1.1*short_only", d2v_s <= 1.1 * short_s},
        {"long: d2v<=1.1*long_only", d2v_l <= 1.1 * long_l},
        {"long: d2v<short_only", d2v_l < short_l},
        {"long: short_only<last", short_l < last_l},
    };
    bool all = true;
    std::string fails;
    for (const auto& c : clauses)
        if (!c.ok) {
            all = false;
            fails += std::string(fails.empty() ? "" : ", ") + c.name;
        }
    std::string detail = "medians short[d2v " + fmt(d2v_s) + " short_only " + fmt(short_s) +
                         " long_only " + fmt(long_s) + " pca " + fmt(pca_s) + " last " +
                         fmt(last_s) + "] long[d2v " + fmt(d2v_l) + " short_only " + fmt(short_l) +
                         " long_only " + fmt(long_l) + " last " + fmt(last_l) + "]";
    if (!all) detail += "; failing: " + fails;
    return {all, detail};
}

std::pair<bool, std::string> c6_k_sweep() {
    Benchmark& b = benchmark();
    const std::vector<double> grid = {0.5, 1.0, 2.0, 3.0};
    std::vector<std::vector<double>> per_k(grid.size());
    for (size_t si = 0; si < kSeeds.size(); ++si) {
        HeadConfig hc;
        hc.seed = derive_seed(kSeeds[si], "ksweep-heads");
        auto curve = k_offset_sweep(b.prep, grid, b.seeds[si].d2v_train_embs,
                                    b.seeds[si].d2v_test_embs, hc, b.prep.is_bool);
        for (size_t k = 0; k < grid.size(); ++k) per_k[k].push_back(curve[k].y);
    }
    std::vector<double> med;
    for (auto& v : per_k) med.push_back(median(v));
    bool ok = true;
    std::string detail = "median mse";
    for (size_t k = 0; k < grid.size(); ++k) {
        detail += " K=" + fmt(grid[k]) + ":" + fmt(med[k]);
        if (k > 0 && med[k] < med[k - 1]) ok = false;
    }
    return {ok, detail};
}

std::pair<bool, std::string> c7_size_sweep() {
    Benchmark& b = benchmark();
    std::vector<double> mse2, mse32;
    for (uint64_t seed : kSeeds) {
        auto curve = embed_size_sweep(b.prep, bench_arch(), bench_train(), HeadConfig{}, seed,
                                      {2, 32}, b.fleet.data.schema.hash(), g_threads);
        mse2.push_back(curve[0].y);
        mse32.push_back(curve[1].y);
        std::printf("  size sweep seed %llu: mse(2)=%.5f mse(32)=%.5f\n",
                    (unsigned long long)seed, curve[0].y, curve[1].y);
        std::fflush(stdout);
    }
    const double m2 = median(mse2), m32 = median(mse32);
    return {m2 >= 1.2 * m32,
            "median mse embed2 " + fmt(m2) + " vs embed32 " + fmt(m32) + " (need >= 1.2x)"};
}

std::pair<bool, std::string> c8_driver_id() {
    // Identification needs many sessions per driver so the classifier must
    // generalize across sessions instead of memorizing them; same six
    // style-separated drivers, same total hours, shorter trips.
    SynthConfig id_fleet;
    id_fleet.seed = kFleetSeed;
    id_fleet.sessions_per_driver = 16;
    id_fleet.session_s = 240.0;
    FleetResult fleet = make_fleet(id_fleet);
    SplitSpec split;
    split.seed = derive_seed(kFleetSeed, "split");
    PreparedData p = prepare(fleet.data, split, Horizons{}, 10);
    TrainConfig tc = bench_train();
    tc.seed = derive_seed(kSeeds[0], "train-d2v");
    Drive2VecModel model =
        train_method_model(p, bench_arch(), tc, "d2v", fleet.data.schema.hash());

    DriverIdConfig cfg;
    cfg.seed = derive_seed(kFleetSeed, "driver-id");
    DriverIdResult res = driver_id_experiment(p, window_embeddings(model, p.wtrain),
                                              window_embeddings(model, p.wtest), cfg);
    // identity: micro-F1 equals plain accuracy for single-label predictions
    size_t correct = 0;
    for (size_t i = 0; i < res.test_predictions.size(); ++i)
        correct += res.test_predictions[i] == res.test_labels[i];
    const double accuracy = double(correct) / double(res.test_predictions.size());
    const bool identity = std::abs(res.test_micro_f1 - accuracy) < 1e-12;
    const bool beats = res.test_micro_f1 >= 3.0 * res.weighted_random;
    return {identity && beats, "micro-F1 " + fmt(res.test_micro_f1) + " vs weighted random " +
                                   fmt(res.weighted_random) + " (need 3x), identity " +
                                   (identity ? "exact" : "VIOLATED")};
}

std::pair<bool, std::string> c9_hard_brake() {
    Benchmark& b = benchmark();
    DetectorConfig det;
    std::vector<const Session*> test_sessions;
    for (size_t i : b.prep.split.test) test_sessions.push_back(&b.fleet.data.sessions[i]);
    HardBrakeResult res =
        hard_brake_experiment(test_sessions, b.fleet.data.schema, b.prep.normalizer,
                              b.seeds[0].d2v, det, derive_seed(kFleetSeed, "hard-brake"));

    // ablation: same fleet and training, but slams carry no precursor
    SynthConfig abl_cfg;
    abl_cfg.seed = kFleetSeed;
    abl_cfg.precursors = false;
    FleetResult abl = make_fleet(abl_cfg);
    SplitSpec split;
    split.seed = derive_seed(kFleetSeed, "split");
    PreparedData abl_prep = prepare(abl.data, split, Horizons{}, 10);
    TrainConfig tc = bench_train();
    tc.seed = derive_seed(kSeeds[0], "train-d2v");
    Drive2VecModel abl_model =
        train_method_model(abl_prep, bench_arch(), tc, "d2v", abl.data.schema.hash());
    std::vector<const Session*> abl_test;
    for (size_t i : abl_prep.split.test) abl_test.push_back(&abl.data.sessions[i]);
    HardBrakeResult abl_res =
        hard_brake_experiment(abl_test, abl.data.schema, abl_prep.normalizer, abl_model, det,
                              derive_seed(kFleetSeed, "hard-brake"));

    const bool ok = res.auroc_score > 0.95 && res.auroc_score - abl_res.auroc_score >= 0.2;
    return {ok, "auroc " + fmt(res.auroc_score) + " (" + std::to_string(res.n_events) +
                    " events, " + std::to_string(res.pos_scores.size()) +
                    " positives), ablated " + fmt(abl_res.auroc_score) + " (drop " +
                    fmt(res.auroc_score - abl_res.auroc_score) + ", need >= 0.2)"};
}

std::pair<bool, std::string> c10_maneuvers_tsne() {
    Benchmark& b = benchmark();
    ManeuverStudy study = maneuver_study(b.fleet.data, b.prep, b.seeds[0].d2v, 10, 1000,
                                         derive_seed(kFleetSeed, "maneuvers"));
    const size_t n_events = study.event_embeddings.size();
    Matrix pts(n_events + study.random_embeddings.size(), bench_arch().embed_dim);
    for (size_t i = 0; i < n_events; ++i)
        std::copy(study.event_embeddings[i].begin(), study.event_embeddings[i].end(), pts.row(i));
    for (size_t i = 0; i < study.random_embeddings.size(); ++i)
        std::copy(study.random_embeddings[i].begin(), study.random_embeddings[i].end(),
                  pts.row(n_events + i));

    TsneConfig cfg;
    cfg.seed = derive_seed(kFleetSeed, "tsne");
    TsneResult res = tsne(pts, cfg);
    const bool kl_ok = res.kl_trace.back() < res.kl_trace.front();
    const bool margin_ok = study.margin > 0.1;
    return {kl_ok && margin_ok && pts.rows >= 1000,
            "cosine margin " + fmt(study.margin) + " (intra " + fmt(study.intra_cosine) +
                ", inter " + fmt(study.inter_cosine) + "), tsne on " +
                std::to_string(pts.rows) + " points KL " + fmt(res.kl_trace.front()) + " -> " +
                fmt(res.kl_trace.back())};
}

std::pair<bool, std::string> c11_determinism() {
    // byte-identical fleet files
    SynthConfig mini;
    mini.n_drivers = 2;
    mini.sessions_per_driver = 1;
    mini.session_s = 150.0;
    mini.seed = 3;
    const fs::path d1 = fs::temp_directory_path() / "d2v_accept_f1";
    const fs::path d2 = fs::temp_directory_path() / "d2v_accept_f2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    save_fleet(d1, make_fleet(mini));
    save_fleet(d2, make_fleet(mini));
    bool fleet_ok = true;
    for (const auto& e : fs::directory_iterator(d1)) {
        std::ifstream f1(e.path(), std::ios::binary), f2(d2 / e.path().filename(), std::ios::binary);
        std::string a((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string b((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        if (a != b || a.empty()) fleet_ok = false;
    }
    fs::remove_all(d1);
    fs::remove_all(d2);

    // bit-exact checkpoint round-trip
    Benchmark& b = benchmark();
    const fs::path ckpt = fs::temp_directory_path() / "d2v_accept.ckpt";
    save_checkpoint(ckpt, b.seeds[0].d2v);
    Drive2VecModel loaded = load_checkpoint(ckpt);
    bool ckpt_ok = loaded.param_digest() == b.seeds[0].d2v.param_digest();
    auto la = loaded.arrays();
    auto ma = b.seeds[0].d2v.arrays();
    for (size_t k = 0; k < la.size() && ckpt_ok; ++k)
        for (size_t i = 0; i < la[k]->size(); ++i)
            if ((*la[k])[i] != (*ma[k])[i]) {
                ckpt_ok = false;
                break;
            }
    fs::remove(ckpt);

    // single-threaded seed replay: training, head protocol
    auto subset = [&](const std::vector<WindowSample>& ws, size_t n) {
        return std::vector<WindowSample>(ws.begin(), ws.begin() + std::min(n, ws.size()));
    };
    auto tiny_train = subset(b.prep.wtrain, 1500);
    auto tiny_val = subset(b.prep.wval, 300);
    ArchConfig arch{20, 10, 8, 4};
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 77;
    TrainResult r1 = train(tiny_train, tiny_val, arch, tc, b.prep.is_bool);
    TrainResult r2 = train(tiny_train, tiny_val, arch, tc, b.prep.is_bool);
    bool replay_ok = r1.model.param_digest() == r2.model.param_digest();
    for (size_t i = 0; i < r1.history.size() && replay_ok; ++i)
        replay_ok = r1.history[i].train_loss == r2.history[i].train_loss &&
                    r1.history[i].val_loss == r2.history[i].val_loss;

    HeadConfig hc;
    hc.seed = 5;
    const double h1 = head_protocol_mse(b.seeds[0].d2v_train_embs, b.prep.wtrain,
                                        b.seeds[0].d2v_test_embs, b.prep.wtest, PredTask::Short,
                                        b.prep.is_bool, hc);
    const double h2 = head_protocol_mse(b.seeds[0].d2v_train_embs, b.prep.wtrain,
                                        b.seeds[0].d2v_test_embs, b.prep.wtest, PredTask::Short,
                                        b.prep.is_bool, hc);
    replay_ok = replay_ok && h1 == h2;

    return {fleet_ok && ckpt_ok && replay_ok,
            std::string("fleet bytes ") + (fleet_ok ? "identical" : "DIFFER") + ", checkpoint " +
                (ckpt_ok ? "bit-exact" : "MISMATCH") + ", seed replay " +
                (replay_ok ? "identical" : "DIFFERS")};
}

std::pair<bool, std::string> c12_data_pipeline() {
    // window-count formula vs brute force on 200 random shapes
    ChannelSchema schema;
    schema.channels = {{"f", ChannelKind::Float, false}};
    std::mt19937_64 rng(23);
    size_t matches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const size_t T = 1 + rng() % 1600;
        const size_t stride = 1 + rng() % 40;
        Horizons hz;
        hz.exact1s = rng() % 2;
        hz.avg1s = rng() % 2;
        hz.avg10s = rng() % 2;
        hz.avg100s = rng() % 2;
        Session s;
        s.session_id = "s";
        s.values = Matrix(T, 1);
        const size_t got = extract_windows(s, schema, stride, hz).size();
        size_t brute = 0;
        for (size_t t = 9; t < T; t += stride)
            if (t + hz.max_samples() <= T - 1) ++brute;
        if (got == brute && got == window_count(T, 10, stride, hz.max_samples())) ++matches;
    }

    // session-disjoint splits and train-only normalizer statistics
    Benchmark& b = benchmark();
    bool disjoint = true;
    std::set<size_t> seen;
    for (const auto* bucket : {&b.prep.split.train, &b.prep.split.val, &b.prep.split.test})
        for (size_t idx : *bucket)
            if (!seen.insert(idx).second) disjoint = false;
    disjoint = disjoint && seen.size() == b.fleet.data.sessions.size();

    std::vector<const Session*> train_sessions;
    for (size_t i : b.prep.split.train) train_sessions.push_back(&b.fleet.data.sessions[i]);
    Normalizer from_train = Normalizer::fit(train_sessions, b.fleet.data.schema);
    bool train_only = from_train.mean == b.prep.normalizer.mean &&
                      from_train.stdev == b.prep.normalizer.stdev;

    return {matches == 200 && disjoint && train_only,
            "window-count " + std::to_string(matches) + "/200, splits " +
                (disjoint ? "disjoint" : "OVERLAP") + ", normalizer " +
                (train_only ? "train-only" : "CONTAMINATED")};
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--threads" && i + 1 < argc) g_threads = unsigned(std::stoul(argv[++i]));
    }
    const auto t0 = Clock::now();

    run(1, "gradient correctness (analytic vs finite differences)", c1_gradient_check);
    run(2, "GRU scalar oracle", c2_gru_oracle);
    run(3, "PCA vs dense eigendecomposition oracle", c3_pca_oracle);
    run(4, "AUROC vs pairwise-counting oracle", c4_auroc_oracle);
    run(12, "data-pipeline properties", c12_data_pipeline);
    run(5, "Table-1 method ordering (5-seed median)", c5_table1_ordering);
    run(6, "K-offset sweep nondecreasing", c6_k_sweep);
    run(7, "embedding-size effect (2 vs 32)", c7_size_sweep);
    run(8, "driver identification", c8_driver_id);
    run(9, "hard-brake detector and precursor ablation", c9_hard_brake);
    run(10, "maneuver separability and t-SNE emission", c10_maneuvers_tsne);
    run(11, "determinism and persistence", c11_determinism);

    std::printf("acceptance finished in %.0fs: %d criterion(s) failed\n",
                std::chrono::duration<double>(Clock::now() - t0).count(), g_failures);
    return g_failures;
}
