// Command-line front end: synthetic fleets, training, embeddings, and the
// evaluation/case-study pipelines. Every command stamps its outputs with the
// config digest and writes a manifest.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "d2v/d2v.hpp"

namespace fs = std::filesystem;
using namespace d2v;
using Clock = std::chrono::steady_clock;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    uint64_t seed = 0;
    bool seed_set = false;
    unsigned threads = 1;
};

ExperimentConfig load_config(const CommonArgs& args) {
    nlohmann::json j = nlohmann::json::object();
    if (!args.config_path.empty()) {
        std::ifstream f(args.config_path);
        if (!f) throw ConfigError("cannot open config " + args.config_path);
        j = nlohmann::json::parse(f);
    }
    if (args.seed_set) j["seed"] = args.seed;
    if (args.threads) j["threads"] = args.threads;
    return ExperimentConfig::from_json(j);
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON experiment config");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "seed override")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--threads", args.threads, "worker threads for sweeps");
}

double elapsed_s(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_split(const fs::path& path, const Dataset& data, const Split& split, uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    auto ids = [&](const std::vector<size_t>& idxs) {
        std::vector<std::string> out;
        for (size_t i : idxs) out.push_back(data.sessions[i].session_id);
        return out;
    };
    j["train"] = ids(split.train);
    j["val"] = ids(split.val);
    j["test"] = ids(split.test);
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

Split read_split(const fs::path& path, const Dataset& data) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open split file " + path.string());
    nlohmann::json j = nlohmann::json::parse(f);
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < data.sessions.size(); ++i) index[data.sessions[i].session_id] = i;
    Split split;
    auto fill = [&](const char* key, std::vector<size_t>& out) {
        for (const auto& id : j.at(key)) {
            auto it = index.find(id.get<std::string>());
            if (it == index.end())
                throw DataError("split references unknown session " + id.get<std::string>());
            out.push_back(it->second);
        }
    };
    fill("train", split.train);
    fill("val", split.val);
    fill("test", split.test);
    return split;
}

// Recreates prepared windows for a data dir with a stored split and normalizer.
PreparedData prepare_from_artifacts(const Dataset& data, const Split& split, const Normalizer& nz,
                                    const Horizons& hz, size_t stride) {
    PreparedData p;
    p.split = split;
    p.normalizer = nz;
    p.normalized.schema = data.schema;
    for (const auto& s : data.sessions) {
        p.normalized.sessions.push_back(nz.apply(s, data.schema));
        p.session_driver[s.session_id] = s.driver_id;
    }
    p.is_bool = data.schema.model_is_bool();
    auto collect = [&](const std::vector<size_t>& idxs, std::vector<WindowSample>& out,
                       std::set<std::string>& ids) {
        for (size_t i : idxs) {
            auto ws = extract_windows(p.normalized.sessions[i], data.schema, stride, hz);
            ids.insert(data.sessions[i].session_id);
            for (auto& w : ws) out.push_back(std::move(w));
        }
    };
    collect(split.train, p.wtrain, p.train_ids);
    collect(split.val, p.wval, p.val_ids);
    collect(split.test, p.wtest, p.test_ids);
    check_no_contamination(p.train_ids, p.test_ids);
    return p;
}

struct TrainedArtifacts {
    Drive2VecModel model;
    Normalizer normalizer;
    Split split;
};

TrainedArtifacts load_artifacts(const std::string& model_dir, const Dataset& data) {
    TrainedArtifacts a;
    a.model = load_checkpoint(fs::path(model_dir) / "checkpoint.d2v");
    std::ifstream nf(fs::path(model_dir) / "normalizer.json");
    if (!nf) throw DataError("missing normalizer.json in " + model_dir);
    a.normalizer = Normalizer::from_json(nlohmann::json::parse(nf));
    a.split = read_split(fs::path(model_dir) / "split.json", data);
    if (a.model.schema_hash != data.schema.hash())
        throw ContaminationError("checkpoint schema hash does not match the data directory");
    return a;
}

// Joins an embeddings artifact back onto freshly extracted windows.
std::vector<Vec> join_embeddings(const std::vector<EmbeddingRow>& rows,
                                 const std::vector<WindowSample>& ws) {
    std::map<std::pair<std::string, size_t>, const Vec*> index;
    for (const auto& r : rows) index[{r.session_id, r.t}] = &r.e;
    std::vector<Vec> out;
    out.reserve(ws.size());
    for (const auto& w : ws) {
        auto it = index.find({w.session_id, w.t});
        if (it == index.end())
            throw DataError("embeddings artifact is missing window " + w.session_id + "@" +
                            std::to_string(w.t));
        out.push_back(*it->second);
    }
    return out;
}

int cmd_synth(const CommonArgs& args) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    FleetResult fleet = make_fleet(cfg.synth);
    fs::create_directories(args.out_dir);
    save_fleet(args.out_dir, fleet);
    write_manifest(args.out_dir, "synth", {{"sessions", fleet.data.sessions.size()}},
                   cfg.digest(), cfg.seed, elapsed_s(t0));
    std::cout << "wrote " << fleet.data.sessions.size() << " sessions, " << fleet.events.size()
              << " events to " << args.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir, const std::string& method) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    fs::create_directories(args.out_dir);

    Horizons hz;
    hz.k_grid = cfg.k_grid;
    PreparedData p = prepare(data, cfg.split, hz, cfg.stride);

    ArchConfig arch = cfg.arch;
    arch.input_dim = data.schema.dim();
    TrainConfig tc = cfg.train_cfg;
    tc.mask = mask_for_method(method);
    tc.seed = derive_seed(cfg.seed, "train-" + method);

    std::vector<EpochStats> history;
    Drive2VecModel model = train_method_model(p, arch, tc, method, data.schema.hash(), &history);

    nlohmann::json meta;
    meta["method"] = method;
    meta["train_digest"] = to_hex(tc.digest());
    meta["config_digest"] = to_hex(cfg.digest());
    meta["seed"] = cfg.seed;
    meta["normalizer_ref"] = "normalizer.json";
    save_checkpoint(fs::path(args.out_dir) / "checkpoint.d2v", model, meta);
    {
        std::ofstream f(fs::path(args.out_dir) / "normalizer.json");
        f << p.normalizer.to_json().dump(2) << "\n";
    }
    write_split(fs::path(args.out_dir) / "split.json", data, p.split, cfg.split.seed);
    {
        std::ofstream f(fs::path(args.out_dir) / "history.csv");
        f << "epoch,train_loss,val_loss\n";
        for (const auto& e : history)
            f << e.epoch << "," << e.train_loss << "," << e.val_loss << "\n";
    }
    write_manifest(args.out_dir, "train",
                   {{"data", data_dir}, {"method", method}, {"epochs_run", history.size()}},
                   cfg.digest(), cfg.seed, elapsed_s(t0));
    std::cout << "trained " << method << " (" << history.size() << " epochs), checkpoint in "
              << args.out_dir << "\n";
    return 0;
}

int cmd_embed(const CommonArgs& args, const std::string& data_dir, const std::string& model_dir,
              size_t stride) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    TrainedArtifacts a = load_artifacts(model_dir, data);

    fs::create_directories(args.out_dir);
    std::vector<EmbeddingRow> rows;
    ModelCache cache;
    for (const auto& s : data.sessions) {
        Session norm = a.normalizer.apply(s, data.schema);
        for (auto& w : extract_windows(norm, data.schema, stride, Horizons::none()))
            rows.push_back({w.session_id, w.t, forward_embed(a.model, w.input, cache)});
    }
    EmbeddingsMeta meta;
    meta.schema_hash = data.schema.hash();
    meta.model_digest = a.model.param_digest();
    meta.config_digest = cfg.digest();
    meta.stride = stride;
    meta.dim = a.model.arch.embed_dim;
    write_embeddings_csv(fs::path(args.out_dir) / "embeddings.csv", rows, meta);
    write_manifest(args.out_dir, "embed",
                   {{"data", data_dir}, {"model", model_dir}, {"rows", rows.size()}}, cfg.digest(),
                   cfg.seed, elapsed_s(t0));
    std::cout << "wrote " << rows.size() << " embeddings\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& data_dir, const std::string& model_dir,
             const std::string& emb_path) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    TrainedArtifacts a = load_artifacts(model_dir, data);

    auto [rows, emeta] = read_embeddings_csv(emb_path);
    if (emeta.schema_hash != data.schema.hash())
        throw ContaminationError("embeddings were computed for a different schema");
    if (emeta.model_digest != a.model.param_digest())
        throw ContaminationError("embeddings were computed by a different model");

    Horizons hz;
    hz.k_grid = cfg.k_grid;
    PreparedData p = prepare_from_artifacts(data, a.split, a.normalizer, hz, emeta.stride);

    auto train_embs = join_embeddings(rows, p.wtrain);
    auto test_embs = join_embeddings(rows, p.wtest);

    HeadConfig hc = cfg.head;
    fs::create_directories(args.out_dir);
    std::ofstream rep(fs::path(args.out_dir) / "report.csv");
    rep << "method,task,mse,config_digest\n";

    MetricReport short_rep;
    const double model_short = head_protocol_mse(train_embs, p.wtrain, test_embs, p.wtest,
                                                 PredTask::Short, p.is_bool, hc, &short_rep);
    const double model_long = head_protocol_mse(train_embs, p.wtrain, test_embs, p.wtest,
                                                PredTask::Long, p.is_bool, hc);
    rep << "model,short," << model_short << "," << to_hex(cfg.digest()) << "\n";
    rep << "model,long," << model_long << "," << to_hex(cfg.digest()) << "\n";

    const PcaModel pca = fit_pca_baseline(p.wtrain, a.model.arch.embed_dim);
    const auto pca_train = pca_window_embeddings(pca, p.wtrain);
    const auto pca_test = pca_window_embeddings(pca, p.wtest);
    rep << "pca,short,"
        << head_protocol_mse(pca_train, p.wtrain, pca_test, p.wtest, PredTask::Short, p.is_bool, hc)
        << "," << to_hex(cfg.digest()) << "\n";
    rep << "pca,long,"
        << head_protocol_mse(pca_train, p.wtrain, pca_test, p.wtest, PredTask::Long, p.is_bool, hc)
        << "," << to_hex(cfg.digest()) << "\n";
    rep << "last,short," << last_timestep_mse(p.wtest, PredTask::Short) << ","
        << to_hex(cfg.digest()) << "\n";
    rep << "last,long," << last_timestep_mse(p.wtest, PredTask::Long) << "," << to_hex(cfg.digest())
        << "\n";

    // per-channel breakdown for the model's short task, worst first
    std::ofstream pc(fs::path(args.out_dir) / "per_channel.csv");
    pc << "rank,channel,short_mse,config_digest\n";
    const auto cols = data.schema.model_columns();
    for (size_t r = 0; r < short_rep.ranking.size(); ++r) {
        const size_t j = short_rep.ranking[r];
        pc << r << "," << data.schema.channels[cols[j]].name << "," << short_rep.per_channel[j]
           << "," << to_hex(cfg.digest()) << "\n";
    }
    write_manifest(args.out_dir, "eval", {{"data", data_dir}, {"embeddings", emb_path}},
                   cfg.digest(), cfg.seed, elapsed_s(t0));
    std::cout << "model short " << model_short << " long " << model_long << "\n";
    return 0;
}

int cmd_sweep_k(const CommonArgs& args, const std::string& data_dir, const std::string& model_dir,
                const std::string& emb_path) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    TrainedArtifacts a = load_artifacts(model_dir, data);
    auto [rows, emeta] = read_embeddings_csv(emb_path);
    if (emeta.schema_hash != data.schema.hash())
        throw ContaminationError("embeddings were computed for a different schema");
    if (emeta.model_digest != a.model.param_digest())
        throw ContaminationError("embeddings were computed by a different model");

    Horizons hz;
    hz.k_grid = cfg.k_grid;
    PreparedData p = prepare_from_artifacts(data, a.split, a.normalizer, hz, emeta.stride);
    auto train_embs = join_embeddings(rows, p.wtrain);
    auto test_embs = join_embeddings(rows, p.wtest);

    auto curve = k_offset_sweep(p, cfg.k_grid, train_embs, test_embs, cfg.head, p.is_bool);
    fs::create_directories(args.out_dir);
    write_curve_csv(fs::path(args.out_dir) / "k_sweep.csv", "k_seconds", curve, "model",
                    cfg.digest(), cfg.seed);
    write_manifest(args.out_dir, "sweep-k", {{"data", data_dir}, {"embeddings", emb_path}},
                   cfg.digest(), cfg.seed, elapsed_s(t0));
    for (const auto& pt : curve) std::cout << "K=" << pt.x << "s mse " << pt.y << "\n";
    return 0;
}

int cmd_sweep_size(const CommonArgs& args, const std::string& data_dir) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    PreparedData p = prepare(data, cfg.split, Horizons{}, cfg.stride);
    ArchConfig arch = cfg.arch;
    arch.input_dim = data.schema.dim();
    auto curve = embed_size_sweep(p, arch, cfg.train_cfg, cfg.head, cfg.seed, cfg.sweep_sizes,
                                  data.schema.hash(), cfg.threads);
    fs::create_directories(args.out_dir);
    write_curve_csv(fs::path(args.out_dir) / "size_sweep.csv", "embed_dim", curve, "d2v",
                    cfg.digest(), cfg.seed);
    write_manifest(args.out_dir, "sweep-size", {{"data", data_dir}}, cfg.digest(), cfg.seed,
                   elapsed_s(t0));
    for (const auto& pt : curve) std::cout << "size " << pt.x << " mse " << pt.y << "\n";
    return 0;
}

int cmd_driver_id(const CommonArgs& args, const std::string& data_dir,
                  const std::string& model_dir, const std::string& emb_path) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    TrainedArtifacts a = load_artifacts(model_dir, data);
    auto [rows, emeta] = read_embeddings_csv(emb_path);
    if (emeta.schema_hash != data.schema.hash())
        throw ContaminationError("embeddings were computed for a different schema");
    if (emeta.model_digest != a.model.param_digest())
        throw ContaminationError("embeddings were computed by a different model");

    PreparedData p = prepare_from_artifacts(data, a.split, a.normalizer, Horizons{}, emeta.stride);
    auto train_embs = join_embeddings(rows, p.wtrain);
    auto test_embs = join_embeddings(rows, p.wtest);
    DriverIdResult res = driver_id_experiment(p, train_embs, test_embs, cfg.driver);

    fs::create_directories(args.out_dir);
    std::ofstream rep(fs::path(args.out_dir) / "driver_id.csv");
    rep << "metric,value,config_digest\n";
    rep << "micro_f1," << res.test_micro_f1 << "," << to_hex(cfg.digest()) << "\n";
    rep << "weighted_random," << res.weighted_random << "," << to_hex(cfg.digest()) << "\n";
    rep << "n_classes," << res.model.classes.size() << "," << to_hex(cfg.digest()) << "\n";
    write_manifest(args.out_dir, "driver-id", {{"data", data_dir}, {"embeddings", emb_path}},
                   cfg.digest(), cfg.seed, elapsed_s(t0));
    std::cout << "micro-F1 " << res.test_micro_f1 << " vs weighted random " << res.weighted_random
              << "\n";
    return 0;
}

int cmd_detect(const CommonArgs& args, const std::string& data_dir, const std::string& model_dir) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    TrainedArtifacts a = load_artifacts(model_dir, data);

    std::vector<const Session*> test_sessions;
    for (size_t i : a.split.test) test_sessions.push_back(&data.sessions[i]);
    HardBrakeResult res = hard_brake_experiment(test_sessions, data.schema, a.normalizer, a.model,
                                                cfg.detector, derive_seed(cfg.seed, "detect"));

    fs::create_directories(args.out_dir);
    {
        std::ofstream rep(fs::path(args.out_dir) / "hard_brake.csv");
        rep << "metric,value,config_digest\n";
        rep << "auroc," << std::setprecision(10) << res.auroc_score << "," << to_hex(cfg.digest())
            << "\n";
        rep << "n_events," << res.n_events << "," << to_hex(cfg.digest()) << "\n";
        rep << "n_positives," << res.pos_scores.size() << "," << to_hex(cfg.digest()) << "\n";
        rep << "n_negatives," << res.neg_scores.size() << "," << to_hex(cfg.digest()) << "\n";
    }
    {
        std::ofstream f(fs::path(args.out_dir) / "top_negatives.csv");
        f << "session_id,t,cosine,channel_diff\n";
        for (const auto& n : res.top_negatives)
            f << n.session_id << "," << n.t << "," << n.score << "," << n.channel_diff << "\n";
    }
    {
        std::ofstream f(fs::path(args.out_dir) / "roc_points.csv");
        f << "threshold,tpr,fpr\n";
        std::vector<double> all = res.pos_scores;
        all.insert(all.end(), res.neg_scores.begin(), res.neg_scores.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        const size_t step = std::max<size_t>(1, all.size() / 200);
        for (size_t i = 0; i < all.size(); i += step) {
            const double thr = all[i];
            size_t tp = 0, fp = 0;
            for (double s : res.pos_scores) tp += s >= thr;
            for (double s : res.neg_scores) fp += s >= thr;
            f << thr << "," << double(tp) / double(res.pos_scores.size()) << ","
              << double(fp) / double(res.neg_scores.size()) << "\n";
        }
    }
    write_manifest(args.out_dir, "detect", {{"data", data_dir}, {"model", model_dir}},
                   cfg.digest(), cfg.seed, elapsed_s(t0));
    std::cout << "hard-brake AUROC " << res.auroc_score << " over " << res.n_events << " events\n";
    return 0;
}

int cmd_project(const CommonArgs& args, const std::string& data_dir, const std::string& model_dir,
                const std::string& session_id) {
    auto t0 = Clock::now();
    ExperimentConfig cfg = load_config(args);
    Dataset data = load_sessions(data_dir);
    TrainedArtifacts a = load_artifacts(model_dir, data);

    PreparedData p = prepare_from_artifacts(data, a.split, a.normalizer, Horizons{}, cfg.stride);

    ManeuverStudy study = maneuver_study(data, p, a.model, cfg.detector.top_k, 1000,
                                         derive_seed(cfg.seed, "project"));
    const size_t n_events = study.event_embeddings.size();
    Matrix pts(n_events + study.random_embeddings.size(), a.model.arch.embed_dim);
    for (size_t i = 0; i < n_events; ++i)
        std::copy(study.event_embeddings[i].begin(), study.event_embeddings[i].end(), pts.row(i));
    for (size_t i = 0; i < study.random_embeddings.size(); ++i)
        std::copy(study.random_embeddings[i].begin(), study.random_embeddings[i].end(),
                  pts.row(n_events + i));
    TsneConfig tsne_cfg;
    tsne_cfg.seed = derive_seed(cfg.seed, "tsne");
    TsneResult tsne_res = tsne(pts, tsne_cfg);

    fs::create_directories(args.out_dir);
    {
        std::ofstream f(fs::path(args.out_dir) / "tsne.csv");
        f << "x,y,label,config_digest\n";
        for (size_t i = 0; i < pts.rows; ++i) {
            const std::string label = i < n_events ? study.events[i].kind : "random";
            f << tsne_res.y(i, 0) << "," << tsne_res.y(i, 1) << "," << label << ","
              << to_hex(cfg.digest()) << "\n";
        }
    }
    {
        std::ofstream f(fs::path(args.out_dir) / "tsne_kl.csv");
        f << "iter,kl\n";
        for (size_t i = 0; i < tsne_res.kl_trace.size(); ++i)
            f << i << "," << tsne_res.kl_trace[i] << "\n";
    }

    const Session* target = nullptr;
    if (session_id.empty()) {
        if (a.split.test.empty()) throw DataError("no test sessions for the track");
        target = &p.normalized.sessions[a.split.test.front()];
    } else {
        for (size_t i = 0; i < data.sessions.size(); ++i)
            if (data.sessions[i].session_id == session_id) target = &p.normalized.sessions[i];
        if (!target) throw DataError("unknown session " + session_id);
    }
    RgbTrack track = session_rgb_track(*target, data.schema, a.model, 1);
    {
        std::ofstream f(fs::path(args.out_dir) / "track_rgb.csv");
        f << "t,lat,lon,r,g,b\n";
        for (size_t i = 0; i < track.points.size(); ++i) {
            const auto& pt = track.points[i];
            f << track.t[i] << "," << pt.lat << "," << pt.lon << "," << pt.r << "," << pt.g << ","
              << pt.b << "\n";
        }
    }
    write_manifest(args.out_dir, "project",
                   {{"data", data_dir}, {"model", model_dir}, {"events", n_events}}, cfg.digest(),
                   cfg.seed, elapsed_s(t0));
    std::cout << "maneuver margin " << study.margin << ", tsne KL " << tsne_res.kl_trace.front()
              << " -> " << tsne_res.kl_trace.back() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiscale state-space embeddings for vehicle sensor streams"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string data_dir, model_dir, emb_path, method = "d2v", session_id;
    size_t stride = 10;

    auto* synth = app.add_subcommand("synth", "generate a synthetic driving fleet");
    add_common(synth, args);

    auto* train = app.add_subcommand("train", "train the embedding network or an ablation");
    add_common(train, args);
    train->add_option("--data", data_dir, "fleet directory")->required();
    train->add_option("--method", method, "d2v | short_only | long_only");

    auto* embed = app.add_subcommand("embed", "write the shared embeddings artifact");
    add_common(embed, args);
    embed->add_option("--data", data_dir)->required();
    embed->add_option("--model", model_dir, "training output directory")->required();
    embed->add_option("--stride", stride, "window stride in samples");

    auto* eval = app.add_subcommand("eval", "short/long prediction report with baselines");
    add_common(eval, args);
    eval->add_option("--data", data_dir)->required();
    eval->add_option("--model", model_dir)->required();
    eval->add_option("--emb", emb_path, "embeddings.csv path")->required();

    auto* sweepk = app.add_subcommand("sweep-k", "exact-offset MSE curve over the K grid");
    add_common(sweepk, args);
    sweepk->add_option("--data", data_dir)->required();
    sweepk->add_option("--model", model_dir)->required();
    sweepk->add_option("--emb", emb_path)->required();

    auto* sweeps = app.add_subcommand("sweep-size", "short-task MSE vs embedding size");
    add_common(sweeps, args);
    sweeps->add_option("--data", data_dir)->required();

    auto* driver = app.add_subcommand("driver-id", "driver identification report");
    add_common(driver, args);
    driver->add_option("--data", data_dir)->required();
    driver->add_option("--model", model_dir)->required();
    driver->add_option("--emb", emb_path)->required();

    auto* detect = app.add_subcommand("detect", "hard-brake similarity study");
    add_common(detect, args);
    detect->add_option("--data", data_dir)->required();
    detect->add_option("--model", model_dir)->required();

    auto* project = app.add_subcommand("project", "t-SNE and RGB track emissions");
    add_common(project, args);
    project->add_option("--data", data_dir)->required();
    project->add_option("--model", model_dir)->required();
    project->add_option("--session", session_id, "session for the RGB track");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(args);
        if (train->parsed()) return cmd_train(args, data_dir, method);
        if (embed->parsed()) return cmd_embed(args, data_dir, model_dir, stride);
        if (eval->parsed()) return cmd_eval(args, data_dir, model_dir, emb_path);
        if (sweepk->parsed()) return cmd_sweep_k(args, data_dir, model_dir, emb_path);
        if (sweeps->parsed()) return cmd_sweep_size(args, data_dir);
        if (driver->parsed()) return cmd_driver_id(args, data_dir, model_dir, emb_path);
        if (detect->parsed()) return cmd_detect(args, data_dir, model_dir);
        if (project->parsed()) return cmd_project(args, data_dir, model_dir, session_id);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ContaminationError& e) {
        std::cerr << "contamination error: " << e.what() << "\n";
        return 5;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
