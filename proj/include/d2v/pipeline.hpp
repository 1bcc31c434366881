#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "d2v/analytics.hpp"
#include "d2v/baselines.hpp"
#include "d2v/data.hpp"
#include "d2v/model.hpp"
#include "d2v/synth.hpp"
#include "d2v/tasks.hpp"

namespace d2v {

// ---------------------------------------------------------------------------
// Experiment configuration. One config drives the whole pipeline; its digest
// is stamped into every artifact.

struct ExperimentConfig {
    SynthConfig synth;
    SplitSpec split;
    size_t stride = 10;
    std::vector<double> k_grid = {0.5, 1.0, 2.0, 3.0};
    ArchConfig arch{0, 10, 32, 16};  // input_dim comes from the schema
    TrainConfig train_cfg;
    HeadConfig head;
    DriverIdConfig driver;
    DetectorConfig detector;
    std::vector<size_t> sweep_sizes = {2, 8, 32};
    uint64_t seed = 0;
    unsigned threads = 1;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["stride"] = stride;
        j["k_grid"] = k_grid;
        j["sweep_sizes"] = sweep_sizes;
        j["synth"] = synth.to_json();
        j["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
        j["arch"] = {{"window_len", arch.window_len},
                     {"gru_hidden", arch.gru_hidden},
                     {"embed_dim", arch.embed_dim}};
        j["train"] = train_cfg.to_json();
        j["head"] = head.to_json();
        j["driver"] = {{"hidden", driver.hidden}, {"lr", driver.lr}, {"epochs", driver.epochs}};
        j["detector"] = {{"channel", detector.channel},
                         {"epsilon", detector.epsilon},
                         {"window", detector.window},
                         {"top_k", detector.top_k},
                         {"train_fraction", detector.train_fraction}};
        return j;
    }

    uint64_t digest() const { return fnv1a64(to_json().dump()); }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        c.seed = j.value("seed", uint64_t(0));
        c.stride = j.value("stride", size_t(10));
        if (j.contains("k_grid")) c.k_grid = j["k_grid"].get<std::vector<double>>();
        if (j.contains("sweep_sizes")) c.sweep_sizes = j["sweep_sizes"].get<std::vector<size_t>>();
        if (j.contains("synth")) {
            const auto& s = j["synth"];
            c.synth.n_drivers = s.value("n_drivers", c.synth.n_drivers);
            c.synth.sessions_per_driver = s.value("sessions_per_driver", c.synth.sessions_per_driver);
            c.synth.session_s = s.value("session_s", c.synth.session_s);
            c.synth.seed = s.value("seed", c.seed);
            c.synth.slam_rate_per_hour = s.value("slam_rate_per_hour", c.synth.slam_rate_per_hour);
            c.synth.gas_slam_rate_per_hour =
                s.value("gas_slam_rate_per_hour", c.synth.gas_slam_rate_per_hour);
            c.synth.precursors = s.value("precursors", true);
        } else {
            c.synth.seed = c.seed;
        }
        if (j.contains("split")) {
            const auto& s = j["split"];
            c.split.train = s.value("train", 0.8);
            c.split.val = s.value("val", 0.1);
            c.split.test = s.value("test", 0.1);
        }
        c.split.seed = derive_seed(c.seed, "split");
        if (j.contains("arch")) {
            const auto& a = j["arch"];
            c.arch.window_len = a.value("window_len", size_t(10));
            c.arch.gru_hidden = a.value("gru_hidden", size_t(32));
            c.arch.embed_dim = a.value("embed_dim", size_t(16));
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            c.train_cfg.epochs = t.value("epochs", c.train_cfg.epochs);
            c.train_cfg.batch_size = t.value("batch_size", c.train_cfg.batch_size);
            c.train_cfg.lr = t.value("lr", c.train_cfg.lr);
            c.train_cfg.patience = t.value("patience", c.train_cfg.patience);
            c.train_cfg.clip_norm = t.value("clip_norm", c.train_cfg.clip_norm);
        }
        c.train_cfg.seed = c.seed;
        if (j.contains("head")) {
            const auto& h = j["head"];
            c.head.lr = h.value("lr", c.head.lr);
            c.head.epochs = h.value("epochs", c.head.epochs);
            c.head.batch_size = h.value("batch_size", c.head.batch_size);
            c.head.patience = h.value("patience", c.head.patience);
        }
        c.head.seed = derive_seed(c.seed, "head");
        c.driver.seed = derive_seed(c.seed, "driver");
        if (j.contains("detector")) {
            const auto& d = j["detector"];
            c.detector.channel = d.value("channel", c.detector.channel);
            c.detector.epsilon = d.value("epsilon", c.detector.epsilon);
            c.detector.window = d.value("window", c.detector.window);
            c.detector.top_k = d.value("top_k", c.detector.top_k);
            c.detector.train_fraction = d.value("train_fraction", c.detector.train_fraction);
        }
        c.threads = j.value("threads", 1u);
        return c;
    }
};

// ---------------------------------------------------------------------------
// Data preparation: split, fit normalizer on the training split only,
// normalize, extract windows.

struct PreparedData {
    Split split;
    Normalizer normalizer;
    Dataset normalized;  // same session order as the raw dataset
    std::vector<WindowSample> wtrain, wval, wtest;
    std::vector<bool> is_bool;
    std::map<std::string, std::string> session_driver;
    std::set<std::string> train_ids, val_ids, test_ids;
};

inline PreparedData prepare(const Dataset& raw, const SplitSpec& spec, const Horizons& hz,
                            size_t stride) {
    PreparedData p;
    p.split = split_by_session(raw.sessions, spec);
    std::vector<const Session*> train_sessions;
    for (size_t i : p.split.train) train_sessions.push_back(&raw.sessions[i]);
    p.normalizer = Normalizer::fit(train_sessions, raw.schema);

    p.normalized.schema = raw.schema;
    for (const auto& s : raw.sessions) {
        p.normalized.sessions.push_back(p.normalizer.apply(s, raw.schema));
        p.session_driver[s.session_id] = s.driver_id;
    }
    p.is_bool = raw.schema.model_is_bool();

    auto collect = [&](const std::vector<size_t>& idxs, std::vector<WindowSample>& out,
                       std::set<std::string>& ids) {
        for (size_t i : idxs) {
            auto ws = extract_windows(p.normalized.sessions[i], raw.schema, stride, hz);
            ids.insert(raw.sessions[i].session_id);
            for (auto& w : ws) out.push_back(std::move(w));
        }
    };
    collect(p.split.train, p.wtrain, p.train_ids);
    collect(p.split.val, p.wval, p.val_ids);
    collect(p.split.test, p.wtest, p.test_ids);
    check_no_contamination(p.train_ids, p.test_ids);
    return p;
}

enum class PredTask { Short, Long };

inline const Vec& task_target(const WindowSample& w, PredTask t) {
    return t == PredTask::Short ? w.exact1s : w.avg100s;
}

inline std::vector<Vec> window_embeddings(const Drive2VecModel& m,
                                          const std::vector<WindowSample>& ws) {
    std::vector<Vec> out;
    out.reserve(ws.size());
    ModelCache cache;
    for (const auto& w : ws) out.push_back(forward_embed(m, w.input, cache));
    return out;
}

inline std::vector<Vec> pca_window_embeddings(const PcaModel& pca,
                                              const std::vector<WindowSample>& ws) {
    std::vector<Vec> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(pca_embed(pca, last_timestep_predict(w.input)));
    return out;
}

// PCA trained on the most recent timestep of each training window.
inline PcaModel fit_pca_baseline(const std::vector<WindowSample>& wtrain, size_t k) {
    if (wtrain.empty()) throw DataError("fit_pca_baseline: empty training windows");
    const size_t D = wtrain.front().input.cols;
    Matrix rows(wtrain.size(), D);
    for (size_t i = 0; i < wtrain.size(); ++i) {
        const Vec last = last_timestep_predict(wtrain[i].input);
        std::copy(last.begin(), last.end(), rows.row(i));
    }
    return pca_fit(rows, k);
}

// ---------------------------------------------------------------------------
// Head protocol on top of fixed embeddings.

inline std::vector<Vec> task_targets(const std::vector<WindowSample>& ws, PredTask t) {
    std::vector<Vec> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(task_target(w, t));
    return out;
}

inline double head_protocol_mse(const std::vector<Vec>& train_embs,
                                const std::vector<WindowSample>& wtrain,
                                const std::vector<Vec>& test_embs,
                                const std::vector<WindowSample>& wtest, PredTask task,
                                const std::vector<bool>& is_bool, const HeadConfig& cfg,
                                MetricReport* detail = nullptr) {
    const TaskKind kind = task == PredTask::Short ? TaskKind::ExactValues : TaskKind::Averages;
    RegressionHead head =
        train_head(train_embs, task_targets(wtrain, task), kind, is_bool, cfg);
    MetricReport rep = eval_prediction(head, test_embs, task_targets(wtest, task));
    if (detail) *detail = rep;
    return rep.overall_mse;
}

// Last-timestep needs no head: the prediction is the repeated reading.
inline double last_timestep_mse(const std::vector<WindowSample>& wtest, PredTask task,
                                MetricReport* detail = nullptr) {
    std::vector<Vec> preds, targets;
    preds.reserve(wtest.size());
    for (const auto& w : wtest) {
        preds.push_back(last_timestep_predict(w.input));
        targets.push_back(task_target(w, task));
    }
    MetricReport rep = per_channel_mse(preds, targets);
    if (detail) *detail = rep;
    return rep.overall_mse;
}

// ---------------------------------------------------------------------------
// Table-1 style comparison for one seed.

struct MethodScores {
    double short_mse = 0.0;
    double long_mse = 0.0;
};

inline LossMask mask_for_method(const std::string& method) {
    if (method == "d2v") return LossMask::all();
    if (method == "short_only") return LossMask::short_only();
    if (method == "long_only") return LossMask::long_only();
    throw ConfigError("unknown method '" + method + "'");
}

inline Drive2VecModel train_method_model(const PreparedData& p, const ArchConfig& arch_base,
                                         TrainConfig cfg, const std::string& method,
                                         uint64_t schema_hash,
                                         std::vector<EpochStats>* history = nullptr) {
    ArchConfig arch = arch_base;
    arch.input_dim = p.is_bool.size();
    cfg.mask = mask_for_method(method);
    TrainResult tr = train(p.wtrain, p.wval, arch, cfg, p.is_bool, schema_hash);
    if (history) *history = tr.history;
    return std::move(tr.model);
}

struct Table1SeedResult {
    std::map<std::string, MethodScores> scores;
    Drive2VecModel d2v;  // kept for downstream tasks sharing the representation
    std::vector<Vec> d2v_train_embs, d2v_test_embs;
};

inline Table1SeedResult table1_single_seed(const PreparedData& p, const ArchConfig& arch_base,
                                           const TrainConfig& train_base,
                                           const HeadConfig& head_base, uint64_t seed,
                                           uint64_t schema_hash, unsigned threads = 1) {
    Table1SeedResult out;
    const std::vector<std::string> nets = {"d2v", "short_only", "long_only"};
    std::vector<Drive2VecModel> models(nets.size());
    std::vector<std::pair<std::vector<Vec>, std::vector<Vec>>> embs(nets.size());

    parallel_for(nets.size(), threads, [&](size_t i) {
        TrainConfig cfg = train_base;
        cfg.seed = derive_seed(seed, "train-" + nets[i]);
        models[i] = train_method_model(p, arch_base, cfg, nets[i], schema_hash);
        embs[i] = {window_embeddings(models[i], p.wtrain), window_embeddings(models[i], p.wtest)};
    });

    HeadConfig hc = head_base;
    hc.seed = derive_seed(seed, "heads");
    for (size_t i = 0; i < nets.size(); ++i) {
        MethodScores s;
        s.short_mse = head_protocol_mse(embs[i].first, p.wtrain, embs[i].second, p.wtest,
                                        PredTask::Short, p.is_bool, hc);
        s.long_mse = head_protocol_mse(embs[i].first, p.wtrain, embs[i].second, p.wtest,
                                       PredTask::Long, p.is_bool, hc);
        out.scores[nets[i]] = s;
    }
    out.d2v = std::move(models[0]);
    out.d2v_train_embs = std::move(embs[0].first);
    out.d2v_test_embs = std::move(embs[0].second);

    const PcaModel pca = fit_pca_baseline(p.wtrain, arch_base.embed_dim);
    const auto pca_train = pca_window_embeddings(pca, p.wtrain);
    const auto pca_test = pca_window_embeddings(pca, p.wtest);
    MethodScores ps;
    ps.short_mse =
        head_protocol_mse(pca_train, p.wtrain, pca_test, p.wtest, PredTask::Short, p.is_bool, hc);
    ps.long_mse =
        head_protocol_mse(pca_train, p.wtrain, pca_test, p.wtest, PredTask::Long, p.is_bool, hc);
    out.scores["pca"] = ps;

    MethodScores ls;
    ls.short_mse = last_timestep_mse(p.wtest, PredTask::Short);
    ls.long_mse = last_timestep_mse(p.wtest, PredTask::Long);
    out.scores["last"] = ls;
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw DataError("median: empty");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Offset sweep: one fresh head per K on fixed embeddings.

inline std::vector<CurvePoint> k_offset_sweep(const PreparedData& p,
                                              const std::vector<double>& k_grid,
                                              const std::vector<Vec>& train_embs,
                                              const std::vector<Vec>& test_embs,
                                              const HeadConfig& head_cfg,
                                              const std::vector<bool>& is_bool) {
    std::vector<CurvePoint> curve;
    for (size_t ki = 0; ki < k_grid.size(); ++ki) {
        auto pick = [&](const std::vector<WindowSample>& ws) {
            std::vector<Vec> t;
            t.reserve(ws.size());
            for (const auto& w : ws) {
                if (ki >= w.exact_k.size()) throw DataError("k_offset_sweep: missing K target");
                t.push_back(w.exact_k[ki]);
            }
            return t;
        };
        RegressionHead head =
            train_head(train_embs, pick(p.wtrain), TaskKind::ExactValues, is_bool, head_cfg);
        MetricReport rep = eval_prediction(head, test_embs, pick(p.wtest));
        curve.push_back({k_grid[ki], rep.overall_mse});
    }
    return curve;
}

// Embedding-size sweep: full training per size, short-task MSE via the head
// protocol. Sizes are deduplicated and sorted.
inline std::vector<CurvePoint> embed_size_sweep(const PreparedData& p, const ArchConfig& arch_base,
                                                const TrainConfig& train_base,
                                                const HeadConfig& head_cfg, uint64_t seed,
                                                std::vector<size_t> sizes, uint64_t schema_hash,
                                                unsigned threads = 1) {
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    std::vector<CurvePoint> curve(sizes.size());
    parallel_for(sizes.size(), threads, [&](size_t i) {
        ArchConfig arch = arch_base;
        arch.embed_dim = sizes[i];
        TrainConfig cfg = train_base;
        cfg.seed = derive_seed(seed, "size", sizes[i]);
        Drive2VecModel m = train_method_model(p, arch, cfg, "d2v", schema_hash);
        HeadConfig hc = head_cfg;
        hc.seed = derive_seed(seed, "size-head", sizes[i]);
        const double mse =
            head_protocol_mse(window_embeddings(m, p.wtrain), p.wtrain,
                              window_embeddings(m, p.wtest), p.wtest, PredTask::Short, p.is_bool, hc);
        curve[i] = {double(sizes[i]), mse};
    });
    return curve;
}

// ---------------------------------------------------------------------------
// Driver identification wiring.

inline DriverIdResult driver_id_experiment(const PreparedData& p,
                                           const std::vector<Vec>& train_embs,
                                           const std::vector<Vec>& test_embs,
                                           const DriverIdConfig& cfg) {
    std::vector<std::string> train_drivers, test_drivers;
    for (const auto& w : p.wtrain) train_drivers.push_back(p.session_driver.at(w.session_id));
    for (const auto& w : p.wtest) test_drivers.push_back(p.session_driver.at(w.session_id));
    return train_driver_id(train_embs, train_drivers, test_embs, test_drivers, cfg);
}

// ---------------------------------------------------------------------------
// Maneuver study: top events of each kind over the test sessions, their
// pre-event embeddings, and a random background sample.

struct ManeuverStudy {
    std::vector<ManeuverEvent> events;  // tagged brake_slam/gas_slam/turn
    std::vector<Vec> event_embeddings;
    std::vector<Vec> random_embeddings;
    double intra_cosine = 0.0;
    double inter_cosine = 0.0;
    double margin = 0.0;
};

inline Vec embed_at(const Drive2VecModel& model, const Session& normalized,
                    const ChannelSchema& schema, size_t t, ModelCache& cache) {
    const auto cols = schema.model_columns();
    const size_t wlen = model.arch.window_len;
    if (t + 1 < wlen || t >= normalized.rows())
        throw DataError("embed_at: window does not fit");
    Matrix window(wlen, cols.size());
    for (size_t r = 0; r < wlen; ++r)
        for (size_t j = 0; j < cols.size(); ++j)
            window(r, j) = normalized.values(t - wlen + 1 + r, cols[j]);
    return forward_embed(model, window, cache);
}

inline ManeuverStudy maneuver_study(const Dataset& raw, const PreparedData& p,
                                    const Drive2VecModel& model, size_t top_k, size_t n_random,
                                    uint64_t seed) {
    ManeuverStudy study;
    struct KindSpec {
        const char* kind;
        const char* channel;
        double eps;
    };
    const KindSpec kinds[3] = {{"brake_slam", "brake_pedal", 25.0},
                               {"gas_slam", "gas_pedal", 25.0},
                               {"turn", "heading_deg", 5.0}};

    const size_t wlen = model.arch.window_len;
    ModelCache cache;
    for (const auto& ks : kinds) {
        DetectorConfig cfg;
        cfg.channel = ks.channel;
        cfg.epsilon = ks.eps;
        cfg.top_k = top_k;
        std::vector<ManeuverEvent> pool;
        for (size_t i : p.split.test) {
            for (auto& e :
                 scan_events(raw.sessions[i], raw.schema, cfg, ScanMode::TopK, ks.kind))
                if (e.start >= wlen - 1 && e.score >= ks.eps) pool.push_back(std::move(e));
        }
        std::stable_sort(pool.begin(), pool.end(),
                         [](const auto& a, const auto& b) { return a.score > b.score; });
        if (pool.size() > top_k) pool.resize(top_k);
        for (auto& e : pool) study.events.push_back(std::move(e));
    }

    std::map<std::string, size_t> session_index;
    for (size_t i = 0; i < raw.sessions.size(); ++i)
        session_index[raw.sessions[i].session_id] = i;
    for (const auto& e : study.events)
        study.event_embeddings.push_back(embed_at(
            model, p.normalized.sessions[session_index.at(e.session_id)], raw.schema, e.start, cache));

    // background sample over all test positions
    std::vector<std::pair<size_t, size_t>> positions;
    for (size_t i : p.split.test)
        for (size_t t = wlen - 1; t < raw.sessions[i].rows(); ++t) positions.push_back({i, t});
    std::mt19937_64 rng(derive_seed(seed, "maneuver-random"));
    std::shuffle(positions.begin(), positions.end(), rng);
    const size_t n = std::min(n_random, positions.size());
    for (size_t k = 0; k < n; ++k)
        study.random_embeddings.push_back(embed_at(model, p.normalized.sessions[positions[k].first],
                                                   raw.schema, positions[k].second, cache));

    // cosine separability of the three event classes
    double intra = 0, inter = 0;
    size_t n_intra = 0, n_inter = 0;
    for (size_t a = 0; a < study.events.size(); ++a)
        for (size_t b = a + 1; b < study.events.size(); ++b) {
            const double c = cosine_similarity(study.event_embeddings[a], study.event_embeddings[b]);
            if (study.events[a].kind == study.events[b].kind) {
                intra += c;
                ++n_intra;
            } else {
                inter += c;
                ++n_inter;
            }
        }
    study.intra_cosine = n_intra ? intra / double(n_intra) : 0.0;
    study.inter_cosine = n_inter ? inter / double(n_inter) : 0.0;
    study.margin = study.intra_cosine - study.inter_cosine;
    return study;
}

// ---------------------------------------------------------------------------
// Temporal-evolution track for one session.

struct RgbTrack {
    std::vector<size_t> t;
    std::vector<RgbPoint> points;
};

inline RgbTrack session_rgb_track(const Session& normalized, const ChannelSchema& schema,
                                  const Drive2VecModel& model, size_t stride = 1) {
    const int lat_col = schema.index_of("lat");
    const int lon_col = schema.index_of("lon");
    const size_t wlen = model.arch.window_len;

    RgbTrack track;
    std::vector<Vec> embs;
    std::vector<std::pair<double, double>> latlon;
    ModelCache cache;
    for (size_t t = wlen - 1; t < normalized.rows(); t += stride) {
        embs.push_back(embed_at(model, normalized, schema, t, cache));
        const double la = lat_col >= 0 ? normalized.values(t, size_t(lat_col)) : 0.0;
        const double lo = lon_col >= 0 ? normalized.values(t, size_t(lon_col)) : 0.0;
        latlon.push_back({la, lo});
        track.t.push_back(t);
    }
    track.points = pca3_rgb(embs, latlon);
    return track;
}

// ---------------------------------------------------------------------------
// Artifact files

struct EmbeddingsMeta {
    uint64_t schema_hash = 0;
    uint64_t model_digest = 0;
    uint64_t config_digest = 0;
    size_t stride = 0;
    size_t dim = 0;
};

inline void write_embeddings_csv(const std::filesystem::path& path,
                                 const std::vector<EmbeddingRow>& rows,
                                 const EmbeddingsMeta& meta) {
    std::ofstream f(path);
    if (!f) throw DataError("write_embeddings_csv: cannot open " + path.string());
    f << "# d2v-embeddings v1\n";
    f << "# schema_hash=" << to_hex(meta.schema_hash) << " model_digest=" << to_hex(meta.model_digest)
      << " config_digest=" << to_hex(meta.config_digest) << " stride=" << meta.stride
      << " dim=" << meta.dim << "\n";
    f << "session_id,t";
    for (size_t i = 0; i < meta.dim; ++i) f << ",e" << i;
    f << "\n";
    char buf[32];
    for (const auto& r : rows) {
        f << r.session_id << "," << r.t;
        for (double v : r.e) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            f << "," << buf;
        }
        f << "\n";
    }
}

inline std::pair<std::vector<EmbeddingRow>, EmbeddingsMeta> read_embeddings_csv(
    const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("read_embeddings_csv: cannot open " + path.string());
    std::string line;
    std::getline(f, line);
    if (line.rfind("# d2v-embeddings", 0) != 0)
        throw DataError("read_embeddings_csv: not an embeddings artifact");
    std::getline(f, line);
    EmbeddingsMeta meta;
    {
        std::stringstream ss(line.substr(1));
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "schema_hash") meta.schema_hash = std::stoull(val, nullptr, 16);
            if (key == "model_digest") meta.model_digest = std::stoull(val, nullptr, 16);
            if (key == "config_digest") meta.config_digest = std::stoull(val, nullptr, 16);
            if (key == "stride") meta.stride = std::stoull(val);
            if (key == "dim") meta.dim = std::stoull(val);
        }
    }
    std::getline(f, line);  // column header
    std::vector<EmbeddingRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        EmbeddingRow r;
        std::string tok;
        std::getline(ss, r.session_id, ',');
        std::getline(ss, tok, ',');
        r.t = std::stoull(tok);
        while (std::getline(ss, tok, ',')) r.e.push_back(std::stod(tok));
        if (r.e.size() != meta.dim) throw DataError("read_embeddings_csv: ragged row");
        rows.push_back(std::move(r));
    }
    return {std::move(rows), meta};
}

inline void write_curve_csv(const std::filesystem::path& path, const std::string& xname,
                            const std::vector<CurvePoint>& curve, const std::string& method,
                            uint64_t config_digest, uint64_t seed) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream f(path, std::ios::app);
    if (fresh) f << xname << ",mse,method,seed,config_digest\n";
    char buf[32];
    for (const auto& pt : curve) {
        std::snprintf(buf, sizeof(buf), "%.17g", pt.x);
        f << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", pt.y);
        f << buf << "," << method << "," << seed << "," << to_hex(config_digest) << "\n";
    }
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const nlohmann::json& inputs, uint64_t config_digest, uint64_t seed,
                           double duration_s) {
    nlohmann::json m;
    m["command"] = command;
    m["inputs"] = inputs;
    m["config_digest"] = to_hex(config_digest);
    m["seed"] = seed;
    m["duration_s"] = duration_s;
    std::ofstream f(dir / "manifest.json");
    f << m.dump(2) << "\n";
}

}  // namespace d2v
