#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "d2v/data.hpp"
#include "d2v/nn.hpp"

namespace d2v {

struct ArchConfig {
    size_t input_dim = 0;
    size_t window_len = 10;
    size_t gru_hidden = 256;
    size_t embed_dim = 64;

    size_t output_dim() const { return 4 * input_dim; }

    void validate() const {
        if (input_dim == 0 || window_len == 0 || gru_hidden == 0 || embed_dim == 0)
            throw ConfigError("arch: zero dimension");
    }

    nlohmann::json to_json() const {
        return {{"input_dim", input_dim},
                {"window_len", window_len},
                {"gru_hidden", gru_hidden},
                {"embed_dim", embed_dim}};
    }
    static ArchConfig from_json(const nlohmann::json& j) {
        ArchConfig a;
        a.input_dim = j.at("input_dim").get<size_t>();
        a.window_len = j.at("window_len").get<size_t>();
        a.gru_hidden = j.at("gru_hidden").get<size_t>();
        a.embed_dim = j.at("embed_dim").get<size_t>();
        return a;
    }
};

// Stacked GRUs, ELU bottleneck to the embedding, linear readout to the four
// prediction blocks. Boolean entries of block 0 are logits.
struct Drive2VecModel {
    ArchConfig arch;
    uint64_t schema_hash = 0;
    GruParams gru1, gru2;
    DenseParams fc1, fc2;

    ArrayRefs arrays() {
        ArrayRefs out;
        for (auto* a : gru1.arrays()) out.push_back(a);
        for (auto* a : gru2.arrays()) out.push_back(a);
        for (auto* a : fc1.arrays()) out.push_back(a);
        for (auto* a : fc2.arrays()) out.push_back(a);
        return out;
    }
    ConstArrayRefs arrays() const {
        ConstArrayRefs out;
        for (const auto* a : gru1.arrays()) out.push_back(a);
        for (const auto* a : gru2.arrays()) out.push_back(a);
        for (const auto* a : fc1.arrays()) out.push_back(a);
        for (const auto* a : fc2.arrays()) out.push_back(a);
        return out;
    }

    uint64_t param_digest() const {
        uint64_t h = fnv1a64(arch.to_json().dump());
        for (const auto* a : arrays()) h = fnv1a64(a->data(), a->size() * sizeof(double), h);
        return h;
    }
};

inline Drive2VecModel build_model(const ArchConfig& arch, uint64_t seed, uint64_t schema_hash = 0) {
    arch.validate();
    std::mt19937_64 rng(seed);
    Drive2VecModel m;
    m.arch = arch;
    m.schema_hash = schema_hash;
    m.gru1 = GruParams::create(arch.input_dim, arch.gru_hidden, rng);
    m.gru2 = GruParams::create(arch.gru_hidden, arch.gru_hidden, rng);
    m.fc1 = DenseParams::create(arch.gru_hidden, arch.embed_dim, Activation::elu, rng);
    m.fc2 = DenseParams::create(arch.embed_dim, arch.output_dim(), Activation::identity, rng);
    return m;
}

struct ModelGrads {
    GruGrads gru1, gru2;
    DenseGrads fc1, fc2;

    static ModelGrads like(const Drive2VecModel& m) {
        ModelGrads g;
        g.gru1 = GruGrads::like(m.gru1);
        g.gru2 = GruGrads::like(m.gru2);
        g.fc1 = DenseGrads::like(m.fc1);
        g.fc2 = DenseGrads::like(m.fc2);
        return g;
    }
    void zero() {
        gru1.zero();
        gru2.zero();
        fc1.zero();
        fc2.zero();
    }
    ArrayRefs arrays() {
        ArrayRefs out;
        for (auto* a : gru1.arrays()) out.push_back(a);
        for (auto* a : gru2.arrays()) out.push_back(a);
        for (auto* a : fc1.arrays()) out.push_back(a);
        for (auto* a : fc2.arrays()) out.push_back(a);
        return out;
    }
    ConstArrayRefs arrays() const {
        ConstArrayRefs out;
        for (const auto* a : gru1.arrays()) out.push_back(a);
        for (const auto* a : gru2.arrays()) out.push_back(a);
        for (const auto* a : fc1.arrays()) out.push_back(a);
        for (const auto* a : fc2.arrays()) out.push_back(a);
        return out;
    }
};

struct ModelCache {
    std::vector<Vec> xs;  // window rows
    GruSeqCache seq1, seq2;
    DenseCache fc1, fc2;
    Vec embedding;
    Vec out;
    // backward workspace
    std::vector<Vec> dh1;
    Vec d_embed, d_h2, scratch;
};

inline void load_window(const Matrix& window, const ArchConfig& arch, std::vector<Vec>& xs) {
    if (window.rows != arch.window_len || window.cols != arch.input_dim)
        throw NumericError("forward: window shape mismatch");
    xs.resize(window.rows);
    for (size_t t = 0; t < window.rows; ++t)
        xs[t].assign(window.row(t), window.row(t) + window.cols);
}

inline const Vec& forward_embed(const Drive2VecModel& m, const Matrix& window, ModelCache& cache) {
    load_window(window, m.arch, cache.xs);
    auto h1 = gru_sequence(cache.xs, m.gru1, {}, &cache.seq1);
    auto h2 = gru_sequence(h1, m.gru2, {}, &cache.seq2);
    cache.embedding.resize(m.arch.embed_dim);
    dense_forward_into(h2.back().data(), m.fc1, cache.fc1, cache.embedding.data());
    if (!all_finite(cache.embedding)) throw NumericError("forward_embed: non-finite embedding");
    return cache.embedding;
}

inline Vec forward_embed(const Drive2VecModel& m, const Matrix& window) {
    ModelCache cache;
    return forward_embed(m, window, cache);
}

inline const Vec& forward_full(const Drive2VecModel& m, const Matrix& window, ModelCache& cache) {
    forward_embed(m, window, cache);
    cache.out.resize(m.arch.output_dim());
    dense_forward_into(cache.embedding.data(), m.fc2, cache.fc2, cache.out.data());
    return cache.out;
}

struct FullOutput {
    Vec embedding;
    Vec out;  // 4*D, block k channel j at k*D + j
};

inline FullOutput forward_full(const Drive2VecModel& m, const Matrix& window) {
    ModelCache cache;
    forward_full(m, window, cache);
    return {cache.embedding, cache.out};
}

// Reverse pass for the gradient of some scalar loss w.r.t. the 4D-block
// output; accumulates into g.
inline void backward(const Drive2VecModel& m, ModelCache& cache, const Vec& d_out,
                     ModelGrads& g) {
    if (d_out.size() != m.arch.output_dim()) throw NumericError("backward: gradient shape");
    cache.d_embed.assign(m.arch.embed_dim, 0.0);
    dense_backward(m.fc2, cache.fc2, d_out.data(), g.fc2, cache.d_embed.data(), cache.scratch);
    cache.d_h2.assign(m.arch.gru_hidden, 0.0);
    dense_backward(m.fc1, cache.fc1, cache.d_embed.data(), g.fc1, cache.d_h2.data(),
                   cache.scratch);
    std::vector<Vec> dh2(m.arch.window_len);
    dh2.back() = cache.d_h2;
    gru_sequence_backward(m.gru2, cache.seq2.steps, dh2, g.gru2, &cache.dh1, cache.scratch);
    gru_sequence_backward(m.gru1, cache.seq1.steps, cache.dh1, g.gru1, nullptr, cache.scratch);
}

// ---------------------------------------------------------------------------
// Composite multiscale loss

struct LossMask {
    bool exact1s = true;
    bool avg1s = true;
    bool avg10s = true;
    bool avg100s = true;

    bool any() const { return exact1s || avg1s || avg10s || avg100s; }

    static LossMask all() { return {}; }
    static LossMask short_only() { return {true, false, false, false}; }
    static LossMask long_only() { return {false, false, false, true}; }

    std::string tag() const {
        std::string s;
        s += exact1s ? '1' : '0';
        s += avg1s ? '1' : '0';
        s += avg10s ? '1' : '0';
        s += avg100s ? '1' : '0';
        return s;
    }
};

struct LossReport {
    double total = 0.0;
    double block[4] = {0, 0, 0, 0};
    double block0_float = 0.0;
    double block0_bool = 0.0;
};

// Block 0 scores boolean channels with BCE on logits and float channels with
// MSE; blocks 1..3 are plain MSE over all channels. Enabled blocks sum.
inline LossReport composite_loss(const Vec& out, const WindowSample& tgt,
                                 const std::vector<bool>& is_bool, const LossMask& mask,
                                 Vec* d_out = nullptr) {
    const size_t D = is_bool.size();
    if (out.size() != 4 * D) throw NumericError("composite_loss: output size mismatch");
    if (!mask.any()) throw ConfigError("composite_loss: empty loss mask");
    size_t n_bool = 0;
    for (bool b : is_bool) n_bool += b;
    const size_t n_float = D - n_bool;

    LossReport rep;
    if (d_out) d_out->assign(4 * D, 0.0);

    const Vec* targets[4] = {&tgt.exact1s, &tgt.avg1s, &tgt.avg10s, &tgt.avg100s};
    const bool enabled[4] = {mask.exact1s, mask.avg1s, mask.avg10s, mask.avg100s};

    for (int k = 0; k < 4; ++k) {
        if (!enabled[k]) continue;
        const Vec& t = *targets[k];
        if (t.size() != D) throw NumericError("composite_loss: missing target block");
        if (k == 0) {
            double mse = 0.0, bce = 0.0;
            for (size_t j = 0; j < D; ++j) {
                const double p = out[j];
                if (is_bool[j]) {
                    const double y = t[j];
                    if (y != 0.0 && y != 1.0)
                        throw NumericError("composite_loss: non-binary boolean target");
                    bce += std::max(p, 0.0) - p * y + std::log1p(std::exp(-std::abs(p)));
                    if (d_out) (*d_out)[j] = (sigmoid(p) - y) / double(n_bool);
                } else {
                    const double d = p - t[j];
                    mse += d * d;
                    if (d_out) (*d_out)[j] = 2.0 * d / double(n_float);
                }
            }
            rep.block0_float = n_float ? mse / double(n_float) : 0.0;
            rep.block0_bool = n_bool ? bce / double(n_bool) : 0.0;
            rep.block[0] = rep.block0_float + rep.block0_bool;
        } else {
            double mse = 0.0;
            for (size_t j = 0; j < D; ++j) {
                const double d = out[k * D + j] - t[j];
                mse += d * d;
                if (d_out) (*d_out)[k * D + j] = 2.0 * d / double(D);
            }
            rep.block[k] = mse / double(D);
        }
        rep.total += rep.block[k];
    }
    if (!std::isfinite(rep.total)) throw NumericError("composite_loss: non-finite loss");
    return rep;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    LossMask mask;
    size_t epochs = 30;
    size_t batch_size = 128;
    double lr = 1e-3;
    uint64_t seed = 0;
    size_t patience = 5;
    double clip_norm = 5.0;  // <= 0 disables clipping
    bool verbose = false;

    nlohmann::json to_json() const {
        return {{"mask", mask.tag()},   {"epochs", epochs},     {"batch_size", batch_size},
                {"lr", lr},             {"seed", seed},         {"patience", patience},
                {"clip_norm", clip_norm}};
    }
    uint64_t digest() const { return fnv1a64(to_json().dump()); }
};

struct EpochStats {
    size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    Drive2VecModel model;
    std::vector<EpochStats> history;
    size_t best_epoch = 0;
    double best_val = 0.0;
};

inline double dataset_loss(const Drive2VecModel& m, const std::vector<WindowSample>& samples,
                           const std::vector<bool>& is_bool, const LossMask& mask) {
    if (samples.empty()) throw DataError("dataset_loss: empty dataset");
    ModelCache cache;
    double total = 0.0;
    for (const auto& s : samples) {
        const Vec& out = forward_full(m, s.input, cache);
        total += composite_loss(out, s, is_bool, mask).total;
    }
    return total / double(samples.size());
}

inline TrainResult train(const std::vector<WindowSample>& train_set,
                         const std::vector<WindowSample>& val_set, const ArchConfig& arch,
                         const TrainConfig& cfg, const std::vector<bool>& is_bool,
                         uint64_t schema_hash = 0) {
    if (train_set.empty() || val_set.empty()) throw DataError("train: empty split");
    if (!cfg.mask.any()) throw ConfigError("train: empty loss mask");

    TrainResult res;
    res.model = build_model(arch, cfg.seed, schema_hash);
    Drive2VecModel best = res.model;

    ModelGrads grads = ModelGrads::like(res.model);
    ModelCache cache;
    Vec d_out;
    AdamState adam;
    adam.lr = cfg.lr;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    res.best_val = std::numeric_limits<double>::infinity();
    size_t since_best = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "epoch", epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            grads.zero();
            for (size_t i = start; i < end; ++i) {
                const WindowSample& s = train_set[order[i]];
                const Vec& out = forward_full(res.model, s.input, cache);
                LossReport rep = composite_loss(out, s, is_bool, cfg.mask, &d_out);
                epoch_loss += rep.total;
                backward(res.model, cache, d_out, grads);
            }
            const double inv = 1.0 / double(end - start);
            for (auto* a : grads.arrays())
                for (double& v : *a) v *= inv;
            if (cfg.clip_norm > 0) clip_global_norm(grads.arrays(), cfg.clip_norm);
            adam_step(res.model.arrays(), std::as_const(grads).arrays(), adam);
        }
        epoch_loss /= double(order.size());
        if (!std::isfinite(epoch_loss))
            throw NumericError("train: diverged at epoch " + std::to_string(epoch));

        double val_loss = 0.0;
        for (const auto& s : val_set) {
            const Vec& out = forward_full(res.model, s.input, cache);
            val_loss += composite_loss(out, s, is_bool, cfg.mask).total;
        }
        val_loss /= double(val_set.size());

        res.history.push_back({epoch, epoch_loss, val_loss});
        if (cfg.verbose)
            std::fprintf(stderr, "epoch %zu train %.6f val %.6f\n", epoch, epoch_loss, val_loss);

        if (val_loss < res.best_val) {
            res.best_val = val_loss;
            res.best_epoch = epoch;
            best = res.model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.model = best;
    return res;
}

// ---------------------------------------------------------------------------
// Embedding inference

struct EmbeddingRow {
    std::string session_id;
    size_t t = 0;
    Vec e;
};

inline std::vector<EmbeddingRow> embed_dataset(const Drive2VecModel& m,
                                               const std::vector<WindowSample>& windows) {
    std::vector<EmbeddingRow> out;
    out.reserve(windows.size());
    ModelCache cache;
    for (const auto& w : windows) {
        const Vec& e = forward_embed(m, w.input, cache);
        out.push_back({w.session_id, w.t, e});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint file: readable header, then raw little-endian doubles in the
// documented array order (gru1 Wz,Uz,bz,Wr,Ur,br,Wh,Uh,bh; gru2 same; fc1 W,b;
// fc2 W,b).

inline void save_checkpoint(const std::filesystem::path& path, const Drive2VecModel& m,
                            const nlohmann::json& extra = {}) {
    nlohmann::json header;
    header["format"] = "d2v-checkpoint";
    header["version"] = 1;
    header["arch"] = m.arch.to_json();
    header["schema_hash"] = to_hex(m.schema_hash);
    size_t total = 0;
    for (const auto* a : m.arrays()) total += a->size();
    header["param_count"] = total;
    if (!extra.is_null() && !extra.empty()) header["meta"] = extra;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_checkpoint: cannot open " + path.string());
    f << header.dump() << "\n";
    for (const auto* a : m.arrays())
        f.write(reinterpret_cast<const char*>(a->data()),
                std::streamsize(a->size() * sizeof(double)));
    if (!f) throw DataError("save_checkpoint: write failed " + path.string());
}

inline Drive2VecModel load_checkpoint(const std::filesystem::path& path,
                                      nlohmann::json* meta = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw DataError("load_checkpoint: missing header");
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("format", "") != "d2v-checkpoint")
        throw DataError("load_checkpoint: not a checkpoint file");

    Drive2VecModel m;
    m.arch = ArchConfig::from_json(header.at("arch"));
    m.schema_hash = std::stoull(header.at("schema_hash").get<std::string>(), nullptr, 16);
    m.gru1 = GruParams::zeros(m.arch.input_dim, m.arch.gru_hidden);
    m.gru2 = GruParams::zeros(m.arch.gru_hidden, m.arch.gru_hidden);
    m.fc1 = DenseParams::zeros(m.arch.gru_hidden, m.arch.embed_dim, Activation::elu);
    m.fc2 = DenseParams::zeros(m.arch.embed_dim, m.arch.output_dim(), Activation::identity);

    size_t total = 0;
    for (auto* a : m.arrays()) total += a->size();
    if (header.at("param_count").get<size_t>() != total)
        throw DataError("load_checkpoint: parameter count mismatch");
    for (auto* a : m.arrays()) {
        f.read(reinterpret_cast<char*>(a->data()), std::streamsize(a->size() * sizeof(double)));
        if (!f) throw DataError("load_checkpoint: truncated parameter block");
    }
    if (meta) *meta = header.value("meta", nlohmann::json::object());
    return m;
}

}  // namespace d2v
