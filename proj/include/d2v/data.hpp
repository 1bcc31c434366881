#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "d2v/matrix.hpp"
#include "d2v/util.hpp"

namespace d2v {

constexpr double kSampleRateHz = 10.0;
constexpr double kSamplePeriod = 0.1;

enum class ChannelKind { Float, Boolean };

struct ChannelInfo {
    std::string name;
    ChannelKind kind = ChannelKind::Float;
    bool is_metadata = false;  // carried along but excluded from the model dimension
};

struct ChannelSchema {
    std::vector<ChannelInfo> channels;

    size_t total_columns() const { return channels.size(); }

    // Model-facing dimension: non-metadata channels only.
    size_t dim() const {
        size_t d = 0;
        for (const auto& c : channels)
            if (!c.is_metadata) ++d;
        return d;
    }

    size_t dim_float() const {
        size_t d = 0;
        for (const auto& c : channels)
            if (!c.is_metadata && c.kind == ChannelKind::Float) ++d;
        return d;
    }

    size_t dim_bool() const { return dim() - dim_float(); }

    // Column indices of model channels, in schema order.
    std::vector<size_t> model_columns() const {
        std::vector<size_t> idx;
        for (size_t i = 0; i < channels.size(); ++i)
            if (!channels[i].is_metadata) idx.push_back(i);
        return idx;
    }

    // Per model-channel boolean flags, aligned with model_columns().
    std::vector<bool> model_is_bool() const {
        std::vector<bool> flags;
        for (const auto& c : channels)
            if (!c.is_metadata) flags.push_back(c.kind == ChannelKind::Boolean);
        return flags;
    }

    int index_of(const std::string& name) const {
        for (size_t i = 0; i < channels.size(); ++i)
            if (channels[i].name == name) return int(i);
        return -1;
    }

    uint64_t hash() const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& c : channels) {
            h = fnv1a64(c.name, h);
            const char k = c.kind == ChannelKind::Boolean ? 'b' : 'f';
            h = fnv1a64(&k, 1, h);
            const char m = c.is_metadata ? '1' : '0';
            h = fnv1a64(&m, 1, h);
        }
        return h;
    }

    void validate() const {
        if (dim() < 1) throw DataError("schema: no model channels");
        std::vector<std::string> names;
        for (const auto& c : channels) names.push_back(c.name);
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end())
            throw DataError("schema: duplicate channel names");
    }
};

// One contiguous drive at 10 Hz. values is T x total_columns in schema order.
struct Session {
    std::string session_id;
    std::string driver_id;
    Matrix values;
    double start_time = 0.0;

    size_t rows() const { return values.rows; }
};

// ---------------------------------------------------------------------------
// Synchronization

struct RawStream {
    std::string channel;
    std::vector<double> t;
    std::vector<double> v;
};

// Sample-and-hold onto a uniform 10 Hz grid spanning the overlap of all
// streams. Booleans survive because no values are interpolated.
inline Session synchronize(const std::vector<RawStream>& streams, const ChannelSchema& schema,
                           const std::string& session_id, const std::string& driver_id) {
    if (streams.empty()) throw DataError("synchronize: no streams");
    double start = -std::numeric_limits<double>::infinity();
    double end = std::numeric_limits<double>::infinity();
    for (const auto& s : streams) {
        if (s.t.empty()) throw DataError("synchronize: empty stream '" + s.channel + "'");
        if (s.t.size() != s.v.size())
            throw DataError("synchronize: ragged stream '" + s.channel + "'");
        for (size_t i = 1; i < s.t.size(); ++i)
            if (s.t[i] < s.t[i - 1])
                throw DataError("synchronize: non-monotone timestamps in '" + s.channel + "'");
        start = std::max(start, s.t.front());
        end = std::min(end, s.t.back());
    }
    if (end < start) throw DataError("synchronize: streams do not overlap");

    const size_t n = size_t(std::floor((end - start) / kSamplePeriod + 1e-9)) + 1;
    Session out;
    out.session_id = session_id;
    out.driver_id = driver_id;
    out.start_time = start;
    out.values = Matrix(n, schema.total_columns());

    for (const auto& s : streams) {
        const int col = schema.index_of(s.channel);
        if (col < 0) throw DataError("synchronize: channel '" + s.channel + "' not in schema");
        size_t j = 0;
        for (size_t i = 0; i < n; ++i) {
            const double ti = start + double(i) * kSamplePeriod;
            while (j + 1 < s.t.size() && s.t[j + 1] <= ti + 1e-9) ++j;
            // Leading gap: hold the first observation.
            out.values(i, size_t(col)) = s.t[j] <= ti + 1e-9 ? s.v[j] : s.v.front();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

struct Normalizer {
    // Per schema column; non-normalized columns carry mean 0 / std 1.
    std::vector<double> mean;
    std::vector<double> stdev;
    uint64_t schema_hash = 0;

    static Normalizer fit(const std::vector<const Session*>& train_sessions,
                          const ChannelSchema& schema) {
        if (train_sessions.empty()) throw DataError("normalizer: no training sessions");
        const size_t cols = schema.total_columns();
        Normalizer nz;
        nz.schema_hash = schema.hash();
        nz.mean.assign(cols, 0.0);
        nz.stdev.assign(cols, 1.0);
        for (size_t c = 0; c < cols; ++c) {
            const auto& info = schema.channels[c];
            if (info.is_metadata || info.kind != ChannelKind::Float) continue;
            double sum = 0.0;
            size_t n = 0;
            for (const auto* s : train_sessions) {
                for (size_t r = 0; r < s->rows(); ++r) sum += s->values(r, c);
                n += s->rows();
            }
            const double mu = sum / double(n);
            double sq = 0.0;
            for (const auto* s : train_sessions)
                for (size_t r = 0; r < s->rows(); ++r) {
                    const double d = s->values(r, c) - mu;
                    sq += d * d;
                }
            const double sd = std::sqrt(sq / double(n));
            if (!(sd > 0.0))
                throw DataError("normalizer: zero-variance float channel '" + info.name + "'");
            nz.mean[c] = mu;
            nz.stdev[c] = sd;
        }
        return nz;
    }

    Session apply(const Session& s, const ChannelSchema& schema) const {
        if (schema.hash() != schema_hash)
            throw ContaminationError("normalizer: schema hash mismatch");
        Session out = s;
        for (size_t c = 0; c < schema.total_columns(); ++c) {
            const auto& info = schema.channels[c];
            if (info.is_metadata || info.kind != ChannelKind::Float) continue;
            for (size_t r = 0; r < out.rows(); ++r)
                out.values(r, c) = (out.values(r, c) - mean[c]) / stdev[c];
        }
        return out;
    }

    nlohmann::json to_json() const {
        return {{"schema_hash", to_hex(schema_hash)}, {"mean", mean}, {"stdev", stdev}};
    }

    static Normalizer from_json(const nlohmann::json& j) {
        Normalizer nz;
        nz.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
        nz.mean = j.at("mean").get<std::vector<double>>();
        nz.stdev = j.at("stdev").get<std::vector<double>>();
        return nz;
    }
};

// ---------------------------------------------------------------------------
// Session-based splitting

struct SplitSpec {
    double train = 0.8, val = 0.1, test = 0.1;
    uint64_t seed = 0;
};

struct Split {
    std::vector<size_t> train, val, test;
};

// Seeded shuffle of session indices, then greedy assignment toward the
// duration targets. Every session lands wholly in one split.
inline Split split_by_session(const std::vector<Session>& sessions, const SplitSpec& spec) {
    if (sessions.size() < 3) throw DataError("split_by_session: need at least 3 sessions");
    const double rsum = spec.train + spec.val + spec.test;
    if (!(spec.train > 0 && spec.val > 0 && spec.test > 0) || std::abs(rsum - 1.0) > 1e-9)
        throw ConfigError("split_by_session: ratios must be positive and sum to 1");

    std::vector<size_t> order(sessions.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    for (const auto& s : sessions) total += double(s.rows());
    const double targets[3] = {spec.train * total, spec.val * total, spec.test * total};
    double assigned[3] = {0, 0, 0};
    Split split;
    std::vector<size_t>* buckets[3] = {&split.train, &split.val, &split.test};

    for (size_t idx : order) {
        int best = 0;
        double best_deficit = -std::numeric_limits<double>::infinity();
        for (int b = 0; b < 3; ++b) {
            const double deficit = targets[b] - assigned[b];
            if (deficit > best_deficit) {
                best_deficit = deficit;
                best = b;
            }
        }
        buckets[best]->push_back(idx);
        assigned[best] += double(sessions[idx].rows());
    }

    // Ratios can starve a bucket when sessions are few; steal from the largest.
    for (int b = 0; b < 3; ++b) {
        if (!buckets[b]->empty()) continue;
        int donor = 0;
        for (int d = 1; d < 3; ++d)
            if (buckets[d]->size() > buckets[donor]->size()) donor = d;
        if (buckets[donor]->size() <= 1) throw DataError("split_by_session: cannot fill splits");
        buckets[b]->push_back(buckets[donor]->back());
        buckets[donor]->pop_back();
    }
    return split;
}

// ---------------------------------------------------------------------------
// Window extraction

struct Horizons {
    bool exact1s = true;
    bool avg1s = true;
    bool avg10s = true;
    bool avg100s = true;
    std::vector<double> k_grid;  // extra exact-offset targets, seconds

    size_t max_samples() const {
        size_t h = 0;
        if (exact1s) h = std::max(h, size_t(10));
        if (avg1s) h = std::max(h, size_t(10));
        if (avg10s) h = std::max(h, size_t(100));
        if (avg100s) h = std::max(h, size_t(1000));
        for (double k : k_grid) h = std::max(h, size_t(std::lround(k * kSampleRateHz)));
        return h;
    }

    static Horizons none() { return Horizons{false, false, false, false, {}}; }
};

struct WindowSample {
    std::string session_id;
    size_t t = 0;   // index of the window's last row
    Matrix input;   // window_len x D, model channels only
    Vec exact1s, avg1s, avg10s, avg100s;
    std::vector<Vec> exact_k;  // aligned with Horizons::k_grid
};

inline size_t window_count(size_t T, size_t window_len, size_t stride, size_t h_max) {
    if (T < window_len + h_max) return 0;
    return (T - window_len - h_max) / stride + 1;
}

// Extracts sliding windows ending at t = window_len-1, +stride, ... whose
// longest enabled horizon stays inside the session.
inline std::vector<WindowSample> extract_windows(const Session& session,
                                                 const ChannelSchema& schema, size_t stride,
                                                 const Horizons& hz, size_t window_len = 10) {
    if (stride == 0) throw ConfigError("extract_windows: zero stride");
    const auto cols = schema.model_columns();
    const size_t D = cols.size();
    const size_t T = session.rows();
    const size_t h_max = hz.max_samples();
    std::vector<WindowSample> out;
    if (T < window_len + h_max) return out;

    auto row_at = [&](size_t r) {
        Vec v(D);
        for (size_t j = 0; j < D; ++j) v[j] = session.values(r, cols[j]);
        return v;
    };
    auto avg_rows = [&](size_t first, size_t count) {
        Vec v(D, 0.0);
        for (size_t r = first; r < first + count; ++r)
            for (size_t j = 0; j < D; ++j) v[j] += session.values(r, cols[j]);
        for (auto& x : v) x /= double(count);
        return v;
    };

    out.reserve(window_count(T, window_len, stride, h_max));
    for (size_t t = window_len - 1; t + h_max < T; t += stride) {
        WindowSample w;
        w.session_id = session.session_id;
        w.t = t;
        w.input = Matrix(window_len, D);
        for (size_t r = 0; r < window_len; ++r)
            for (size_t j = 0; j < D; ++j)
                w.input(r, j) = session.values(t - window_len + 1 + r, cols[j]);
        if (hz.exact1s) w.exact1s = row_at(t + 10);
        if (hz.avg1s) w.avg1s = avg_rows(t + 1, 10);
        if (hz.avg10s) w.avg10s = avg_rows(t + 1, 100);
        if (hz.avg100s) w.avg100s = avg_rows(t + 1, 1000);
        for (double k : hz.k_grid)
            w.exact_k.push_back(row_at(t + size_t(std::lround(k * kSampleRateHz))));
        out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Session files: one CSV per session plus a JSON sidecar.

inline std::string format_value(double v, ChannelKind kind) {
    if (kind == ChannelKind::Boolean) return v == 0.0 ? "0" : "1";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void save_session(const std::filesystem::path& dir, const Session& s,
                         const ChannelSchema& schema) {
    std::filesystem::create_directories(dir);
    nlohmann::json side;
    side["session_id"] = s.session_id;
    side["driver_id"] = s.driver_id;
    side["start_time"] = s.start_time;
    side["channels"] = nlohmann::json::array();
    for (const auto& c : schema.channels)
        side["channels"].push_back({{"name", c.name},
                                    {"kind", c.kind == ChannelKind::Boolean ? "boolean" : "float"},
                                    {"is_metadata", c.is_metadata}});
    {
        std::ofstream f(dir / (s.session_id + ".json"));
        f << side.dump(2) << "\n";
    }
    std::ofstream f(dir / (s.session_id + ".csv"));
    f << "idx";
    for (const auto& c : schema.channels) f << "," << c.name;
    f << "\n";
    for (size_t r = 0; r < s.rows(); ++r) {
        f << r;
        for (size_t c = 0; c < schema.total_columns(); ++c)
            f << "," << format_value(s.values(r, c), schema.channels[c].kind);
        f << "\n";
    }
}

inline ChannelSchema schema_from_json(const nlohmann::json& side) {
    ChannelSchema schema;
    for (const auto& c : side.at("channels")) {
        ChannelInfo info;
        info.name = c.at("name").get<std::string>();
        const std::string kind = c.at("kind").get<std::string>();
        if (kind == "boolean")
            info.kind = ChannelKind::Boolean;
        else if (kind == "float")
            info.kind = ChannelKind::Float;
        else
            throw DataError("schema: unknown channel kind '" + kind + "'");
        info.is_metadata = c.at("is_metadata").get<bool>();
        schema.channels.push_back(info);
    }
    schema.validate();
    return schema;
}

inline std::pair<Session, ChannelSchema> load_session(const std::filesystem::path& sidecar_path) {
    std::ifstream sf(sidecar_path);
    if (!sf) throw DataError("load_session: cannot open " + sidecar_path.string());
    nlohmann::json side = nlohmann::json::parse(sf);
    ChannelSchema schema = schema_from_json(side);

    Session s;
    s.session_id = side.at("session_id").get<std::string>();
    s.driver_id = side.at("driver_id").get<std::string>();
    s.start_time = side.value("start_time", 0.0);

    std::filesystem::path csv = sidecar_path;
    csv.replace_extension(".csv");
    std::ifstream f(csv);
    if (!f) throw DataError("load_session: cannot open " + csv.string());

    std::string line;
    if (!std::getline(f, line)) throw DataError("load_session: empty file " + csv.string());
    {
        std::stringstream ss(line);
        std::string name;
        std::getline(ss, name, ',');  // idx column
        size_t col = 0;
        while (std::getline(ss, name, ',')) {
            if (col >= schema.total_columns() || schema.channels[col].name != name)
                throw DataError("load_session: unknown channel '" + name + "' in " + csv.string());
            ++col;
        }
        if (col != schema.total_columns())
            throw DataError("load_session: column count mismatch in " + csv.string());
    }

    std::vector<double> rows;
    size_t n_rows = 0;
    const size_t cols = schema.total_columns();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const char* p = line.c_str();
        char* endp = nullptr;
        std::strtod(p, &endp);  // sample index, positional
        p = endp;
        for (size_t c = 0; c < cols; ++c) {
            if (*p != ',')
                throw DataError("load_session: malformed row " + std::to_string(n_rows + 1));
            ++p;
            const double v = std::strtod(p, &endp);
            if (endp == p)
                throw DataError("load_session: malformed row " + std::to_string(n_rows + 1));
            p = endp;
            if (schema.channels[c].kind == ChannelKind::Boolean && v != 0.0 && v != 1.0)
                throw DataError("load_session: non-binary boolean '" + schema.channels[c].name +
                                "' at row " + std::to_string(n_rows + 1));
            rows.push_back(v);
        }
        ++n_rows;
    }
    if (n_rows == 0) throw DataError("load_session: no rows in " + csv.string());
    s.values = Matrix(n_rows, cols);
    s.values.data = std::move(rows);
    return {std::move(s), std::move(schema)};
}

struct Dataset {
    ChannelSchema schema;
    std::vector<Session> sessions;
};

inline void save_sessions(const std::filesystem::path& dir, const Dataset& ds) {
    for (const auto& s : ds.sessions) save_session(dir, s, ds.schema);
}

inline Dataset load_sessions(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> sidecars;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json" && e.path().filename() != "events.json" &&
            std::filesystem::exists(std::filesystem::path(e.path()).replace_extension(".csv")))
            sidecars.push_back(e.path());
    }
    if (sidecars.empty()) throw DataError("load_sessions: no sessions in " + dir.string());
    std::sort(sidecars.begin(), sidecars.end());

    Dataset ds;
    for (const auto& p : sidecars) {
        auto [session, schema] = load_session(p);
        if (ds.sessions.empty())
            ds.schema = schema;
        else if (schema.hash() != ds.schema.hash())
            throw DataError("load_sessions: inconsistent schema in " + p.string());
        ds.sessions.push_back(std::move(session));
    }
    return ds;
}

}  // namespace d2v
