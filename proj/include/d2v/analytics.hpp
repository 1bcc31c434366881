#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "d2v/baselines.hpp"
#include "d2v/data.hpp"
#include "d2v/model.hpp"
#include "d2v/util.hpp"

namespace d2v {

// ---------------------------------------------------------------------------
// Heuristic maneuver scan: score every window start by (max - min) of one raw
// channel over a short interval, keep non-overlapping local maxima.

struct DetectorConfig {
    std::string channel = "brake_pedal";
    double epsilon = 25.0;
    size_t window = 4;  // samples, 0.4 s at 10 Hz
    size_t top_k = 10;
    double train_fraction = 0.8;

    void validate() const {
        if (epsilon <= 0.0) throw ConfigError("detector: epsilon must be positive");
        if (window < 2) throw ConfigError("detector: window must be >= 2 samples");
    }
};

struct ManeuverEvent {
    std::string kind;
    std::string session_id;
    size_t start = 0;   // first sample of the scoring window
    double score = 0.0; // max - min over the window
};

enum class ScanMode { TopK, Threshold };

inline std::vector<ManeuverEvent> scan_events(const Session& raw, const ChannelSchema& schema,
                                              const DetectorConfig& cfg, ScanMode mode,
                                              const std::string& kind_tag) {
    cfg.validate();
    const int col = schema.index_of(cfg.channel);
    if (col < 0) throw DataError("scan_events: unknown channel '" + cfg.channel + "'");
    const size_t T = raw.rows();
    if (T < cfg.window) return {};

    std::vector<double> score(T - cfg.window + 1);
    for (size_t i = 0; i + cfg.window <= T; ++i) {
        double lo = raw.values(i, size_t(col)), hi = lo;
        for (size_t j = 1; j < cfg.window; ++j) {
            const double v = raw.values(i + j, size_t(col));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        score[i] = hi - lo;
    }

    std::vector<size_t> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return score[a] > score[b]; });

    std::vector<char> suppressed(score.size(), 0);
    std::vector<ManeuverEvent> events;
    for (size_t idx : order) {
        if (score[idx] <= 0.0) break;
        if (mode == ScanMode::Threshold && score[idx] < cfg.epsilon) break;
        if (mode == ScanMode::TopK && events.size() >= cfg.top_k) break;
        if (suppressed[idx]) continue;
        events.push_back({kind_tag, raw.session_id, idx, score[idx]});
        const size_t lo = idx >= cfg.window - 1 ? idx - (cfg.window - 1) : 0;
        const size_t hi = std::min(score.size() - 1, idx + cfg.window - 1);
        for (size_t j = lo; j <= hi; ++j) suppressed[j] = 1;
    }
    return events;  // already sorted by descending score
}

// ---------------------------------------------------------------------------
// Nearest-neighbor cosine similarity over a reference set.

inline double cosine_similarity(const Vec& a, const Vec& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct SimilarityIndex {
    std::vector<Vec> refs;  // unit norm

    void add(const Vec& e) {
        double n = 0;
        for (double v : e) n += v * v;
        n = std::sqrt(n);
        if (n == 0.0) throw NumericError("similarity index: zero-norm embedding");
        Vec u(e);
        for (auto& v : u) v /= n;
        refs.push_back(std::move(u));
    }

    size_t size() const { return refs.size(); }

    // Exact maximum cosine similarity over the index.
    double score(const Vec& q) const {
        if (refs.empty()) throw DataError("similarity index: empty");
        double n = 0;
        for (double v : q) n += v * v;
        n = std::sqrt(n);
        if (n == 0.0) throw NumericError("similarity index: zero-norm query");
        double best = -1.0;
        for (const auto& r : refs) {
            double dot = 0;
            for (size_t i = 0; i < q.size(); ++i) dot += q[i] * r[i];
            best = std::max(best, dot / n);
        }
        return best;
    }
};

// ---------------------------------------------------------------------------
// AUROC via the Mann-Whitney rank formulation with average ranks for ties.

inline double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) throw DataError("auroc: empty score set");
    struct Entry {
        double s;
        bool is_pos;
    };
    std::vector<Entry> all;
    all.reserve(pos.size() + neg.size());
    for (double s : pos) all.push_back({s, true});
    for (double s : neg) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.s < b.s; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j + 1 < all.size() && all[j + 1].s == all[i].s) ++j;
        const double avg_rank = 0.5 * double(i + 1 + j + 1);  // ranks are 1-based
        for (size_t k = i; k <= j; ++k)
            if (all[k].is_pos) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double np = double(pos.size()), nn = double(neg.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// ---------------------------------------------------------------------------
// Hard-brake study: index 80% of detected events by their pre-event
// embeddings, score held-out events against every other window.

struct HardBrakeResult {
    double auroc_score = 0.0;
    size_t n_events = 0;
    std::vector<double> pos_scores, neg_scores;
    struct NegativeRow {
        std::string session_id;
        size_t t = 0;
        double score = 0.0;      // cosine similarity
        double channel_diff = 0.0;  // its own max-min over the detector window
    };
    std::vector<NegativeRow> top_negatives;
};

inline HardBrakeResult hard_brake_experiment(const std::vector<const Session*>& raw_sessions,
                                             const ChannelSchema& schema, const Normalizer& nz,
                                             const Drive2VecModel& model,
                                             const DetectorConfig& cfg, uint64_t seed) {
    cfg.validate();
    const size_t wlen = model.arch.window_len;

    struct Ev {
        size_t session = 0;
        size_t start = 0;
    };
    std::vector<Ev> events;
    for (size_t s = 0; s < raw_sessions.size(); ++s) {
        for (const auto& e :
             scan_events(*raw_sessions[s], schema, cfg, ScanMode::Threshold, cfg.channel))
            if (e.start >= wlen - 1) events.push_back({s, e.start});
    }
    if (events.size() < 5) throw DataError("hard_brake_experiment: fewer than 5 events");

    std::mt19937_64 rng(derive_seed(seed, "hard-brake"));
    std::shuffle(events.begin(), events.end(), rng);
    const size_t n_index =
        std::min(events.size() - 1,
                 std::max<size_t>(1, size_t(std::lround(double(events.size()) * cfg.train_fraction))));

    std::vector<char> is_event_start;  // per session x t lookup built below
    HardBrakeResult res;
    res.n_events = events.size();

    // Embed every stride-1 window of every session once.
    const auto cols = schema.model_columns();
    const size_t D = cols.size();
    ModelCache cache;
    Matrix window(wlen, D);
    SimilarityIndex index;

    std::vector<std::vector<Vec>> all_embs(raw_sessions.size());
    for (size_t s = 0; s < raw_sessions.size(); ++s) {
        const Session norm = nz.apply(*raw_sessions[s], schema);
        const size_t T = norm.rows();
        if (T < wlen) continue;
        all_embs[s].reserve(T - wlen + 1);
        for (size_t t = wlen - 1; t < T; ++t) {
            for (size_t r = 0; r < wlen; ++r)
                for (size_t j = 0; j < D; ++j)
                    window(r, j) = norm.values(t - wlen + 1 + r, cols[j]);
            all_embs[s].push_back(forward_embed(model, window, cache));
        }
    }

    std::vector<std::vector<char>> taken(raw_sessions.size());
    for (size_t s = 0; s < raw_sessions.size(); ++s)
        taken[s].assign(all_embs[s].size(), 0);
    auto emb_at = [&](const Ev& e) -> const Vec& { return all_embs[e.session][e.start - (wlen - 1)]; };

    for (size_t i = 0; i < n_index; ++i) {
        index.add(emb_at(events[i]));
        taken[events[i].session][events[i].start - (wlen - 1)] = 1;
    }
    for (size_t i = n_index; i < events.size(); ++i) {
        res.pos_scores.push_back(index.score(emb_at(events[i])));
        taken[events[i].session][events[i].start - (wlen - 1)] = 1;
    }

    std::vector<HardBrakeResult::NegativeRow> negatives;
    const int col = schema.index_of(cfg.channel);
    for (size_t s = 0; s < raw_sessions.size(); ++s) {
        const Session& raw = *raw_sessions[s];
        for (size_t k = 0; k < all_embs[s].size(); ++k) {
            if (taken[s][k]) continue;
            const size_t t = k + wlen - 1;
            const double sc = index.score(all_embs[s][k]);
            res.neg_scores.push_back(sc);
            double diff = 0.0;
            if (t + cfg.window <= raw.rows()) {
                double lo = raw.values(t, size_t(col)), hi = lo;
                for (size_t j = 1; j < cfg.window; ++j) {
                    const double v = raw.values(t + j, size_t(col));
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                diff = hi - lo;
            }
            negatives.push_back({raw.session_id, t, sc, diff});
        }
    }
    res.auroc_score = auroc(res.pos_scores, res.neg_scores);

    std::stable_sort(negatives.begin(), negatives.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    negatives.resize(std::min<size_t>(negatives.size(), 10));
    res.top_negatives = std::move(negatives);
    return res;
}

// ---------------------------------------------------------------------------
// Exact t-SNE with per-point bandwidth found by bisection.

struct TsneConfig {
    double perplexity = 30.0;
    size_t iters = 1000;
    double lr = 200.0;
    uint64_t seed = 0;
};

struct TsneResult {
    Matrix y;  // N x 2
    std::vector<double> kl_trace;
};

// KL(P || Q(Y)) and its gradient w.r.t. Y, for a fixed symmetric affinity P.
inline double tsne_kl_grad(const Matrix& P, const Matrix& y, Matrix* grad) {
    const size_t n = y.rows;
    Matrix w(n, n);
    double wsum = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d2 = 0;
            for (size_t c = 0; c < y.cols; ++c) {
                const double d = y(i, c) - y(j, c);
                d2 += d * d;
            }
            w(i, j) = 1.0 / (1.0 + d2);
            wsum += w(i, j);
        }
    double kl = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double q = std::max(w(i, j) / wsum, 1e-12);
            kl += P(i, j) * std::log(std::max(P(i, j), 1e-12) / q);
        }
    if (grad) {
        *grad = Matrix(n, y.cols);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double q = w(i, j) / wsum;
                const double coef = 4.0 * (P(i, j) - q) * w(i, j);
                for (size_t c = 0; c < y.cols; ++c)
                    (*grad)(i, c) += coef * (y(i, c) - y(j, c));
            }
    }
    return kl;
}

// Symmetrized affinities with sigma chosen per point to hit the target
// perplexity (log-perplexity matched to 1e-5 by bisection).
inline Matrix tsne_affinities(const Matrix& x, double perplexity, std::mt19937_64& rng) {
    const size_t n = x.rows;
    Matrix d2(n, n);
    bool duplicates = false;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double s = 0;
            for (size_t c = 0; c < x.cols; ++c) {
                const double d = x(i, c) - x(j, c);
                s += d * d;
            }
            d2(i, j) = d2(j, i) = s;
            if (s == 0.0) duplicates = true;
        }
    if (duplicates) {
        // documented jitter for exact duplicates
        std::normal_distribution<double> jit(0.0, 1e-10);
        Matrix xj = x;
        for (auto& v : xj.data) v += jit(rng);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                double s = 0;
                for (size_t c = 0; c < x.cols; ++c) {
                    const double d = xj(i, c) - xj(j, c);
                    s += d * d;
                }
                d2(i, j) = d2(j, i) = s;
            }
    }

    const double target = std::log(perplexity);
    Matrix p(n, n);
    std::vector<double> row(n);
    for (size_t i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 100; ++it) {
            double sum = 0.0;
            for (size_t j = 0; j < n; ++j) {
                row[j] = i == j ? 0.0 : std::exp(-beta * d2(i, j));
                sum += row[j];
            }
            if (sum <= 0.0) {
                beta_hi = beta;
                beta = 0.5 * (beta_lo + beta);
                continue;
            }
            double h = 0.0;
            for (size_t j = 0; j < n; ++j) {
                if (row[j] <= 0.0) continue;
                const double pj = row[j] / sum;
                h -= pj * std::log(pj);
            }
            if (std::abs(h - target) < 1e-5) break;
            if (h > target) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = 0.5 * (beta_lo + beta);
            }
        }
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j) sum += row[j];
        if (sum <= 0.0) throw NumericError("tsne: perplexity search failed");
        for (size_t j = 0; j < n; ++j) p(i, j) = row[j] / sum;
    }

    Matrix sym(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            sym(i, j) = std::max((p(i, j) + p(j, i)) / (2.0 * double(n)), 1e-12);
    return sym;
}

// One fused pass: KL against the true affinities and the gradient of the
// (possibly exaggerated) objective. Matches tsne_kl_grad exactly.
inline double tsne_iteration(const Matrix& P, double exaggeration, const Matrix& y, Matrix& grad) {
    const size_t n = y.rows;
    Matrix w(n, n);
    double wsum = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double d2 = 0;
            for (size_t c = 0; c < y.cols; ++c) {
                const double d = y(i, c) - y(j, c);
                d2 += d * d;
            }
            const double wij = 1.0 / (1.0 + d2);
            w(i, j) = w(j, i) = wij;
            wsum += 2.0 * wij;
        }
    grad = Matrix(n, y.cols);
    double kl = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            const double q = w(i, j) / wsum;
            kl += 2.0 * P(i, j) * std::log(std::max(P(i, j), 1e-12) / std::max(q, 1e-12));
            const double coef = 4.0 * (exaggeration * P(i, j) - q) * w(i, j);
            for (size_t c = 0; c < y.cols; ++c) {
                const double d = coef * (y(i, c) - y(j, c));
                grad(i, c) += d;
                grad(j, c) -= d;
            }
        }
    return kl;
}

inline TsneResult tsne(const Matrix& points, const TsneConfig& cfg = {}) {
    const size_t n = points.rows;
    if (double(n) < 3.0 * cfg.perplexity)
        throw ConfigError("tsne: need at least 3x perplexity points");

    std::mt19937_64 rng(derive_seed(cfg.seed, "tsne"));
    Matrix P = tsne_affinities(points, cfg.perplexity, rng);

    TsneResult res;
    res.y = Matrix(n, 2);
    std::normal_distribution<double> init(0.0, 1e-4);
    for (auto& v : res.y.data) v = init(rng);

    Matrix vel(n, 2), grad;

    for (size_t iter = 0; iter < cfg.iters; ++iter) {
        const double exag = iter < 100 ? 4.0 : 1.0;
        res.kl_trace.push_back(tsne_iteration(P, exag, res.y, grad));
        const double momentum = iter < 250 ? 0.5 : 0.8;
        for (size_t k = 0; k < res.y.data.size(); ++k) {
            vel.data[k] = momentum * vel.data[k] - cfg.lr * grad.data[k];
            res.y.data[k] += vel.data[k];
        }
    }
    res.kl_trace.push_back(tsne_kl_grad(P, res.y, nullptr));
    return res;
}

// ---------------------------------------------------------------------------
// Temporal-evolution emission: embeddings -> PCA-3 -> min-max RGB.

struct RgbPoint {
    double lat = 0.0, lon = 0.0;
    double r = 0.5, g = 0.5, b = 0.5;
};

inline std::vector<RgbPoint> pca3_rgb(const std::vector<Vec>& embeddings,
                                      const std::vector<std::pair<double, double>>& latlon) {
    if (embeddings.size() != latlon.size()) throw DataError("pca3_rgb: misaligned inputs");
    if (embeddings.empty()) return {};
    const size_t n = embeddings.size();
    const size_t d = embeddings.front().size();

    std::vector<RgbPoint> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].lat = latlon[i].first;
        out[i].lon = latlon[i].second;
    }

    const size_t k = std::min<size_t>(3, std::min(n - 1, d));
    bool degenerate = n < 4;
    Matrix proj(n, 3);
    if (!degenerate) {
        Matrix rows(n, d);
        for (size_t i = 0; i < n; ++i)
            std::copy(embeddings[i].begin(), embeddings[i].end(), rows.row(i));
        const PcaModel pca = pca_fit(rows, k);
        for (size_t i = 0; i < n; ++i) {
            const Vec e = pca_embed(pca, embeddings[i]);
            for (size_t c = 0; c < k; ++c) proj(i, c) = e[c];
        }
    }
    for (size_t c = 0; c < 3 && !degenerate; ++c) {
        double lo = proj(0, c), hi = proj(0, c);
        for (size_t i = 1; i < n; ++i) {
            lo = std::min(lo, proj(i, c));
            hi = std::max(hi, proj(i, c));
        }
        for (size_t i = 0; i < n; ++i) {
            double v = hi - lo > 1e-12 ? (proj(i, c) - lo) / (hi - lo) : 0.5;
            if (c == 0) out[i].r = v;
            if (c == 1) out[i].g = v;
            if (c == 2) out[i].b = v;
        }
    }
    return out;
}

}  // namespace d2v
