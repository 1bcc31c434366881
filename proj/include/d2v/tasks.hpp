#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "d2v/baselines.hpp"
#include "d2v/nn.hpp"
#include "d2v/util.hpp"

namespace d2v {

struct MetricReport {
    double overall_mse = 0.0;
    Vec per_channel;
    std::vector<size_t> ranking;  // channel indices, worst first
};

// Channelwise MSE; overall is the unweighted mean across channels.
inline MetricReport per_channel_mse(const std::vector<Vec>& preds, const std::vector<Vec>& targets) {
    if (preds.empty() || preds.size() != targets.size())
        throw DataError("per_channel_mse: misaligned inputs");
    const size_t D = preds.front().size();
    MetricReport r;
    r.per_channel.assign(D, 0.0);
    for (size_t i = 0; i < preds.size(); ++i)
        for (size_t j = 0; j < D; ++j) {
            const double d = preds[i][j] - targets[i][j];
            r.per_channel[j] += d * d;
        }
    for (auto& v : r.per_channel) v /= double(preds.size());
    r.overall_mse = std::accumulate(r.per_channel.begin(), r.per_channel.end(), 0.0) / double(D);
    r.ranking.resize(D);
    std::iota(r.ranking.begin(), r.ranking.end(), 0);
    std::stable_sort(r.ranking.begin(), r.ranking.end(),
                     [&](size_t a, size_t b) { return r.per_channel[a] > r.per_channel[b]; });
    return r;
}

// Scores a trained head on held-out pairs. Boolean exact predictions are
// squashed to probabilities so a single MSE is comparable across methods.
inline MetricReport eval_prediction(const RegressionHead& head, const std::vector<Vec>& embeddings,
                                    const std::vector<Vec>& targets) {
    if (embeddings.size() != targets.size() || embeddings.empty())
        throw DataError("eval_prediction: misaligned inputs");
    std::vector<Vec> preds;
    preds.reserve(embeddings.size());
    for (const auto& e : embeddings) {
        Vec p = head_predict(head, e);
        if (head.kind == TaskKind::ExactValues && !head.is_bool.empty())
            for (size_t j = 0; j < p.size(); ++j)
                if (head.is_bool[j]) p[j] = sigmoid(p[j]);
        preds.push_back(std::move(p));
    }
    return per_channel_mse(preds, targets);
}

inline void check_no_contamination(const std::set<std::string>& train_sessions,
                                   const std::set<std::string>& test_sessions) {
    for (const auto& s : test_sessions)
        if (train_sessions.count(s))
            throw ContaminationError("evaluation: session '" + s + "' appears in both splits");
}

// ---------------------------------------------------------------------------
// Micro-averaged F1. For single-label multiclass this equals accuracy; both
// routes are computed and must agree.

inline double micro_f1(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw DataError("micro_f1: empty or misaligned inputs");
    std::map<int, size_t> tp, fp, fn;
    size_t correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) {
            ++tp[labels[i]];
            ++correct;
        } else {
            ++fp[predictions[i]];
            ++fn[labels[i]];
        }
    }
    size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
    for (auto& [k, v] : tp) tp_sum += v;
    for (auto& [k, v] : fp) fp_sum += v;
    for (auto& [k, v] : fn) fn_sum += v;
    const double denom = double(2 * tp_sum + fp_sum + fn_sum);
    const double f1 = denom > 0 ? 2.0 * double(tp_sum) / denom : 0.0;
    const double accuracy = double(correct) / double(predictions.size());
    if (std::abs(f1 - accuracy) > 1e-12)
        throw NumericError("micro_f1: accuracy identity violated");
    return f1;
}

// Expected accuracy of guessing from the class prior. With one label set
// this is the sum of squared priors; with a separate guessing prior it is
// the cross product (the two coincide when train and test priors match).
inline double weighted_random_baseline(const std::vector<int>& labels) {
    std::map<int, size_t> counts;
    for (int l : labels) ++counts[l];
    double s = 0.0;
    for (auto& [k, c] : counts) {
        const double p = double(c) / double(labels.size());
        s += p * p;
    }
    return s;
}

inline double weighted_random_baseline(const std::vector<int>& guess_prior_labels,
                                       const std::vector<int>& truth_labels) {
    std::map<int, double> p_guess, p_truth;
    for (int l : guess_prior_labels) p_guess[l] += 1.0 / double(guess_prior_labels.size());
    for (int l : truth_labels) p_truth[l] += 1.0 / double(truth_labels.size());
    double s = 0.0;
    for (auto& [k, p] : p_guess) {
        auto it = p_truth.find(k);
        if (it != p_truth.end()) s += p * it->second;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Driver identification: affine -> ELU(32) -> affine -> softmax.

struct DriverIdConfig {
    size_t hidden = 32;
    double lr = 0.01;
    size_t epochs = 120;
    size_t batch_size = 128;
    size_t patience = 12;
    double val_fraction = 0.1;
    uint64_t seed = 0;
};

struct DriverIdModel {
    DenseParams fc1, fc2;
    std::vector<std::string> classes;  // index -> driver id
};

inline int driver_id_classify(const DriverIdModel& m, const Vec& embedding) {
    Vec h = dense_forward(embedding, m.fc1);
    Vec logits = dense_forward(h, m.fc2);
    return int(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

struct DriverIdResult {
    DriverIdModel model;
    double test_micro_f1 = 0.0;
    double weighted_random = 0.0;
    std::vector<int> test_predictions;
    std::vector<int> test_labels;
};

inline DriverIdResult train_driver_id(const std::vector<Vec>& train_embs,
                                      const std::vector<std::string>& train_drivers,
                                      const std::vector<Vec>& test_embs,
                                      const std::vector<std::string>& test_drivers,
                                      const DriverIdConfig& cfg) {
    if (train_embs.size() != train_drivers.size() || test_embs.size() != test_drivers.size())
        throw DataError("train_driver_id: misaligned inputs");
    if (train_embs.empty() || test_embs.empty()) throw DataError("train_driver_id: empty split");

    DriverIdResult res;
    std::set<std::string> class_set(train_drivers.begin(), train_drivers.end());
    res.model.classes.assign(class_set.begin(), class_set.end());
    if (res.model.classes.size() < 2) throw DataError("train_driver_id: need >= 2 drivers");
    auto class_index = [&](const std::string& d) {
        const auto it = std::lower_bound(res.model.classes.begin(), res.model.classes.end(), d);
        if (it == res.model.classes.end() || *it != d)
            throw DataError("train_driver_id: test driver '" + d + "' unseen in training");
        return int(it - res.model.classes.begin());
    };

    std::vector<int> train_y;
    for (const auto& d : train_drivers) train_y.push_back(class_index(d));
    for (const auto& d : test_drivers) res.test_labels.push_back(class_index(d));

    const size_t in = train_embs.front().size();
    const size_t C = res.model.classes.size();
    std::mt19937_64 rng(derive_seed(cfg.seed, "driver-id"));
    res.model.fc1 = DenseParams::create(in, cfg.hidden, Activation::elu, rng);
    res.model.fc2 = DenseParams::create(cfg.hidden, C, Activation::identity, rng);

    std::vector<size_t> order(train_embs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const size_t n_val = std::max<size_t>(1, size_t(double(order.size()) * cfg.val_fraction));
    const size_t n_train = order.size() - n_val;

    DenseGrads g1 = DenseGrads::like(res.model.fc1);
    DenseGrads g2 = DenseGrads::like(res.model.fc2);
    DenseCache c1, c2;
    Vec h(cfg.hidden), logits(C), probs(C), d_logits(C), d_h(cfg.hidden), scratch;
    AdamState adam;
    adam.lr = cfg.lr;
    ArrayRefs params;
    for (auto* a : res.model.fc1.arrays()) params.push_back(a);
    for (auto* a : res.model.fc2.arrays()) params.push_back(a);

    auto ce_loss = [&](size_t idx, int label, bool backprop) {
        dense_forward_into(train_embs[idx].data(), res.model.fc1, c1, h.data());
        dense_forward_into(h.data(), res.model.fc2, c2, logits.data());
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (size_t c = 0; c < C; ++c) z += std::exp(logits[c] - mx);
        const double logz = std::log(z) + mx;
        if (backprop) {
            for (size_t c = 0; c < C; ++c)
                d_logits[c] = std::exp(logits[c] - logz) - (int(c) == label ? 1.0 : 0.0);
            dense_backward(res.model.fc2, c2, d_logits.data(), g2, d_h.data(), scratch);
            dense_backward(res.model.fc1, c1, d_h.data(), g1, nullptr, scratch);
        }
        return logz - logits[size_t(label)];
    };

    DenseParams best1 = res.model.fc1, best2 = res.model.fc2;
    double best_val = std::numeric_limits<double>::infinity();
    size_t since_best = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 erng(derive_seed(cfg.seed, "driver-id-epoch", epoch));
        std::shuffle(order.begin(), order.begin() + n_train, erng);
        for (size_t start = 0; start < n_train; start += cfg.batch_size) {
            const size_t end = std::min(n_train, start + cfg.batch_size);
            g1.zero();
            g2.zero();
            for (size_t i = start; i < end; ++i) ce_loss(order[i], train_y[order[i]], true);
            const double inv = 1.0 / double(end - start);
            ArrayRefs grad_refs;
            for (auto* a : g1.arrays()) grad_refs.push_back(a);
            for (auto* a : g2.arrays()) grad_refs.push_back(a);
            for (auto* a : grad_refs)
                for (double& v : *a) v *= inv;
            adam_step(params, ConstArrayRefs(grad_refs.begin(), grad_refs.end()), adam);
        }
        double val = 0.0;
        for (size_t i = n_train; i < order.size(); ++i)
            val += ce_loss(order[i], train_y[order[i]], false);
        val /= double(n_val);
        if (val < best_val) {
            best_val = val;
            best1 = res.model.fc1;
            best2 = res.model.fc2;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    res.model.fc1 = best1;
    res.model.fc2 = best2;

    for (const auto& e : test_embs) res.test_predictions.push_back(driver_id_classify(res.model, e));
    res.test_micro_f1 = micro_f1(res.test_predictions, res.test_labels);
    res.weighted_random = weighted_random_baseline(train_y, res.test_labels);
    return res;
}

// ---------------------------------------------------------------------------
// Sweep scaffolding. The per-point work comes in as a callback; points are
// deduplicated and returned in ascending order.

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
};

inline std::vector<CurvePoint> sweep_curve(std::vector<double> grid,
                                           const std::function<double(double)>& eval_at) {
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::vector<CurvePoint> out;
    for (double x : grid) out.push_back({x, eval_at(x)});
    return out;
}

}  // namespace d2v
