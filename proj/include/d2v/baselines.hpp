#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <json.hpp>

#include "d2v/matrix.hpp"
#include "d2v/nn.hpp"
#include "d2v/util.hpp"

namespace d2v {

// ---------------------------------------------------------------------------
// PCA via cyclic Jacobi on the sample covariance. D stays small here, so the
// exact dense route is the right tool.

struct PcaModel {
    Vec mean;           // D
    Matrix components;  // k x D, rows orthonormal
    Vec variances;      // k, nonincreasing

    size_t k() const { return components.rows; }
    size_t dim() const { return components.cols; }
};

// Eigendecomposition of a symmetric matrix. Eigenvectors come back as rows of
// vecs, paired with vals, unsorted.
inline void jacobi_eigen_symmetric(Matrix a, Vec& vals, Matrix& vecs) {
    const size_t n = a.rows;
    if (a.cols != n) throw NumericError("jacobi: matrix not square");
    vecs = Matrix(n, n);
    for (size_t i = 0; i < n; ++i) vecs(i, i) = 1.0;

    double total = 0.0;
    for (double v : a.data) total += v * v;
    const double tol = total * 1e-28 + 1e-300;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < tol) break;

        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double vip = vecs(p, i), viq = vecs(q, i);
                    vecs(p, i) = c * vip - s * viq;
                    vecs(q, i) = s * vip + c * viq;
                }
            }
        }
    }
    vals.resize(n);
    for (size_t i = 0; i < n; ++i) vals[i] = a(i, i);
}

inline PcaModel pca_fit(const Matrix& rows, size_t k) {
    const size_t n = rows.rows, d = rows.cols;
    if (k < 1 || k > std::min(n - 1, d)) throw ConfigError("pca_fit: invalid component count");

    PcaModel m;
    m.mean.assign(d, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < d; ++j) m.mean[j] += rows(i, j);
    for (auto& v : m.mean) v /= double(n);

    Matrix cov(d, d);
    for (size_t i = 0; i < n; ++i) {
        const double* r = rows.row(i);
        for (size_t p = 0; p < d; ++p) {
            const double cp = r[p] - m.mean[p];
            for (size_t q = p; q < d; ++q) cov(p, q) += cp * (r[q] - m.mean[q]);
        }
    }
    for (size_t p = 0; p < d; ++p)
        for (size_t q = p; q < d; ++q) {
            cov(p, q) /= double(n - 1);
            cov(q, p) = cov(p, q);
        }

    Vec vals;
    Matrix vecs;
    jacobi_eigen_symmetric(cov, vals, vecs);

    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return vals[a] > vals[b]; });

    m.components = Matrix(k, d);
    m.variances.resize(k);
    for (size_t c = 0; c < k; ++c) {
        const size_t src = order[c];
        m.variances[c] = vals[src];
        // sign convention: largest-magnitude entry positive
        size_t arg = 0;
        for (size_t j = 1; j < d; ++j)
            if (std::abs(vecs(src, j)) > std::abs(vecs(src, arg))) arg = j;
        const double sgn = vecs(src, arg) < 0 ? -1.0 : 1.0;
        for (size_t j = 0; j < d; ++j) m.components(c, j) = sgn * vecs(src, j);
    }
    return m;
}

inline Vec pca_embed(const PcaModel& m, const Vec& row) {
    if (row.size() != m.dim()) throw NumericError("pca_embed: dimension mismatch");
    Vec centered(row);
    for (size_t j = 0; j < centered.size(); ++j) centered[j] -= m.mean[j];
    return matvec(m.components, centered);
}

inline Vec pca_reconstruct(const PcaModel& m, const Vec& embedded) {
    Vec out(m.mean);
    for (size_t c = 0; c < m.k(); ++c)
        for (size_t j = 0; j < m.dim(); ++j) out[j] += m.components(c, j) * embedded[c];
    return out;
}

// ---------------------------------------------------------------------------
// Last-timestep baseline

inline Vec last_timestep_predict(const Matrix& window) {
    if (window.rows == 0) throw NumericError("last_timestep_predict: empty window");
    return Vec(window.row(window.rows - 1), window.row(window.rows - 1) + window.cols);
}

// ---------------------------------------------------------------------------
// Shared regression-head protocol: one affine layer from embedding to target,
// same optimizer and budget for every embedding method.

enum class TaskKind { ExactValues, Averages };

struct HeadConfig {
    double lr = 0.02;
    size_t epochs = 80;
    size_t batch_size = 256;
    size_t patience = 10;
    double val_fraction = 0.1;
    uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"lr", lr},           {"epochs", epochs},
                {"batch_size", batch_size}, {"patience", patience},
                {"val_fraction", val_fraction}, {"seed", seed}};
    }
    uint64_t digest() const { return fnv1a64(to_json().dump()); }
};

struct RegressionHead {
    DenseParams fc;  // identity pre-activation; boolean outputs are logits
    TaskKind kind = TaskKind::Averages;
    std::vector<bool> is_bool;  // empty for pure-MSE tasks
    uint64_t config_digest = 0;
};

inline Vec head_predict(const RegressionHead& h, const Vec& embedding) {
    return dense_forward(embedding, h.fc);
}

// Loss on one sample; grad w.r.t. raw outputs if d_out non-null.
inline double head_loss(const RegressionHead& h, const Vec& out, const Vec& target,
                        Vec* d_out = nullptr) {
    const size_t D = out.size();
    if (d_out) d_out->assign(D, 0.0);
    if (h.kind == TaskKind::Averages || h.is_bool.empty()) {
        double s = 0.0;
        for (size_t j = 0; j < D; ++j) {
            const double d = out[j] - target[j];
            s += d * d;
            if (d_out) (*d_out)[j] = 2.0 * d / double(D);
        }
        return s / double(D);
    }
    size_t n_bool = 0;
    for (bool b : h.is_bool) n_bool += b;
    const size_t n_float = D - n_bool;
    double mse = 0.0, bce = 0.0;
    for (size_t j = 0; j < D; ++j) {
        if (h.is_bool[j]) {
            const double l = out[j], y = target[j];
            bce += std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
            if (d_out) (*d_out)[j] = (sigmoid(l) - y) / double(n_bool);
        } else {
            const double d = out[j] - target[j];
            mse += d * d;
            if (d_out) (*d_out)[j] = 2.0 * d / double(n_float);
        }
    }
    return (n_float ? mse / double(n_float) : 0.0) + (n_bool ? bce / double(n_bool) : 0.0);
}

inline RegressionHead train_head(const std::vector<Vec>& embeddings,
                                 const std::vector<Vec>& targets, TaskKind kind,
                                 const std::vector<bool>& is_bool, const HeadConfig& cfg) {
    if (embeddings.empty() || embeddings.size() != targets.size())
        throw DataError("train_head: misaligned inputs");
    const size_t in = embeddings.front().size();
    const size_t out_dim = targets.front().size();

    RegressionHead head;
    head.kind = kind;
    head.is_bool = kind == TaskKind::ExactValues ? is_bool : std::vector<bool>{};
    head.config_digest = cfg.digest();
    std::mt19937_64 rng(derive_seed(cfg.seed, "head"));
    head.fc = DenseParams::create(in, out_dim, Activation::identity, rng);

    // The trailing fraction (session-coherent when inputs arrive in session
    // order) drives early stopping; only the training part gets shuffled.
    std::vector<size_t> order(embeddings.size());
    std::iota(order.begin(), order.end(), 0);
    const size_t n_val = std::max<size_t>(1, size_t(double(order.size()) * cfg.val_fraction));
    const size_t n_train = order.size() - n_val;
    if (n_train == 0) throw DataError("train_head: too few samples");

    DenseGrads grads = DenseGrads::like(head.fc);
    DenseCache cache;
    Vec d_out, dx_unused, scratch, y(out_dim);
    AdamState adam;
    adam.lr = cfg.lr;

    DenseParams best = head.fc;
    double best_val = std::numeric_limits<double>::infinity();
    size_t since_best = 0;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 erng(derive_seed(cfg.seed, "head-epoch", epoch));
        std::shuffle(order.begin(), order.begin() + n_train, erng);
        for (size_t start = 0; start < n_train; start += cfg.batch_size) {
            const size_t end = std::min(n_train, start + cfg.batch_size);
            grads.zero();
            for (size_t i = start; i < end; ++i) {
                const size_t idx = order[i];
                dense_forward_into(embeddings[idx].data(), head.fc, cache, y.data());
                head_loss(head, y, targets[idx], &d_out);
                dense_backward(head.fc, cache, d_out.data(), grads, nullptr, scratch);
            }
            const double inv = 1.0 / double(end - start);
            for (auto* a : grads.arrays())
                for (double& v : *a) v *= inv;
            adam_step(head.fc.arrays(), std::as_const(grads).arrays(), adam);
        }
        double val = 0.0;
        for (size_t i = n_train; i < order.size(); ++i) {
            const size_t idx = order[i];
            dense_forward_into(embeddings[idx].data(), head.fc, cache, y.data());
            val += head_loss(head, y, targets[idx]);
        }
        val /= double(n_val);
        if (!std::isfinite(val)) throw NumericError("train_head: diverged");
        if (val < best_val) {
            best_val = val;
            best = head.fc;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    head.fc = best;
    return head;
}

}  // namespace d2v
