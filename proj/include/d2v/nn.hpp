#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "d2v/matrix.hpp"
#include "d2v/util.hpp"

namespace d2v {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ELU with alpha = 1.
inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double elu_grad(double pre) { return pre >= 0.0 ? 1.0 : std::exp(pre); }

enum class Activation { elu, sigmoid, identity };

inline double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::elu: return elu(x);
        case Activation::sigmoid: return sigmoid(x);
        default: return x;
    }
}

inline double activation_grad(Activation a, double pre) {
    switch (a) {
        case Activation::elu: return elu_grad(pre);
        case Activation::sigmoid: {
            const double s = sigmoid(pre);
            return s * (1.0 - s);
        }
        default: return 1.0;
    }
}

// Parameter packs expose their arrays in a fixed order so the optimizer and
// the checkpoint writer walk them identically.
using ArrayRefs = std::vector<std::vector<double>*>;
using ConstArrayRefs = std::vector<const std::vector<double>*>;

// ---------------------------------------------------------------------------
// GRU cell

struct GruParams {
    Matrix Wz, Uz, Wr, Ur, Wh, Uh;  // W*: hidden x input, U*: hidden x hidden
    Vec bz, br, bh;

    size_t input_dim() const { return Wz.cols; }
    size_t hidden_dim() const { return Wz.rows; }

    static GruParams create(size_t input, size_t hidden, std::mt19937_64& rng) {
        GruParams p;
        p.Wz = Matrix(hidden, input);
        p.Uz = Matrix(hidden, hidden);
        p.Wr = Matrix(hidden, input);
        p.Ur = Matrix(hidden, hidden);
        p.Wh = Matrix(hidden, input);
        p.Uh = Matrix(hidden, hidden);
        p.bz = Vec(hidden, 0.0);
        p.br = Vec(hidden, 0.0);
        p.bh = Vec(hidden, 0.0);
        init_uniform(p.Wz, input, hidden, rng);
        init_uniform(p.Uz, hidden, hidden, rng);
        init_uniform(p.Wr, input, hidden, rng);
        init_uniform(p.Ur, hidden, hidden, rng);
        init_uniform(p.Wh, input, hidden, rng);
        init_uniform(p.Uh, hidden, hidden, rng);
        return p;
    }

    static GruParams zeros(size_t input, size_t hidden) {
        GruParams p;
        p.Wz = Matrix(hidden, input);
        p.Uz = Matrix(hidden, hidden);
        p.Wr = Matrix(hidden, input);
        p.Ur = Matrix(hidden, hidden);
        p.Wh = Matrix(hidden, input);
        p.Uh = Matrix(hidden, hidden);
        p.bz = Vec(hidden, 0.0);
        p.br = Vec(hidden, 0.0);
        p.bh = Vec(hidden, 0.0);
        return p;
    }

    ArrayRefs arrays() {
        return {&Wz.data, &Uz.data, &bz, &Wr.data, &Ur.data, &br, &Wh.data, &Uh.data, &bh};
    }
    ConstArrayRefs arrays() const {
        return {&Wz.data, &Uz.data, &bz, &Wr.data, &Ur.data, &br, &Wh.data, &Uh.data, &bh};
    }
};

struct GruGrads {
    Matrix Wz, Uz, Wr, Ur, Wh, Uh;
    Vec bz, br, bh;

    static GruGrads like(const GruParams& p) {
        GruGrads g;
        g.Wz = Matrix(p.Wz.rows, p.Wz.cols);
        g.Uz = Matrix(p.Uz.rows, p.Uz.cols);
        g.Wr = Matrix(p.Wr.rows, p.Wr.cols);
        g.Ur = Matrix(p.Ur.rows, p.Ur.cols);
        g.Wh = Matrix(p.Wh.rows, p.Wh.cols);
        g.Uh = Matrix(p.Uh.rows, p.Uh.cols);
        g.bz = Vec(p.bz.size(), 0.0);
        g.br = Vec(p.br.size(), 0.0);
        g.bh = Vec(p.bh.size(), 0.0);
        return g;
    }

    void zero() {
        Wz.fill(0);
        Uz.fill(0);
        Wr.fill(0);
        Ur.fill(0);
        Wh.fill(0);
        Uh.fill(0);
        std::fill(bz.begin(), bz.end(), 0.0);
        std::fill(br.begin(), br.end(), 0.0);
        std::fill(bh.begin(), bh.end(), 0.0);
    }

    ArrayRefs arrays() {
        return {&Wz.data, &Uz.data, &bz, &Wr.data, &Ur.data, &br, &Wh.data, &Uh.data, &bh};
    }
    ConstArrayRefs arrays() const {
        return {&Wz.data, &Uz.data, &bz, &Wr.data, &Ur.data, &br, &Wh.data, &Uh.data, &bh};
    }
};

// Per-step cache holding everything backprop needs.
struct GruStepCache {
    Vec x, h_prev, z, r, hcand, uh;  // uh = Uh * h_prev, pre reset gate

    void resize(size_t input, size_t hidden) {
        x.resize(input);
        h_prev.resize(hidden);
        z.resize(hidden);
        r.resize(hidden);
        hcand.resize(hidden);
        uh.resize(hidden);
    }
};

// h_next = z.h_prev + (1-z).tanh(Wh x + r.(Uh h_prev) + bh)
// z = sigmoid(Wz x + Uz h_prev + bz), r = sigmoid(Wr x + Ur h_prev + br)
inline void gru_cell_step_into(const double* x, const double* h_prev, const GruParams& p,
                               GruStepCache& cache, double* h_next) {
    const size_t in = p.input_dim();
    const size_t hid = p.hidden_dim();
    cache.resize(in, hid);
    std::copy(x, x + in, cache.x.begin());
    std::copy(h_prev, h_prev + hid, cache.h_prev.begin());

    Vec& z = cache.z;
    Vec& r = cache.r;
    Vec& hc = cache.hcand;
    Vec& uh = cache.uh;

    matvec_into(p.Wz, x, z.data());
    matvec_add(p.Uz, h_prev, z.data());
    for (size_t i = 0; i < hid; ++i) z[i] = sigmoid(z[i] + p.bz[i]);

    matvec_into(p.Wr, x, r.data());
    matvec_add(p.Ur, h_prev, r.data());
    for (size_t i = 0; i < hid; ++i) r[i] = sigmoid(r[i] + p.br[i]);

    matvec_into(p.Uh, h_prev, uh.data());
    matvec_into(p.Wh, x, hc.data());
    for (size_t i = 0; i < hid; ++i) hc[i] = std::tanh(hc[i] + r[i] * uh[i] + p.bh[i]);

    for (size_t i = 0; i < hid; ++i) h_next[i] = z[i] * h_prev[i] + (1.0 - z[i]) * hc[i];
}

inline Vec gru_cell_step(const Vec& x, const Vec& h_prev, const GruParams& p,
                         GruStepCache* cache = nullptr) {
    if (x.size() != p.input_dim() || h_prev.size() != p.hidden_dim())
        throw NumericError("gru_cell_step: dimension mismatch");
    GruStepCache local;
    GruStepCache& c = cache ? *cache : local;
    Vec h(p.hidden_dim());
    gru_cell_step_into(x.data(), h_prev.data(), p, c, h.data());
    if (!all_finite(h)) throw NumericError("gru_cell_step: non-finite hidden state");
    return h;
}

// Accumulates parameter gradients for one step. dh is the gradient w.r.t.
// h_next; dh_prev receives the gradient w.r.t. h_prev (accumulated), dx (if
// non-null) receives the gradient w.r.t. x (overwritten).
inline void gru_cell_backward(const GruParams& p, const GruStepCache& c, const double* dh,
                              GruGrads& g, double* dh_prev, double* dx, Vec& scratch) {
    const size_t hid = p.hidden_dim();
    scratch.resize(4 * hid);
    double* da_h = scratch.data();
    double* da_r = da_h + hid;
    double* da_z = da_r + hid;
    double* duh = da_z + hid;

    for (size_t i = 0; i < hid; ++i) {
        const double z = c.z[i];
        const double hc = c.hcand[i];
        const double dhc = dh[i] * (1.0 - z);
        da_h[i] = dhc * (1.0 - hc * hc);
        const double dz = dh[i] * (c.h_prev[i] - hc);
        da_z[i] = dz * z * (1.0 - z);
        const double dr = da_h[i] * c.uh[i];
        da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
        duh[i] = da_h[i] * c.r[i];
        dh_prev[i] += dh[i] * z;
    }

    outer_add(g.Wh, da_h, c.x.data());
    outer_add(g.Uh, duh, c.h_prev.data());
    outer_add(g.Wr, da_r, c.x.data());
    outer_add(g.Ur, da_r, c.h_prev.data());
    outer_add(g.Wz, da_z, c.x.data());
    outer_add(g.Uz, da_z, c.h_prev.data());
    for (size_t i = 0; i < hid; ++i) {
        g.bh[i] += da_h[i];
        g.br[i] += da_r[i];
        g.bz[i] += da_z[i];
    }

    matvec_t_add(p.Uh, duh, dh_prev);
    matvec_t_add(p.Ur, da_r, dh_prev);
    matvec_t_add(p.Uz, da_z, dh_prev);

    if (dx) {
        const size_t in = p.input_dim();
        std::fill(dx, dx + in, 0.0);
        matvec_t_add(p.Wh, da_h, dx);
        matvec_t_add(p.Wr, da_r, dx);
        matvec_t_add(p.Wz, da_z, dx);
    }
}

struct GruSeqCache {
    std::vector<GruStepCache> steps;
    std::vector<Vec> hs;  // hs[t] = hidden state after step t
};

// Runs the cell over a sequence starting from h0 (zero vector if empty).
inline std::vector<Vec> gru_sequence(const std::vector<Vec>& xs, const GruParams& p,
                                     const Vec& h0 = {}, GruSeqCache* cache = nullptr) {
    if (xs.empty()) throw NumericError("gru_sequence: empty sequence");
    const size_t hid = p.hidden_dim();
    Vec h = h0.empty() ? Vec(hid, 0.0) : h0;
    if (h.size() != hid) throw NumericError("gru_sequence: h0 dimension mismatch");
    std::vector<Vec> out;
    out.reserve(xs.size());
    if (cache) cache->steps.resize(xs.size());
    GruStepCache local;
    for (size_t t = 0; t < xs.size(); ++t) {
        if (xs[t].size() != p.input_dim()) throw NumericError("gru_sequence: input dim mismatch");
        GruStepCache& c = cache ? cache->steps[t] : local;
        Vec next(hid);
        gru_cell_step_into(xs[t].data(), h.data(), p, c, next.data());
        h = next;
        out.push_back(std::move(next));
    }
    if (cache) cache->hs = out;
    return out;
}

// Backprop through a recorded sequence. dhs[t] is the external gradient
// arriving at output t (may be empty meaning zero). dxs, if non-null, is
// filled with per-step input gradients.
inline void gru_sequence_backward(const GruParams& p, const std::vector<GruStepCache>& steps,
                                  const std::vector<Vec>& dhs, GruGrads& g,
                                  std::vector<Vec>* dxs, Vec& scratch) {
    const size_t hid = p.hidden_dim();
    const size_t T = steps.size();
    if (dxs) dxs->assign(T, Vec(p.input_dim(), 0.0));
    Vec dh(hid, 0.0);
    Vec dh_prev(hid, 0.0);
    for (size_t ti = T; ti-- > 0;) {
        if (ti < dhs.size() && !dhs[ti].empty())
            for (size_t i = 0; i < hid; ++i) dh[i] += dhs[ti][i];
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        gru_cell_backward(p, steps[ti], dh.data(), g, dh_prev.data(),
                          dxs ? (*dxs)[ti].data() : nullptr, scratch);
        dh = dh_prev;
    }
}

// ---------------------------------------------------------------------------
// Dense layer

struct DenseParams {
    Matrix W;  // out x in
    Vec b;
    Activation act = Activation::identity;

    size_t input_dim() const { return W.cols; }
    size_t output_dim() const { return W.rows; }

    static DenseParams create(size_t input, size_t output, Activation act, std::mt19937_64& rng) {
        DenseParams p;
        p.W = Matrix(output, input);
        p.b = Vec(output, 0.0);
        p.act = act;
        init_uniform(p.W, input, output, rng);
        return p;
    }

    static DenseParams zeros(size_t input, size_t output, Activation act) {
        DenseParams p;
        p.W = Matrix(output, input);
        p.b = Vec(output, 0.0);
        p.act = act;
        return p;
    }

    ArrayRefs arrays() { return {&W.data, &b}; }
    ConstArrayRefs arrays() const { return {&W.data, &b}; }
};

struct DenseGrads {
    Matrix W;
    Vec b;

    static DenseGrads like(const DenseParams& p) {
        DenseGrads g;
        g.W = Matrix(p.W.rows, p.W.cols);
        g.b = Vec(p.b.size(), 0.0);
        return g;
    }
    void zero() {
        W.fill(0);
        std::fill(b.begin(), b.end(), 0.0);
    }
    ArrayRefs arrays() { return {&W.data, &b}; }
    ConstArrayRefs arrays() const { return {&W.data, &b}; }
};

struct DenseCache {
    Vec x, pre;  // input and pre-activation
};

inline void dense_forward_into(const double* x, const DenseParams& p, DenseCache& cache,
                               double* y) {
    const size_t out = p.output_dim();
    cache.x.assign(x, x + p.input_dim());
    cache.pre.resize(out);
    matvec_into(p.W, x, cache.pre.data());
    for (size_t i = 0; i < out; ++i) {
        cache.pre[i] += p.b[i];
        y[i] = apply_activation(p.act, cache.pre[i]);
    }
}

inline Vec dense_forward(const Vec& x, const DenseParams& p, DenseCache* cache = nullptr) {
    if (x.size() != p.input_dim()) throw NumericError("dense_forward: dimension mismatch");
    DenseCache local;
    DenseCache& c = cache ? *cache : local;
    Vec y(p.output_dim());
    dense_forward_into(x.data(), p, c, y.data());
    return y;
}

// Returns gradient w.r.t. x via dx; accumulates parameter gradients.
inline void dense_backward(const DenseParams& p, const DenseCache& c, const double* dy,
                           DenseGrads& g, double* dx, Vec& scratch) {
    const size_t out = p.output_dim();
    scratch.resize(out);
    for (size_t i = 0; i < out; ++i) scratch[i] = dy[i] * activation_grad(p.act, c.pre[i]);
    outer_add(g.W, scratch.data(), c.x.data());
    for (size_t i = 0; i < out; ++i) g.b[i] += scratch[i];
    if (dx) {
        std::fill(dx, dx + p.input_dim(), 0.0);
        matvec_t_add(p.W, scratch.data(), dx);
    }
}

// ---------------------------------------------------------------------------
// Losses

struct LossResult {
    double value = 0.0;
    Vec grad;  // w.r.t. the first argument
};

inline LossResult mse_loss(const Vec& pred, const Vec& target) {
    if (pred.empty() || pred.size() != target.size())
        throw NumericError("mse_loss: empty or mismatched vectors");
    const double n = double(pred.size());
    LossResult r;
    r.grad.resize(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        r.value += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.value /= n;
    return r;
}

// Numerically stable binary cross-entropy on logits.
// Per element: max(l,0) - l*y + log(1 + exp(-|l|)).
inline LossResult bce_loss(const Vec& logits, const Vec& targets) {
    if (logits.empty() || logits.size() != targets.size())
        throw NumericError("bce_loss: empty or mismatched vectors");
    const double n = double(logits.size());
    LossResult r;
    r.grad.resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        const double y = targets[i];
        if (y != 0.0 && y != 1.0) throw NumericError("bce_loss: target not in {0,1}");
        const double l = logits[i];
        r.value += std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
        r.grad[i] = (sigmoid(l) - y) / n;
    }
    r.value /= n;
    return r;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    Vec m, v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline size_t total_size(const ConstArrayRefs& refs) {
    size_t n = 0;
    for (const auto* a : refs) n += a->size();
    return n;
}

inline double grad_global_norm(const ConstArrayRefs& grads) {
    double sq = 0.0;
    for (const auto* a : grads)
        for (double v : *a) sq += v * v;
    return std::sqrt(sq);
}

// Scales gradients in place if their global norm exceeds max_norm.
inline double clip_global_norm(const ArrayRefs& grads, double max_norm) {
    double sq = 0.0;
    for (const auto* a : grads)
        for (double v : *a) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto* a : grads)
            for (double& v : *a) v *= scale;
    }
    return norm;
}

inline void adam_step(const ArrayRefs& params, const ConstArrayRefs& grads, AdamState& st) {
    if (params.size() != grads.size()) throw NumericError("adam_step: pack size mismatch");
    const size_t total = total_size(grads);
    if (st.m.empty()) {
        st.m.assign(total, 0.0);
        st.v.assign(total, 0.0);
    }
    if (st.m.size() != total) throw NumericError("adam_step: state size mismatch");

    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.step));

    size_t k = 0;
    for (size_t a = 0; a < params.size(); ++a) {
        std::vector<double>& p = *params[a];
        const std::vector<double>& g = *grads[a];
        if (p.size() != g.size()) throw NumericError("adam_step: array shape mismatch");
        for (size_t i = 0; i < p.size(); ++i, ++k) {
            const double gi = g[i];
            if (!std::isfinite(gi)) throw NumericError("adam_step: non-finite gradient");
            st.m[k] = st.beta1 * st.m[k] + (1.0 - st.beta1) * gi;
            st.v[k] = st.beta2 * st.v[k] + (1.0 - st.beta2) * gi * gi;
            const double mhat = st.m[k] / bc1;
            const double vhat = st.v[k] / bc2;
            p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
        }
    }
}

}  // namespace d2v
