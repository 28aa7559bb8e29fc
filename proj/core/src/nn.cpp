#include "svimo/nn.hpp"

#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

LinearLayer make_linear(ParamStore& store, const std::string& name, int64_t din, int64_t dout,
                        RngStream& rng, double w_std, bool zero_init) {
    LinearLayer l;
    l.weight = &store.create(name + ".weight", {din, dout});
    l.bias = &store.create(name + ".bias", {dout});
    if (!zero_init) init_normal(*l.weight, rng, w_std);
    return l;
}

Var linear(Graph& g, Var x, const LinearLayer& l) {
    return g.row_add(g.matmul(x, g.use(*l.weight)), g.use(*l.bias));
}

AttentionLayer make_attention(ParamStore& store, const std::string& name, int64_t d_model,
                              int heads, RngStream& rng, double w_std) {
    if (heads <= 0 || d_model % heads != 0) {
        throw ShapeError("attention: d_model " + std::to_string(d_model) + " not divisible by heads " +
                         std::to_string(heads));
    }
    AttentionLayer a;
    a.heads = heads;
    a.wq = make_linear(store, name + ".q", d_model, d_model, rng, w_std);
    a.wk = make_linear(store, name + ".k", d_model, d_model, rng, w_std);
    a.wv = make_linear(store, name + ".v", d_model, d_model, rng, w_std);
    a.wo = make_linear(store, name + ".out", d_model, d_model, rng, w_std);
    return a;
}

Var attention(Graph& g, Var q_in, Var kv_in, const AttentionLayer& a,
              const Tensor* mask, std::vector<Tensor>* attn_probe) {
    int64_t d = q_in.val().dim(1);
    int64_t dh = d / a.heads;
    Var q = linear(g, q_in, a.wq);
    Var k = linear(g, kv_in, a.wk);
    Var v = linear(g, kv_in, a.wv);
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> heads_out;
    heads_out.reserve(static_cast<size_t>(a.heads));
    for (int hidx = 0; hidx < a.heads; ++hidx) {
        Var qh = g.slice_cols(q, hidx * dh, (hidx + 1) * dh);
        Var kh = g.slice_cols(k, hidx * dh, (hidx + 1) * dh);
        Var vh = g.slice_cols(v, hidx * dh, (hidx + 1) * dh);
        Var scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt);
        if (mask != nullptr) scores = g.add(scores, g.leaf(*mask));
        Var attn = g.softmax_rows(scores);
        if (attn_probe != nullptr) attn_probe->push_back(attn.val());
        heads_out.push_back(g.matmul(attn, vh));
    }
    Var merged = g.concat_cols(heads_out);
    return linear(g, merged, a.wo);
}

FeedForward make_ffn(ParamStore& store, const std::string& name, int64_t d_model, int64_t d_hidden,
                     RngStream& rng, double w_std) {
    FeedForward f;
    f.in = make_linear(store, name + ".in", d_model, d_hidden, rng, w_std);
    f.out = make_linear(store, name + ".out", d_hidden, d_model, rng, w_std);
    return f;
}

Var ffn(Graph& g, Var x, const FeedForward& f) {
    return linear(g, g.gelu(linear(g, x, f.in)), f.out);
}

Tensor sinusoidal_embedding(int64_t t, int64_t dim) {
    Tensor e({dim});
    for (int64_t i = 0; i < dim / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
        e[2 * i] = std::sin(static_cast<double>(t) * freq);
        e[2 * i + 1] = std::cos(static_cast<double>(t) * freq);
    }
    if (dim % 2 == 1) e[dim - 1] = std::sin(static_cast<double>(t));
    return e;
}

}  // namespace svimo
