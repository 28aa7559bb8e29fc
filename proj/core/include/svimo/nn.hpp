#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svimo/graph.hpp"
#include "svimo/nn_param.hpp"

namespace svimo {

struct LinearLayer {
    Param* weight = nullptr;  // [din, dout]
    Param* bias = nullptr;    // [dout]
};

LinearLayer make_linear(ParamStore& store, const std::string& name, int64_t din, int64_t dout,
                        RngStream& rng, double w_std, bool zero_init = false);
Var linear(Graph& g, Var x, const LinearLayer& l);

struct AttentionLayer {
    LinearLayer wq, wk, wv, wo;
    int heads = 1;
};

AttentionLayer make_attention(ParamStore& store, const std::string& name, int64_t d_model,
                              int heads, RngStream& rng, double w_std);

// Full attention of q_in over kv_in (self-attention when they coincide).
// `mask` is an optional additive [Sq,Skv] bias (use large negatives to block).
// `attn_probe`, when given, receives the softmax matrix of every head.
Var attention(Graph& g, Var q_in, Var kv_in, const AttentionLayer& a,
              const Tensor* mask = nullptr, std::vector<Tensor>* attn_probe = nullptr);

struct FeedForward {
    LinearLayer in, out;
};

FeedForward make_ffn(ParamStore& store, const std::string& name, int64_t d_model, int64_t d_hidden,
                     RngStream& rng, double w_std);
Var ffn(Graph& g, Var x, const FeedForward& f);  // linear -> gelu -> linear

// Interleaved sin/cos positional code; index 2i is sin, 2i+1 is cos, so t=0
// maps to [0,1,0,1,...].
Tensor sinusoidal_embedding(int64_t t, int64_t dim);

}  // namespace svimo
