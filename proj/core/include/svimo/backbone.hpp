#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "svimo/codec.hpp"
#include "svimo/graph.hpp"
#include "svimo/nn.hpp"

namespace svimo {

struct BackboneConfig {
    ShapeConfig shapes;
    int n_blocks = 2;
    int heads = 4;
    int64_t d_time = 128;
    int64_t ffn_mult = 4;
    double ln_eps = 1e-6;
    int64_t vocab_size = 64;
    int64_t schedule_T = 1000;

    void validate() const;
};

// Token layout of the joint sequence: [text | video | motion].
struct TokenSpans {
    int64_t text = 0, video = 0, motion = 0;
    int64_t text_begin() const { return 0; }
    int64_t video_begin() const { return text; }
    int64_t motion_begin() const { return text + video; }
    int64_t total() const { return text + video + motion; }
};

struct ForwardOptions {
    const Tensor* attn_mask = nullptr;        // additive [S,S] bias, test probes only
    std::vector<Tensor>* attn_probe = nullptr;  // receives per-head softmax matrices
};

// The joint video/motion denoiser: per-modality adaptive modulation around a
// shared full attention and feedforward, x0-prediction heads for both latent
// streams. Text tokens condition but are never predicted.
class SViMoModel {
public:
    SViMoModel(BackboneConfig cfg, RngStream& init_rng);

    Var embed_time(Graph& g, int64_t t);
    Var embed_text(Graph& g, const std::vector<int64_t>& padded_ids);
    Var embed_video(Graph& g, Var z_t_v, Var z_i);      // latents as [T,h,w,C] vars
    Var embed_motion(Graph& g, Var z_t_m, Var guidance);
    Var dit_block(Graph& g, int block, Var tokens, Var e_t, const ForwardOptions& opts = {});
    std::pair<Var, Var> project_out(Graph& g, Var tokens, Var e_t);

    // Full composition. Latent tensors are graph leaves; returns the two
    // predicted clean latents shaped [T,h,w,C].
    std::pair<Var, Var> forward(Graph& g, const Tensor& z_t_v, const Tensor& z_t_m,
                                const Tensor& guidance, const std::vector<int64_t>& prompt_ids,
                                const Tensor& z_i, int64_t t, const ForwardOptions& opts = {});

    TokenSpans spans() const { return spans_; }
    const BackboneConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    int64_t pad_id() const { return 0; }

private:
    struct Modulation {
        LinearLayer map;  // d_time -> 6*d_model, zero-init (adaLN-zero)
    };
    struct Block {
        Modulation mod_text, mod_video, mod_motion;
        AttentionLayer attn;
        FeedForward ff;
    };
    struct OutHead {
        LinearLayer mod;   // d_time -> 2*d_model, zero-init
        LinearLayer proj;  // d_model -> patch*patch*d_latent
    };

    Var modulate(Graph& g, Var x, Var e_t, const Modulation& m, int sublayer, Var* gate_out);
    Var stream_positions(Graph& g, const std::string& which);
    void check_latent(const Tensor& z, const char* what) const;

    BackboneConfig cfg_;
    TokenSpans spans_;
    ParamStore store_;

    LinearLayer time_l1_, time_l2_;
    Param* text_table_ = nullptr;
    Param* text_pos_ = nullptr;
    LinearLayer video_patch_, motion_patch_;
    Param* video_pos_t_ = nullptr;
    Param* video_pos_h_ = nullptr;
    Param* video_pos_w_ = nullptr;
    Param* motion_pos_t_ = nullptr;
    Param* motion_pos_h_ = nullptr;
    Param* motion_pos_w_ = nullptr;
    std::vector<Block> blocks_;
    OutHead out_video_, out_motion_;

    std::vector<int64_t> tok_t_, tok_h_, tok_w_;  // token -> factorized position ids
};

// Eq.-style joint loss: mean squared error of the video term plus mean
// squared error of the motion term.
Var svimo_loss(Graph& g, Var zhat_v, Var zhat_m, const Tensor& z0_v, const Tensor& z0_m);
double svimo_loss_value(const Tensor& zhat_v, const Tensor& zhat_m, const Tensor& z0_v,
                        const Tensor& z0_m);

uint64_t architecture_hash(const BackboneConfig& cfg);

}  // namespace svimo
