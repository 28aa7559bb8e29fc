#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "svimo/codec.hpp"
#include "svimo/graph.hpp"
#include "svimo/nn.hpp"
#include "svimo/projection.hpp"

namespace svimo {

// Halved symmetric mean squared nearest-neighbor distance between point sets.
double chamfer(const Tensor& a, const Tensor& b);  // [P,3] x [Q,3]

// Hand loss: position MSE plus weighted first/second temporal differences.
// Sequences shorter than 3 frames drop the second-difference term (and
// shorter than 2 the first).
double hand_loss(const Tensor& h, const Tensor& hhat);    // [N,J,3] each
Var hand_loss_g(Graph& g, Var hhat, const Tensor& h);

// Object loss per part (tool = first K/2 points, target = rest): per-frame
// chamfer plus 0.1 x mean absolute error between consecutive-frame chamfer
// dynamics; parts averaged. N < 2 drops the dynamics term.
double object_loss(const Tensor& o, const Tensor& ohat);  // [N,K,3] each
Var object_loss_g(Graph& g, Var ohat, const Tensor& o);

double vid_loss(const Tensor& h, const Tensor& hhat, const Tensor& o, const Tensor& ohat);
Var vid_loss_g(Graph& g, Var hhat, Var ohat, const Tensor& h, const Tensor& o);

struct VidConfig {
    ShapeConfig shapes;
    int64_t J = 12, K = 32;
    int64_t d_model = 128;
    int heads = 4;
    int n_blocks = 2;
    int64_t conv_c1 = 32, conv_c2 = 64;
    int64_t d_time = 128;
    int64_t ffn_mult = 4;
    double ln_eps = 1e-6;
    int64_t schedule_T = 1000;

    void validate() const;
};

// M_phi: dual-stream spatiotemporal conv encoders over the two latent videos,
// fused per scale, consumed by a cross-attending denoising trunk over
// per-frame hand/tool/target tokens; x0-parameterized outputs.
class VidModel {
public:
    VidModel(VidConfig cfg, RngStream& init_rng);

    // h_t: [N,J,3], o_t: [N,K,3]; latents enter as graph vars so gradients can
    // flow back into the producing network (the gradient-constraint path).
    std::pair<Var, Var> forward(Graph& g, const Tensor& h_t, const Tensor& o_t, Var z_v, Var z_m,
                                int64_t t);

    const VidConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }

private:
    struct StreamEncoder {
        LinearLayer conv1, conv2;  // im2col weights
    };
    struct Block {
        LinearLayer mod_self, mod_cross, mod_ffn;  // d_time -> 2*d per sublayer
        AttentionLayer self_attn, cross_attn;
        FeedForward ff;
    };

    Var encode_stream(Graph& g, Var z, const StreamEncoder& enc, int scale_stop, std::vector<Var>& scales);
    Var visual_memory(Graph& g, Var z_v, Var z_m);
    Var modulated_ln(Graph& g, Var x, Var e_t, const LinearLayer& mod);

    VidConfig cfg_;
    ParamStore store_;

    LinearLayer time_l1_, time_l2_;
    StreamEncoder enc_video_, enc_motion_;
    LinearLayer fuse1_, fuse2_;
    Param* vis_pos1_ = nullptr;
    Param* vis_pos2_ = nullptr;
    LinearLayer hand_in_, tool_in_, target_in_;
    Param* time_pos_ = nullptr;   // [N, d]
    Param* type_emb_ = nullptr;   // [3, d]
    std::vector<Block> blocks_;
    LinearLayer hand_out_, tool_out_, target_out_;
};

uint64_t architecture_hash(const VidConfig& cfg);

}  // namespace svimo
