#include "svimo/vid.hpp"

#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

double chamfer(const Tensor& a, const Tensor& b) {
    Graph g;
    return g.chamfer_pair(g.leaf(a), g.leaf(b)).val()[0];
}

namespace {

void check_motion(const Tensor& t, const char* what) {
    if (t.rank() != 3 || t.dim(2) != 3) throw ShapeError(std::string(what) + " must be [N,*,3], got " + t.shape_str());
}

Var frame_diff(Graph& g, Var x_rows, int64_t n) {
    // x_rows: [N, D] -> [N-1, D] forward differences
    int64_t d = x_rows.val().dim(1);
    (void)d;
    return g.sub(g.slice_rows(x_rows, 1, n), g.slice_rows(x_rows, 0, n - 1));
}

}  // namespace

Var hand_loss_g(Graph& g, Var hhat, const Tensor& h) {
    check_motion(h, "hand_loss h");
    check_same_shape(h, hhat.val(), "hand_loss");
    int64_t n = h.dim(0), d = h.dim(1) * 3;
    Var pred = g.reshape(hhat, {n, d});
    Var gt = g.leaf(h.reshaped({n, d}));
    Var loss = g.mse(pred, gt);
    if (n >= 2) {
        Var dp = frame_diff(g, pred, n);
        Var dg = frame_diff(g, gt, n);
        loss = g.add(loss, g.scale(g.mse(dp, dg), 0.2));
        if (n >= 3) {
            Var ddp = frame_diff(g, dp, n - 1);
            Var ddg = frame_diff(g, dg, n - 1);
            loss = g.add(loss, g.scale(g.mse(ddp, ddg), 0.05));
        }
    }
    return loss;
}

double hand_loss(const Tensor& h, const Tensor& hhat) {
    Graph g;
    return hand_loss_g(g, g.leaf(hhat), h).val()[0];
}

Var object_loss_g(Graph& g, Var ohat, const Tensor& o) {
    check_motion(o, "object_loss o");
    check_same_shape(o, ohat.val(), "object_loss");
    int64_t n = o.dim(0), k = o.dim(1);
    if (k % 2 != 0) throw ShapeError("object_loss: K must be even (tool/target halves)");
    int64_t half = k / 2;
    Var pred_rows = g.reshape(ohat, {n * k, 3});
    Tensor gt_rows = o.reshaped({n * k, 3});
    Var total = g.leaf(Tensor::from_scalar(0.0));
    for (int part = 0; part < 2; ++part) {
        int64_t off = part == 0 ? 0 : half;
        auto pred_frame = [&](int64_t f) { return g.slice_rows(pred_rows, f * k + off, f * k + off + half); };
        auto gt_frame = [&](int64_t f) {
            Tensor sl({half, 3});
            std::copy(gt_rows.data() + (f * k + off) * 3, gt_rows.data() + (f * k + off + half) * 3, sl.data());
            return sl;
        };
        Var l1 = g.leaf(Tensor::from_scalar(0.0));
        for (int64_t f = 0; f < n; ++f) {
            l1 = g.add(l1, g.chamfer_pair(pred_frame(f), g.leaf(gt_frame(f))));
        }
        l1 = g.scale(l1, 1.0 / static_cast<double>(n));
        Var part_loss = l1;
        if (n >= 2) {
            Var l2 = g.leaf(Tensor::from_scalar(0.0));
            for (int64_t f = 1; f < n; ++f) {
                double gt_dyn = chamfer(gt_frame(f), gt_frame(f - 1));
                Var pred_dyn = g.chamfer_pair(pred_frame(f), pred_frame(f - 1));
                l2 = g.add(l2, g.abs(g.add_const(pred_dyn, -gt_dyn)));
            }
            l2 = g.scale(l2, 1.0 / static_cast<double>(n - 1));
            part_loss = g.add(part_loss, g.scale(l2, 0.1));
        }
        total = g.add(total, part_loss);
    }
    return g.scale(total, 0.5);
}

double object_loss(const Tensor& o, const Tensor& ohat) {
    Graph g;
    return object_loss_g(g, g.leaf(ohat), o).val()[0];
}

Var vid_loss_g(Graph& g, Var hhat, Var ohat, const Tensor& h, const Tensor& o) {
    return g.add(hand_loss_g(g, hhat, h), object_loss_g(g, ohat, o));
}

double vid_loss(const Tensor& h, const Tensor& hhat, const Tensor& o, const Tensor& ohat) {
    Graph g;
    return vid_loss_g(g, g.leaf(hhat), g.leaf(ohat), h, o).val()[0];
}

void VidConfig::validate() const {
    shapes.validate();
    if (J < 0 || J % 2 != 0) throw ConfigError("vid: J must be even (two hands)");
    if (K < 2 || K % 2 != 0) throw ConfigError("vid: K must be even (tool/target halves)");
    if (d_model < 1 || heads < 1 || d_model % heads != 0) throw ConfigError("vid: d_model/heads invalid");
    if (n_blocks < 1) throw ConfigError("vid: n_blocks must be >= 1");
    if (conv_c1 < 1 || conv_c2 < 1) throw ConfigError("vid: conv channels must be positive");
}

VidModel::VidModel(VidConfig cfg, RngStream& init_rng) : cfg_(std::move(cfg)), store_("vid") {
    cfg_.validate();
    const ShapeConfig& s = cfg_.shapes;
    const double w_std = 0.02;
    time_l1_ = make_linear(store_, "time.l1", cfg_.d_time, cfg_.d_time, init_rng, w_std);
    time_l2_ = make_linear(store_, "time.l2", cfg_.d_time, cfg_.d_time, init_rng, w_std);

    int64_t k27 = 27;
    double conv_std1 = 1.0 / std::sqrt(static_cast<double>(k27 * s.d_latent));
    double conv_std2 = 1.0 / std::sqrt(static_cast<double>(k27 * cfg_.conv_c1));
    for (const char* which : {"video", "motion"}) {
        StreamEncoder enc;
        enc.conv1 = make_linear(store_, std::string("enc_") + which + ".conv1", k27 * s.d_latent,
                                cfg_.conv_c1, init_rng, conv_std1);
        enc.conv2 = make_linear(store_, std::string("enc_") + which + ".conv2", k27 * cfg_.conv_c1,
                                cfg_.conv_c2, init_rng, conv_std2);
        if (std::string(which) == "video") {
            enc_video_ = enc;
        } else {
            enc_motion_ = enc;
        }
    }
    fuse1_ = make_linear(store_, "fuse1", 2 * cfg_.conv_c1, cfg_.d_model, init_rng, w_std);
    fuse2_ = make_linear(store_, "fuse2", 2 * cfg_.conv_c2, cfg_.d_model, init_rng, w_std);

    auto conv_out = [](int64_t v) { return (v + 2 - 3) / 2 + 1; };
    int64_t h1 = conv_out(s.lat_h()), w1 = conv_out(s.lat_w());
    int64_t h2 = conv_out(h1), w2 = conv_out(w1);
    vis_pos1_ = &store_.create("vis_pos1", {s.lat_t() * h1 * w1, cfg_.d_model});
    vis_pos2_ = &store_.create("vis_pos2", {s.lat_t() * h2 * w2, cfg_.d_model});
    init_normal(*vis_pos1_, init_rng, 0.01);
    init_normal(*vis_pos2_, init_rng, 0.01);

    hand_in_ = make_linear(store_, "hand_in", cfg_.J * 3, cfg_.d_model, init_rng, w_std);
    tool_in_ = make_linear(store_, "tool_in", (cfg_.K / 2) * 3, cfg_.d_model, init_rng, w_std);
    target_in_ = make_linear(store_, "target_in", (cfg_.K / 2) * 3, cfg_.d_model, init_rng, w_std);
    time_pos_ = &store_.create("time_pos", {s.N, cfg_.d_model});
    type_emb_ = &store_.create("type_emb", {3, cfg_.d_model});
    init_normal(*time_pos_, init_rng, 0.01);
    init_normal(*type_emb_, init_rng, 0.01);

    blocks_.resize(static_cast<size_t>(cfg_.n_blocks));
    for (int b = 0; b < cfg_.n_blocks; ++b) {
        std::string base = "block" + std::to_string(b);
        Block& blk = blocks_[static_cast<size_t>(b)];
        blk.mod_self = make_linear(store_, base + ".mod_self", cfg_.d_time, 2 * cfg_.d_model, init_rng, w_std);
        blk.mod_cross = make_linear(store_, base + ".mod_cross", cfg_.d_time, 2 * cfg_.d_model, init_rng, w_std);
        blk.mod_ffn = make_linear(store_, base + ".mod_ffn", cfg_.d_time, 2 * cfg_.d_model, init_rng, w_std);
        blk.self_attn = make_attention(store_, base + ".self", cfg_.d_model, cfg_.heads, init_rng, w_std);
        blk.cross_attn = make_attention(store_, base + ".cross", cfg_.d_model, cfg_.heads, init_rng, w_std);
        blk.ff = make_ffn(store_, base + ".ffn", cfg_.d_model, cfg_.ffn_mult * cfg_.d_model, init_rng, w_std);
    }
    hand_out_ = make_linear(store_, "hand_out", cfg_.d_model, cfg_.J * 3, init_rng, w_std);
    tool_out_ = make_linear(store_, "tool_out", cfg_.d_model, (cfg_.K / 2) * 3, init_rng, w_std);
    target_out_ = make_linear(store_, "target_out", cfg_.d_model, (cfg_.K / 2) * 3, init_rng, w_std);
}

Var VidModel::encode_stream(Graph& g, Var z, const StreamEncoder& enc, int, std::vector<Var>& scales) {
    const ShapeConfig& s = cfg_.shapes;
    auto conv_out = [](int64_t v) { return (v + 2 - 3) / 2 + 1; };
    // scale 1: stride (1,2,2) kernel 3, zero padding 1
    Var cols1 = g.im2col3d(z, 3, 3, 3, 1, 2, 2, 1, 1, 1);
    Var f1 = g.gelu(linear(g, cols1, enc.conv1));  // [T*h1*w1, c1]
    int64_t h1 = conv_out(s.lat_h()), w1 = conv_out(s.lat_w());
    Var f1_grid = g.reshape(f1, {s.lat_t(), h1, w1, cfg_.conv_c1});
    Var cols2 = g.im2col3d(f1_grid, 3, 3, 3, 1, 2, 2, 1, 1, 1);
    Var f2 = g.gelu(linear(g, cols2, enc.conv2));  // [T*h2*w2, c2]
    scales.push_back(f1);
    scales.push_back(f2);
    return f2;
}

Var VidModel::visual_memory(Graph& g, Var z_v, Var z_m) {
    std::vector<Var> sv, sm;
    encode_stream(g, z_v, enc_video_, 0, sv);
    encode_stream(g, z_m, enc_motion_, 0, sm);
    Var fused1 = g.add(linear(g, g.concat_cols({sv[0], sm[0]}), fuse1_), g.use(*vis_pos1_));
    Var fused2 = g.add(linear(g, g.concat_cols({sv[1], sm[1]}), fuse2_), g.use(*vis_pos2_));
    return g.concat_rows({fused1, fused2});
}

Var VidModel::modulated_ln(Graph& g, Var x, Var e_t, const LinearLayer& mod) {
    int64_t d = cfg_.d_model;
    Var p = linear(g, g.silu(e_t), mod);
    Var alpha = g.slice_cols(p, 0, d);
    Var beta = g.slice_cols(p, d, 2 * d);
    return g.row_add(g.row_mul(g.layernorm(x, cfg_.ln_eps), g.add_const(alpha, 1.0)), beta);
}

std::pair<Var, Var> VidModel::forward(Graph& g, const Tensor& h_t, const Tensor& o_t, Var z_v,
                                      Var z_m, int64_t t) {
    const ShapeConfig& s = cfg_.shapes;
    if (t < 0 || t >= cfg_.schedule_T) throw ShapeError("vid_forward: t out of range");
    if (h_t.rank() != 3 || h_t.dim(0) != s.N || h_t.dim(1) != cfg_.J || h_t.dim(2) != 3) {
        throw ShapeError("vid_forward: hands " + h_t.shape_str() + " do not match config");
    }
    if (o_t.rank() != 3 || o_t.dim(0) != s.N || o_t.dim(1) != cfg_.K || o_t.dim(2) != 3) {
        throw ShapeError("vid_forward: objects " + o_t.shape_str() + " do not match config");
    }
    Tensor pe = sinusoidal_embedding(t, cfg_.d_time).reshaped({1, cfg_.d_time});
    Var e_t = linear(g, g.silu(linear(g, g.leaf(std::move(pe)), time_l1_)), time_l2_);

    Var memory = visual_memory(g, z_v, z_m);

    int64_t n = s.N, half = cfg_.K / 2;
    // per-frame object halves -> [N, half*3] row layouts
    Tensor tool_rows({n, half * 3}), target_rows({n, half * 3});
    for (int64_t f = 0; f < n; ++f) {
        std::copy(o_t.data() + (f * cfg_.K) * 3, o_t.data() + (f * cfg_.K + half) * 3,
                  tool_rows.data() + f * half * 3);
        std::copy(o_t.data() + (f * cfg_.K + half) * 3, o_t.data() + (f + 1) * cfg_.K * 3,
                  target_rows.data() + f * half * 3);
    }
    Var hand_toks = linear(g, g.leaf(h_t.reshaped({n, cfg_.J * 3})), hand_in_);
    Var tool_toks = linear(g, g.leaf(std::move(tool_rows)), tool_in_);
    Var target_toks = linear(g, g.leaf(std::move(target_rows)), target_in_);

    Var tpos = g.use(*time_pos_);
    std::vector<int64_t> type0(static_cast<size_t>(n), 0), type1(static_cast<size_t>(n), 1),
        type2(static_cast<size_t>(n), 2);
    hand_toks = g.add(g.add(hand_toks, tpos), g.gather_rows(g.use(*type_emb_), type0));
    tool_toks = g.add(g.add(tool_toks, tpos), g.gather_rows(g.use(*type_emb_), type1));
    target_toks = g.add(g.add(target_toks, tpos), g.gather_rows(g.use(*type_emb_), type2));
    Var x = g.concat_rows({hand_toks, tool_toks, target_toks});  // [3N, d]

    for (const Block& blk : blocks_) {
        x = g.add(x, attention(g, modulated_ln(g, x, e_t, blk.mod_self), x, blk.self_attn));
        Var q = modulated_ln(g, x, e_t, blk.mod_cross);
        x = g.add(x, attention(g, q, memory, blk.cross_attn));
        x = g.add(x, ffn(g, modulated_ln(g, x, e_t, blk.mod_ffn), blk.ff));
    }

    Var hand_part = g.slice_rows(x, 0, n);
    Var tool_part = g.slice_rows(x, n, 2 * n);
    Var target_part = g.slice_rows(x, 2 * n, 3 * n);
    Var h_out = g.reshape(linear(g, hand_part, hand_out_), {n, cfg_.J, 3});
    Var tool_flat = linear(g, tool_part, tool_out_);      // [N, half*3]
    Var target_flat = linear(g, target_part, target_out_);
    Var o_out = g.reshape(g.concat_cols({tool_flat, target_flat}), {n, cfg_.K, 3});
    return {h_out, o_out};
}

uint64_t architecture_hash(const VidConfig& cfg) {
    const ShapeConfig& s = cfg.shapes;
    int64_t fields[] = {s.N, s.H, s.W, s.rh, s.rw, s.rn, s.patch, s.d_latent, cfg.J, cfg.K,
                        cfg.d_model, cfg.heads, cfg.n_blocks, cfg.conv_c1, cfg.conv_c2, cfg.d_time,
                        cfg.ffn_mult, cfg.schedule_T};
    return fnv1a64(fields, sizeof(fields));
}

}  // namespace svimo
