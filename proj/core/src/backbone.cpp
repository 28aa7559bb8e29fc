#include "svimo/backbone.hpp"

#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

void BackboneConfig::validate() const {
    shapes.validate();
    if (n_blocks < 1) throw ConfigError("model: n_blocks must be >= 1");
    if (heads < 1 || shapes.d_model % heads != 0) {
        throw ConfigError("model: d_model must be divisible by heads");
    }
    if (d_time < 2) throw ConfigError("model: d_time must be >= 2");
    if (ffn_mult < 1) throw ConfigError("model: ffn_mult must be >= 1");
    if (vocab_size < 1) throw ConfigError("model: vocab_size must be >= 1");
    if (schedule_T < 1) throw ConfigError("model: schedule_T must be >= 1");
}

SViMoModel::SViMoModel(BackboneConfig cfg, RngStream& init_rng)
    : cfg_(std::move(cfg)), store_("svimo") {
    cfg_.validate();
    const ShapeConfig& s = cfg_.shapes;
    TokenBudget budget = token_budget(s);
    spans_ = {budget.text, budget.video, budget.motion};

    const double w_std = 0.02;
    time_l1_ = make_linear(store_, "time.l1", cfg_.d_time, cfg_.d_time, init_rng, w_std);
    time_l2_ = make_linear(store_, "time.l2", cfg_.d_time, cfg_.d_time, init_rng, w_std);

    text_table_ = &store_.create("text.table", {cfg_.vocab_size, s.d_model});
    init_normal(*text_table_, init_rng, w_std);
    text_pos_ = &store_.create("text.pos", {s.L_text, s.d_model});
    init_normal(*text_pos_, init_rng, 0.01);

    int64_t patch_in = s.patch * s.patch * 2 * s.d_latent;
    video_patch_ = make_linear(store_, "video.patch", patch_in, s.d_model, init_rng, w_std);
    motion_patch_ = make_linear(store_, "motion.patch", patch_in, s.d_model, init_rng, w_std);

    int64_t th = s.lat_h() / s.patch, tw = s.lat_w() / s.patch;
    for (const char* which : {"video", "motion"}) {
        Param& pt = store_.create(std::string(which) + ".pos_t", {s.lat_t(), s.d_model});
        Param& ph = store_.create(std::string(which) + ".pos_h", {th, s.d_model});
        Param& pw = store_.create(std::string(which) + ".pos_w", {tw, s.d_model});
        init_normal(pt, init_rng, 0.01);
        init_normal(ph, init_rng, 0.01);
        init_normal(pw, init_rng, 0.01);
        if (std::string(which) == "video") {
            video_pos_t_ = &pt;
            video_pos_h_ = &ph;
            video_pos_w_ = &pw;
        } else {
            motion_pos_t_ = &pt;
            motion_pos_h_ = &ph;
            motion_pos_w_ = &pw;
        }
    }
    tok_t_.reserve(static_cast<size_t>(spans_.video));
    for (int64_t ti = 0; ti < s.lat_t(); ++ti)
        for (int64_t by = 0; by < th; ++by)
            for (int64_t bx = 0; bx < tw; ++bx) {
                tok_t_.push_back(ti);
                tok_h_.push_back(by);
                tok_w_.push_back(bx);
            }

    blocks_.resize(static_cast<size_t>(cfg_.n_blocks));
    for (int b = 0; b < cfg_.n_blocks; ++b) {
        std::string base = "block" + std::to_string(b);
        Block& blk = blocks_[static_cast<size_t>(b)];
        blk.mod_text.map = make_linear(store_, base + ".mod_text", cfg_.d_time, 6 * s.d_model, init_rng, 0.0, true);
        blk.mod_video.map = make_linear(store_, base + ".mod_video", cfg_.d_time, 6 * s.d_model, init_rng, 0.0, true);
        blk.mod_motion.map = make_linear(store_, base + ".mod_motion", cfg_.d_time, 6 * s.d_model, init_rng, 0.0, true);
        blk.attn = make_attention(store_, base + ".attn", s.d_model, cfg_.heads, init_rng, w_std);
        blk.ff = make_ffn(store_, base + ".ffn", s.d_model, cfg_.ffn_mult * s.d_model, init_rng, w_std);
    }

    int64_t patch_out = s.patch * s.patch * s.d_latent;
    out_video_.mod = make_linear(store_, "out_video.mod", cfg_.d_time, 2 * s.d_model, init_rng, 0.0, true);
    out_video_.proj = make_linear(store_, "out_video.proj", s.d_model, patch_out, init_rng, w_std);
    out_motion_.mod = make_linear(store_, "out_motion.mod", cfg_.d_time, 2 * s.d_model, init_rng, 0.0, true);
    out_motion_.proj = make_linear(store_, "out_motion.proj", s.d_model, patch_out, init_rng, w_std);
}

Var SViMoModel::embed_time(Graph& g, int64_t t) {
    if (t < 0 || t >= cfg_.schedule_T) throw ShapeError("embed_time: t out of range");
    Tensor pe = sinusoidal_embedding(t, cfg_.d_time).reshaped({1, cfg_.d_time});
    Var x = g.leaf(std::move(pe));
    return linear(g, g.silu(linear(g, x, time_l1_)), time_l2_);
}

Var SViMoModel::embed_text(Graph& g, const std::vector<int64_t>& padded_ids) {
    if (static_cast<int64_t>(padded_ids.size()) != cfg_.shapes.L_text) {
        throw ShapeError("embed_text: expected " + std::to_string(cfg_.shapes.L_text) + " ids, got " +
                         std::to_string(padded_ids.size()));
    }
    Var toks = g.gather_rows(g.use(*text_table_), padded_ids);
    return g.add(toks, g.use(*text_pos_));
}

void SViMoModel::check_latent(const Tensor& z, const char* what) const {
    const ShapeConfig& s = cfg_.shapes;
    if (z.rank() != 4 || z.dim(0) != s.lat_t() || z.dim(1) != s.lat_h() || z.dim(2) != s.lat_w() ||
        z.dim(3) != s.d_latent) {
        throw ShapeError(std::string(what) + ": latent shape " + z.shape_str() + " does not match config");
    }
}

Var SViMoModel::stream_positions(Graph& g, const std::string& which) {
    Param *pt, *ph, *pw;
    if (which == "video") {
        pt = video_pos_t_;
        ph = video_pos_h_;
        pw = video_pos_w_;
    } else {
        pt = motion_pos_t_;
        ph = motion_pos_h_;
        pw = motion_pos_w_;
    }
    Var a = g.gather_rows(g.use(*pt), tok_t_);
    Var b = g.gather_rows(g.use(*ph), tok_h_);
    Var c = g.gather_rows(g.use(*pw), tok_w_);
    return g.add(a, g.add(b, c));
}

Var SViMoModel::embed_video(Graph& g, Var z_t_v, Var z_i) {
    const ShapeConfig& s = cfg_.shapes;
    check_latent(z_t_v.val(), "embed_video z_t_v");
    const Tensor& zi = z_i.val();
    if (zi.rank() != 4 || zi.dim(0) != 1 || zi.dim(1) != s.lat_h() || zi.dim(2) != s.lat_w() ||
        zi.dim(3) != s.d_latent) {
        throw ShapeError("embed_video: z_I must be a single-slot latent, got " + zi.shape_str());
    }
    int64_t hw = s.lat_h() * s.lat_w();
    Var zi_rows = g.reshape(z_i, {hw, s.d_latent});
    Var zi_rep = g.tile_rows(zi_rows, s.lat_t());  // repeat along the temporal axis
    Var zv_rows = g.reshape(z_t_v, {s.lat_t() * hw, s.d_latent});
    Var cat = g.concat_cols({zv_rows, zi_rep});
    Var grid = g.reshape(cat, {s.lat_t(), s.lat_h(), s.lat_w(), 2 * s.d_latent});
    Var toks = linear(g, g.patchify(grid, s.patch), video_patch_);
    return g.add(toks, stream_positions(g, "video"));
}

Var SViMoModel::embed_motion(Graph& g, Var z_t_m, Var guidance) {
    const ShapeConfig& s = cfg_.shapes;
    check_latent(z_t_m.val(), "embed_motion z_t_m");
    check_latent(guidance.val(), "embed_motion guidance");
    int64_t rows = s.lat_t() * s.lat_h() * s.lat_w();
    Var zm_rows = g.reshape(z_t_m, {rows, s.d_latent});
    Var gd_rows = g.reshape(guidance, {rows, s.d_latent});
    Var cat = g.concat_cols({zm_rows, gd_rows});
    Var grid = g.reshape(cat, {s.lat_t(), s.lat_h(), s.lat_w(), 2 * s.d_latent});
    Var toks = linear(g, g.patchify(grid, s.patch), motion_patch_);
    return g.add(toks, stream_positions(g, "motion"));
}

Var SViMoModel::modulate(Graph& g, Var x, Var e_t, const Modulation& m, int sublayer, Var* gate_out) {
    int64_t d = cfg_.shapes.d_model;
    Var params = linear(g, g.silu(e_t), m.map);  // [1, 6d]
    int64_t off = sublayer == 0 ? 0 : 3 * d;
    Var alpha = g.slice_cols(params, off, off + d);
    Var beta = g.slice_cols(params, off + d, off + 2 * d);
    Var gamma = g.slice_cols(params, off + 2 * d, off + 3 * d);
    if (gate_out != nullptr) *gate_out = gamma;
    Var normed = g.layernorm(x, cfg_.ln_eps);
    return g.row_add(g.row_mul(normed, g.add_const(alpha, 1.0)), beta);
}

Var SViMoModel::dit_block(Graph& g, int block, Var tokens, Var e_t, const ForwardOptions& opts) {
    if (tokens.val().dim(0) != spans_.total() || tokens.val().dim(1) != cfg_.shapes.d_model) {
        throw ShapeError("dit_block: token grid " + tokens.val().shape_str() + " does not match spans");
    }
    const Block& blk = blocks_[static_cast<size_t>(block)];
    auto split = [&](Var x) {
        return std::array<Var, 3>{g.slice_rows(x, 0, spans_.video_begin()),
                                  g.slice_rows(x, spans_.video_begin(), spans_.motion_begin()),
                                  g.slice_rows(x, spans_.motion_begin(), spans_.total())};
    };
    const Modulation* mods[3] = {&blk.mod_text, &blk.mod_video, &blk.mod_motion};

    for (int pass = 0; pass < 2; ++pass) {
        auto parts = split(tokens);
        std::vector<Var> modded;
        std::array<Var, 3> gates;
        for (int m = 0; m < 3; ++m) {
            modded.push_back(modulate(g, parts[static_cast<size_t>(m)], e_t, *mods[m], pass,
                                      &gates[static_cast<size_t>(m)]));
        }
        Var joined = g.concat_rows(modded);
        Var mixed = pass == 0 ? attention(g, joined, joined, blk.attn, opts.attn_mask, opts.attn_probe)
                              : ffn(g, joined, blk.ff);
        auto mixed_parts = split(mixed);
        std::vector<Var> out_parts;
        for (int m = 0; m < 3; ++m) {
            Var gated = g.row_mul(mixed_parts[static_cast<size_t>(m)], gates[static_cast<size_t>(m)]);
            out_parts.push_back(g.add(parts[static_cast<size_t>(m)], gated));
        }
        tokens = g.concat_rows(out_parts);
    }
    return tokens;
}

std::pair<Var, Var> SViMoModel::project_out(Graph& g, Var tokens, Var e_t) {
    const ShapeConfig& s = cfg_.shapes;
    auto head = [&](Var x, const OutHead& h) {
        int64_t d = s.d_model;
        Var mod = linear(g, g.silu(e_t), h.mod);  // [1, 2d]
        Var alpha = g.slice_cols(mod, 0, d);
        Var beta = g.slice_cols(mod, d, 2 * d);
        Var normed = g.layernorm(x, cfg_.ln_eps);
        Var modded = g.row_add(g.row_mul(normed, g.add_const(alpha, 1.0)), beta);
        Var flat = linear(g, modded, h.proj);
        return g.unpatchify(flat, s.lat_t(), s.lat_h(), s.lat_w(), s.d_latent, s.patch);
    };
    Var video_toks = g.slice_rows(tokens, spans_.video_begin(), spans_.motion_begin());
    Var motion_toks = g.slice_rows(tokens, spans_.motion_begin(), spans_.total());
    return {head(video_toks, out_video_), head(motion_toks, out_motion_)};
}

std::pair<Var, Var> SViMoModel::forward(Graph& g, const Tensor& z_t_v, const Tensor& z_t_m,
                                        const Tensor& guidance, const std::vector<int64_t>& prompt_ids,
                                        const Tensor& z_i, int64_t t, const ForwardOptions& opts) {
    Var e_t = embed_time(g, t);
    Var f_text = embed_text(g, prompt_ids);
    Var f_video = embed_video(g, g.leaf(z_t_v), g.leaf(z_i));
    Var f_motion = embed_motion(g, g.leaf(z_t_m), g.leaf(guidance));
    Var tokens = g.concat_rows({f_text, f_video, f_motion});
    for (int b = 0; b < cfg_.n_blocks; ++b) tokens = dit_block(g, b, tokens, e_t, opts);
    return project_out(g, tokens, e_t);
}

Var svimo_loss(Graph& g, Var zhat_v, Var zhat_m, const Tensor& z0_v, const Tensor& z0_m) {
    check_same_shape(zhat_v.val(), z0_v, "svimo_loss video");
    check_same_shape(zhat_m.val(), z0_m, "svimo_loss motion");
    return g.add(g.mse(zhat_v, g.leaf(z0_v)), g.mse(zhat_m, g.leaf(z0_m)));
}

double svimo_loss_value(const Tensor& zhat_v, const Tensor& zhat_m, const Tensor& z0_v,
                        const Tensor& z0_m) {
    Graph g;
    return svimo_loss(g, g.leaf(zhat_v), g.leaf(zhat_m), z0_v, z0_m).val()[0];
}

uint64_t architecture_hash(const BackboneConfig& cfg) {
    const ShapeConfig& s = cfg.shapes;
    int64_t fields[] = {s.N, s.H, s.W, s.rh, s.rw, s.rn, s.patch, s.L_text, s.d_model, s.d_latent,
                        cfg.n_blocks, cfg.heads, cfg.d_time, cfg.ffn_mult, cfg.vocab_size, cfg.schedule_T};
    return fnv1a64(fields, sizeof(fields));
}

}  // namespace svimo
