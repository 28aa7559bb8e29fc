#include "svimo/codec.hpp"

#include <cmath>

#include "svimo/errors.hpp"
#include "svimo/graph.hpp"
#include "svimo/nn.hpp"

namespace svimo {

void ShapeConfig::validate() const {
    if (N < 1 || H < 1 || W < 1) throw ConfigError("shapes: N,H,W must be positive");
    if (rh < 1 || rw < 1 || rn < 1 || patch < 1) throw ConfigError("shapes: ratios must be positive");
    if ((N - 1) % rn != 0) {
        throw ConfigError("shapes: N-1 = " + std::to_string(N - 1) + " not divisible by rn = " +
                          std::to_string(rn));
    }
    if (H % (rh * patch) != 0) throw ConfigError("shapes: H not divisible by rh*patch");
    if (W % (rw * patch) != 0) throw ConfigError("shapes: W not divisible by rw*patch");
    if (L_text < 0) throw ConfigError("shapes: L_text must be >= 0");
    if (d_model < 1) throw ConfigError("shapes: d_model must be positive");
    if (d_latent != lossless_latent_dim()) {
        throw ConfigError("shapes: d_latent " + std::to_string(d_latent) +
                          " must equal rn*rh*rw*3 = " + std::to_string(lossless_latent_dim()) +
                          " in lossless mode");
    }
}

TokenBudget token_budget(const ShapeConfig& cfg) {
    cfg.validate();
    TokenBudget b;
    b.text = cfg.L_text;
    b.video = cfg.lat_t() * (cfg.lat_h() / cfg.patch) * (cfg.lat_w() / cfg.patch);
    b.motion = b.video;
    b.total = b.text + b.video + b.motion;
    return b;
}

namespace {

void check_video_shape(const VideoTensor& video, const ShapeConfig& cfg) {
    const Tensor& f = video.frames;
    if (f.rank() != 4 || f.dim(0) != cfg.N || f.dim(1) != cfg.H || f.dim(2) != cfg.W || f.dim(3) != 3) {
        throw ShapeError("video shape " + f.shape_str() + " does not match config [" +
                         std::to_string(cfg.N) + "," + std::to_string(cfg.H) + "," +
                         std::to_string(cfg.W) + ",3]");
    }
}

// frame index for temporal group g, slot dt; -1 marks a pad slot
inline int64_t group_frame(int64_t g, int64_t dt, int64_t rn) {
    if (g == 0) return dt == 0 ? 0 : -1;
    return 1 + (g - 1) * rn + dt;
}

}  // namespace

LatentVideo encode(const VideoTensor& video, const ShapeConfig& cfg) {
    cfg.validate();
    check_video_shape(video, cfg);
    int64_t lt = cfg.lat_t(), lh = cfg.lat_h(), lw = cfg.lat_w();
    int64_t C = cfg.lossless_latent_dim();
    LatentVideo lat;
    lat.codes = Tensor({lt, lh, lw, C});
    const Tensor& f = video.frames;
    for (int64_t g = 0; g < lt; ++g) {
        for (int64_t dt = 0; dt < cfg.rn; ++dt) {
            int64_t n = group_frame(g, dt, cfg.rn);
            for (int64_t y = 0; y < lh; ++y)
                for (int64_t x = 0; x < lw; ++x)
                    for (int64_t dy = 0; dy < cfg.rh; ++dy)
                        for (int64_t dx = 0; dx < cfg.rw; ++dx)
                            for (int64_t ch = 0; ch < 3; ++ch) {
                                int64_t c = ((dt * cfg.rh + dy) * cfg.rw + dx) * 3 + ch;
                                double v = 0.0;
                                if (n >= 0) {
                                    v = f[((n * cfg.H + y * cfg.rh + dy) * cfg.W + x * cfg.rw + dx) * 3 + ch];
                                }
                                lat.codes[((g * lh + y) * lw + x) * C + c] = v;
                            }
        }
    }
    return lat;
}

VideoTensor decode(const LatentVideo& lat, const ShapeConfig& cfg, bool clamp) {
    cfg.validate();
    int64_t lt = cfg.lat_t(), lh = cfg.lat_h(), lw = cfg.lat_w();
    int64_t C = cfg.lossless_latent_dim();
    const Tensor& z = lat.codes;
    if (z.rank() != 4 || z.dim(0) != lt || z.dim(1) != lh || z.dim(2) != lw || z.dim(3) != C) {
        throw ShapeError("latent shape " + z.shape_str() + " does not match config");
    }
    VideoTensor video;
    video.frames = Tensor({cfg.N, cfg.H, cfg.W, 3});
    for (int64_t g = 0; g < lt; ++g) {
        for (int64_t dt = 0; dt < cfg.rn; ++dt) {
            int64_t n = group_frame(g, dt, cfg.rn);
            if (n < 0) continue;  // pad slot
            for (int64_t y = 0; y < lh; ++y)
                for (int64_t x = 0; x < lw; ++x)
                    for (int64_t dy = 0; dy < cfg.rh; ++dy)
                        for (int64_t dx = 0; dx < cfg.rw; ++dx)
                            for (int64_t ch = 0; ch < 3; ++ch) {
                                int64_t c = ((dt * cfg.rh + dy) * cfg.rw + dx) * 3 + ch;
                                double v = z[((g * lh + y) * lw + x) * C + c];
                                if (clamp) v = std::min(1.0, std::max(0.0, v));
                                video.frames[((n * cfg.H + y * cfg.rh + dy) * cfg.W + x * cfg.rw + dx) * 3 + ch] = v;
                            }
        }
    }
    return video;
}

LatentVideo encode_frame(const Tensor& image, const ShapeConfig& cfg) {
    if (image.rank() != 3 || image.dim(0) != cfg.H || image.dim(1) != cfg.W || image.dim(2) != 3) {
        throw ShapeError("encode_frame expects [H,W,3], got " + image.shape_str());
    }
    ShapeConfig one = cfg;
    one.N = 1;
    VideoTensor v;
    v.frames = image.reshaped({1, cfg.H, cfg.W, 3});
    return encode(v, one);
}

LearnedCodec::LearnedCodec(const ShapeConfig& cfg, int64_t code_dim, RngStream& init_rng)
    : cfg_(cfg), code_dim_(code_dim), store_("learned_codec") {
    cfg_.validate();
    int64_t block = cfg_.lossless_latent_dim();
    double std_in = 1.0 / std::sqrt(static_cast<double>(block));
    init_normal(store_.create("enc.weight", {block, code_dim_}), init_rng, std_in);
    store_.create("enc.bias", {code_dim_});
    init_normal(store_.create("dec.weight", {code_dim_, block}), init_rng,
                1.0 / std::sqrt(static_cast<double>(code_dim_)));
    store_.create("dec.bias", {block});
}

namespace {

Tensor latent_blocks(const VideoTensor& video, const ShapeConfig& cfg) {
    LatentVideo lat = encode(video, cfg);
    int64_t n = lat.codes.numel() / cfg.lossless_latent_dim();
    return lat.codes.reshaped({n, cfg.lossless_latent_dim()});
}

}  // namespace

double LearnedCodec::train(const std::vector<VideoTensor>& videos, int64_t steps, double lr,
                           RngStream& rng) {
    if (videos.empty()) throw ConfigError("learned codec: empty training set");
    std::vector<Tensor> blocks;
    for (const auto& v : videos) blocks.push_back(latent_blocks(v, cfg_));
    AdamOptimizer opt({lr, 0.9, 0.999, 1e-8, 0});
    double last = 0.0;
    for (int64_t s = 0; s < steps; ++s) {
        const Tensor& x = blocks[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(blocks.size()) - 1))];
        store_.zero_grads();
        Graph g;
        Var in = g.leaf(x);
        Var code = g.row_add(g.matmul(in, g.use(store_.get("enc.weight"))), g.use(store_.get("enc.bias")));
        Var rec = g.row_add(g.matmul(code, g.use(store_.get("dec.weight"))), g.use(store_.get("dec.bias")));
        Var loss = g.mse(rec, in);
        last = loss.val()[0];
        g.backward(loss);
        opt.step({&store_});
    }
    return last;
}

LatentVideo LearnedCodec::encode(const VideoTensor& video) const {
    Tensor blocks = latent_blocks(video, cfg_);
    auto& self = const_cast<LearnedCodec&>(*this);
    Graph g;
    Var code = g.row_add(g.matmul(g.leaf(blocks), g.use(self.store_.get("enc.weight"))),
                         g.use(self.store_.get("enc.bias")));
    LatentVideo lat;
    lat.codes = code.val().reshaped({cfg_.lat_t(), cfg_.lat_h(), cfg_.lat_w(), code_dim_});
    return lat;
}

VideoTensor LearnedCodec::decode(const LatentVideo& lat) const {
    int64_t n = lat.codes.numel() / code_dim_;
    auto& self = const_cast<LearnedCodec&>(*this);
    Graph g;
    Var rec = g.row_add(g.matmul(g.leaf(lat.codes.reshaped({n, code_dim_})), g.use(self.store_.get("dec.weight"))),
                        g.use(self.store_.get("dec.bias")));
    LatentVideo full;
    full.codes = rec.val().reshaped({cfg_.lat_t(), cfg_.lat_h(), cfg_.lat_w(), cfg_.lossless_latent_dim()});
    return svimo::decode(full, cfg_, true);
}

double LearnedCodec::reconstruction_mse(const VideoTensor& video) const {
    VideoTensor rec = decode(encode(video));
    const Tensor& a = video.frames;
    const Tensor& b = rec.frames;
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

}  // namespace svimo
