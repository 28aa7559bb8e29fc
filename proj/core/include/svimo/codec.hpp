#pragma once

#include <cstdint>

#include "svimo/nn_param.hpp"
#include "svimo/tensor.hpp"

namespace svimo {

struct VideoTensor {
    Tensor frames;  // [N,H,W,3], values in [0,1]
    double fps = 8.0;
};

struct LatentVideo {
    Tensor codes;  // [(N-1)/rn + 1, H/rh, W/rw, d_latent]
};

struct ShapeConfig {
    int64_t N = 9, H = 32, W = 48;
    int64_t rh = 4, rw = 4, rn = 2;
    int64_t patch = 2;
    int64_t L_text = 16;
    int64_t d_model = 128;
    int64_t d_latent = 96;

    void validate() const;
    int64_t lat_t() const { return (N - 1) / rn + 1; }
    int64_t lat_h() const { return H / rh; }
    int64_t lat_w() const { return W / rw; }
    int64_t lossless_latent_dim() const { return rn * rh * rw * 3; }
};

struct TokenBudget {
    int64_t text = 0, video = 0, motion = 0, total = 0;
};

TokenBudget token_budget(const ShapeConfig& cfg);

// Lossless pseudo-VAE: an exact space-to-depth / time-to-depth rearrangement.
// Frame 0 stands alone in temporal group 0, zero-padded to fill the group.
LatentVideo encode(const VideoTensor& video, const ShapeConfig& cfg);
VideoTensor decode(const LatentVideo& lat, const ShapeConfig& cfg, bool clamp = true);

// Single-frame convenience (N = 1), used for the reference image latent.
LatentVideo encode_frame(const Tensor& image, const ShapeConfig& cfg);

// Optional learned codec: a per-block linear autoencoder trained on a video
// set. Kept behind the codec.mode config switch; the acceptance path always
// runs lossless.
class LearnedCodec {
public:
    LearnedCodec(const ShapeConfig& cfg, int64_t code_dim, RngStream& init_rng);

    double train(const std::vector<VideoTensor>& videos, int64_t steps, double lr, RngStream& rng);
    LatentVideo encode(const VideoTensor& video) const;
    VideoTensor decode(const LatentVideo& lat) const;
    double reconstruction_mse(const VideoTensor& video) const;
    int64_t code_dim() const { return code_dim_; }

private:
    ShapeConfig cfg_;
    int64_t code_dim_;
    ParamStore store_;
};

}  // namespace svimo
