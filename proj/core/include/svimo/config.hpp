#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "svimo/backbone.hpp"
#include "svimo/codec.hpp"
#include "svimo/dataset.hpp"
#include "svimo/schedule.hpp"
#include "svimo/vid.hpp"

namespace svimo {

enum class FeedbackMode { kFull, kGuidanceOnly, kGradientOnly, kNone };
FeedbackMode feedback_mode_from_string(const std::string& s);
std::string to_string(FeedbackMode m);

struct ScheduleConfig {
    int64_t T = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::string kind = "linear";
    int64_t inference_steps = 50;
};

struct ModelConfig {
    int n_blocks = 2;
    int heads = 4;
    int64_t d_time = 128;
    int64_t ffn_mult = 4;
    double ln_eps = 1e-6;
    // VID head
    int64_t vid_d_model = 128;
    int vid_heads = 4;
    int vid_n_blocks = 2;
    int64_t vid_conv_c1 = 32;
    int64_t vid_conv_c2 = 64;
    int64_t vid_d_time = 128;
};

struct TrainSection {
    double omega1 = 1.0;
    double omega2 = 0.05;
    int64_t warmup_steps = 500;
    int64_t total_steps = 2000;
    int64_t batch_size = 4;
    double learning_rate = 1e-4;
    int64_t lr_warmup_steps = 100;
    std::string feedback_mode = "full";
    int64_t checkpoint_every = 500;
    double image_noise_sigma = 0.02;
};

struct MetricsSection {
    double tau_op = 0.5;
    double bg_threshold = 0.1;
    int64_t fid_ae_steps = 4000;
    double fid_ae_lr = 1e-3;
};

struct CodecSection {
    std::string mode = "lossless";  // lossless | learned
    int64_t learned_dim = 16;
    int64_t learned_steps = 2000;
    double learned_lr = 1e-3;
};

struct RunConfig {
    int64_t format_version = 1;
    uint64_t seed = 42;
    ShapeConfig shapes;
    ScheduleConfig schedule;
    ModelConfig model;
    TrainSection train;
    DataConfig data;
    MetricsSection metrics;
    CodecSection codec;

    void validate() const;
    BackboneConfig backbone_config(int64_t vocab_size) const;
    VidConfig vid_config() const;
    NoiseSchedule make_schedule() const;

    std::string to_json_text() const;  // fully resolved, deterministic key order
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

// Dotted-path override, e.g. "train.total_steps=100" or "schedule.kind=cosine".
void apply_override(std::string& json_text, const std::string& assignment);

}  // namespace svimo
