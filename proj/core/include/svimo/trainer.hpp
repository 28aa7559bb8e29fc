#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svimo/backbone.hpp"
#include "svimo/config.hpp"
#include "svimo/dataset.hpp"
#include "svimo/metrics.hpp"
#include "svimo/schedule.hpp"
#include "svimo/vid.hpp"

namespace svimo {

struct TraceEvent {
    std::string op;
    std::vector<int64_t> shape;
};
using Trace = std::vector<TraceEvent>;

struct StepMetrics {
    int64_t step = 0;
    double loss = 0.0;
    double loss_svimo = 0.0;
    double loss_vid = 0.0;
    double grad_norm = 0.0;
    double millis = 0.0;
};

// Per-element internals captured for wiring tests.
struct StepDebug {
    std::vector<int64_t> ts;
    std::vector<Tensor> guidance;       // z~0^M fed to embed_motion
    std::vector<Tensor> hhat_nograd;    // VID first-pass outputs
    std::vector<Tensor> ohat_nograd;
};

struct GenerationResult {
    VideoTensor video;
    HandTrajectory hands;
    ObjectCloudSeq objects;
    Tensor final_video_latent;   // z_0^V before decoding
    VideoTensor rendered_motion; // projection of the returned motion
};

struct TrainEvalResult {
    double video_latent_mse = 0.0;
    double mpjpe = 0.0;
    double object_chamfer = 0.0;
};

// Owns both models, the schedule, the named RNG streams, and the optimizer
// state; implements the warm-up step, the closed-loop joint step, and the
// full generation loop.
class Trainer {
public:
    Trainer(RunConfig cfg, const PromptVocab& vocab, const CameraModel& camera);

    void set_dataset(const std::vector<SampleRecord>& records);
    int64_t dataset_size() const { return static_cast<int64_t>(samples_.size()); }

    StepMetrics vid_warmup_step();
    StepMetrics joint_train_step(Trace* trace = nullptr, StepDebug* debug = nullptr);

    // Gradient norm of the omega2-weighted VID loss w.r.t. the SViMo
    // parameters alone (the Eq.-7 gradient-constraint path probe).
    double probe_vid_gradient_into_svimo();

    GenerationResult generate(const Tensor& image, const std::string& prompt, int64_t inference_steps);

    TrainEvalResult evaluate_on_train(const std::vector<int64_t>& ts);

    void save_checkpoint(const std::filesystem::path& path) const;
    void load_checkpoint(const std::filesystem::path& path);

    SViMoModel& svimo() { return *svimo_; }
    VidModel& vid() { return *vid_; }
    const NoiseSchedule& schedule() const { return sched_; }
    const RunConfig& config() const { return cfg_; }
    const CameraModel& camera() const { return camera_; }
    int64_t warmup_steps_done() const { return warmup_steps_done_; }
    int64_t joint_steps_done() const { return joint_steps_done_; }

private:
    struct PreparedSample {
        std::string id;
        Tensor z0_v, z0_m;  // clean latents
        Tensor h0, o0;
        Tensor image;
        std::vector<int64_t> prompt_ids;
    };

    struct JointGraphOut {
        Var loss_svimo;
        Var loss_vid;
    };

    const PreparedSample& draw_sample();
    Tensor encode_guidance(const Tensor& hhat, const Tensor& ohat) const;
    Tensor image_latent(const Tensor& image, bool add_noise);
    JointGraphOut build_joint_graph(Graph& g, const PreparedSample& s, int64_t t, FeedbackMode mode,
                                    Trace* trace, StepDebug* debug);
    void check_finite(double v, const char* what, int64_t step) const;

    RunConfig cfg_;
    PromptVocab vocab_;
    CameraModel camera_;
    NoiseSchedule sched_;
    std::unique_ptr<SViMoModel> svimo_;
    std::unique_ptr<VidModel> vid_;
    AdamOptimizer warmup_opt_;
    AdamOptimizer joint_opt_;
    RngStream rng_data_, rng_t_, rng_noise_, rng_sampling_;
    std::vector<PreparedSample> samples_;
    int64_t warmup_steps_done_ = 0;
    int64_t joint_steps_done_ = 0;
};

}  // namespace svimo
