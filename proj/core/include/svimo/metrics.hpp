#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "svimo/codec.hpp"
#include "svimo/nn_param.hpp"
#include "svimo/projection.hpp"

namespace svimo {

// Deterministic handcrafted frame feature: masked 8x8 downsampled grayscale
// concatenated with an 8-bin gradient-orientation histogram, unit-normalized.
// Stands in for the DINO/CLIP extractors; formulas stay exact, values do not
// compare to the paper's scale.
Tensor frame_feature(const Tensor& frame, const std::vector<uint8_t>& mask);

// Foreground = any channel further than `threshold` from the background color.
std::vector<std::vector<uint8_t>> derive_masks(const VideoTensor& video,
                                               const std::array<double, 3>& background,
                                               double threshold);

using FrameFeatureFn = std::function<Tensor(const Tensor&, const std::vector<uint8_t>&)>;

struct ConsistencyResult {
    double value = 1.0;
    bool empty_mask_fallback = false;  // some frame fell back to the whole-frame feature
};

ConsistencyResult subject_consistency(const VideoTensor& video,
                                      const std::vector<std::vector<uint8_t>>& fg_masks,
                                      const FrameFeatureFn& fx = {});
ConsistencyResult background_consistency(const VideoTensor& video,
                                         const std::vector<std::vector<uint8_t>>& fg_masks,
                                         const FrameFeatureFn& fx = {});

struct SmoothnessResult {
    double value = 1.0;
    bool trailing_frame_dropped = false;
};

// Drop odd-indexed reconstruction: removed frames are rebuilt as midpoints of
// their even neighbors (the first as a copy of its only neighbor) and scored
// by 255-normalized mean absolute error.
SmoothnessResult temporal_smoothness(const VideoTensor& video);

// Mean of the top 5% per-pixel block-matching flow magnitudes (block 4,
// search radius 3, SAD on mean-subtracted frames, ties to the smallest
// displacement).
double video_dynamic_score(const VideoTensor& video);
double dynamic_degree(const std::vector<VideoTensor>& videos, double tau_op);

double overall_score(double subj, double bkg, double tsmoo, double dyn);

double mpjpe(const Tensor& h, const Tensor& hhat);      // [N,J,3]
double motion_smoothness(const Tensor& hhat);           // mean second-difference norm

// Frechet distance between Gaussian fits of two feature sets [n,d] and [m,d].
double fid_from_features(const Tensor& real_feats, const Tensor& gen_feats,
                         bool* regularized = nullptr);

Tensor flatten_motion(const HandTrajectory& h, const ObjectCloudSeq& o);  // [N*(J+K)*3]

// Reconstruction autoencoder over flattened motions; the 64-d bottleneck
// provides FID features.
class MotionAutoencoder {
public:
    MotionAutoencoder(int64_t input_dim, int64_t bottleneck, RngStream& init_rng);

    // Throws NumericalError when the budget is exhausted above target_mse.
    double train(const std::vector<Tensor>& motions, int64_t max_steps, double lr, double target_mse);
    Tensor encode(const Tensor& flat_motion) const;
    double reconstruction_mse(const Tensor& flat_motion) const;
    int64_t bottleneck() const { return bottleneck_; }

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    int64_t input_dim_, bottleneck_;
    ParamStore store_;
};

struct MetricsReport {
    struct PerSample {
        std::string id;
        double subj = 0, bkg = 0, tsmoo = 0, dyn_score = 0;
        double mpjpe = 0, msmoo = 0, chamfer = 0;
    };
    double subj = 0, bkg = 0, tsmoo = 0, dyn = 0, overall = 0;
    double mpjpe = 0, msmoo = 0, chamfer = 0, fid = 0;
    std::vector<PerSample> samples;
    bool negative_consistency_clamped = false;
    bool empty_mask_fallback = false;
    bool trailing_frame_dropped = false;
    bool fid_regularized = false;
};

struct GeneratedSample {
    std::string id;  // matching ground-truth sample id
    VideoTensor video;
    HandTrajectory hands;
    ObjectCloudSeq objects;
};

// Full evaluation of generated outputs against their ground-truth samples.
// The FID encoder trains on the ground-truth motions (seeded).
MetricsReport evaluate_generation(const std::vector<struct SampleRecord>& reference,
                                  const std::vector<GeneratedSample>& generated, double tau_op,
                                  double bg_threshold, uint64_t fid_seed, int64_t fid_steps,
                                  double fid_lr);

}  // namespace svimo
