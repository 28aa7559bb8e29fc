#pragma once

#include <cstdint>
#include <vector>

#include "svimo/tensor.hpp"

namespace svimo {

enum class ScheduleKind { kLinear, kCosine };

// Noise schedule tables shared by all three denoised streams. Index t runs
// over [0, T-1]; alpha_bars[t] is the cumulative product up to and including
// index t, so alpha_bars[0] == alphas[0].
struct NoiseSchedule {
    int64_t T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;
};

NoiseSchedule build_schedule(int64_t T, double beta_start, double beta_end, ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
Tensor forward_diffuse(const Tensor& z0, int64_t t, const Tensor& eps, const NoiseSchedule& sched);

// One ancestral step from level `hi` to level `lo` (consecutive levels in the
// full schedule, a stride for subsampled inference). A transition into level
// 0 is the deterministic clean jump: the chain ends on zhat0 exactly, which
// is the abar_{-1} := 1 convention for the final step.
Tensor posterior_sample_pair(const Tensor& z_hi, const Tensor& zhat0, int64_t hi, int64_t lo,
                             const NoiseSchedule& sched, const Tensor& noise);

// Full-schedule step t -> t-1; valid for t in [1, T-1], and t == 1 returns
// zhat0 with zero variance.
Tensor posterior_sample(const Tensor& z_t, const Tensor& zhat0, int64_t t,
                        const NoiseSchedule& sched, const Tensor& noise);

double posterior_sigma2(int64_t hi, int64_t lo, const NoiseSchedule& sched);

// Evenly strided subset of timesteps ending at T-1 (and, for steps >= 2,
// starting at 0 so the chain still terminates on the clean jump).
struct SubSchedule {
    const NoiseSchedule* parent = nullptr;
    std::vector<int64_t> step_indices;
};

SubSchedule subsample_schedule(const NoiseSchedule& sched, int64_t steps);

}  // namespace svimo
