#include "svimo/schedule.hpp"

#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::kLinear;
    if (s == "cosine") return ScheduleKind::kCosine;
    throw ConfigError("unknown schedule kind '" + s + "' (expected linear or cosine)");
}

NoiseSchedule build_schedule(int64_t T, double beta_start, double beta_end, ScheduleKind kind) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(static_cast<size_t>(T));
    if (kind == ScheduleKind::kLinear) {
        for (int64_t t = 0; t < T; ++t) {
            double frac = T == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(T - 1);
            s.betas[static_cast<size_t>(t)] = beta_start + (beta_end - beta_start) * frac;
        }
    } else {
        // betas derived from the squared-cosine abar curve, clamped into the
        // configured [beta_start, beta_end] band so the table invariants hold
        const double offs = 0.008;
        auto f = [&](double u) {
            double v = std::cos((u + offs) / (1.0 + offs) * M_PI / 2.0);
            return v * v;
        };
        double f0 = f(0.0);
        double prev = 1.0;
        for (int64_t t = 0; t < T; ++t) {
            double abar = f(static_cast<double>(t + 1) / static_cast<double>(T)) / f0;
            double beta = 1.0 - abar / prev;
            beta = std::min(std::max(beta, beta_start), beta_end);
            s.betas[static_cast<size_t>(t)] = beta;
            prev *= 1.0 - beta;
        }
        for (int64_t t = 1; t < T; ++t) {
            auto& b = s.betas;
            if (b[static_cast<size_t>(t)] < b[static_cast<size_t>(t - 1)]) {
                b[static_cast<size_t>(t)] = b[static_cast<size_t>(t - 1)];
            }
        }
    }
    s.alphas.resize(static_cast<size_t>(T));
    s.alpha_bars.resize(static_cast<size_t>(T));
    double prod = 1.0;
    for (int64_t t = 0; t < T; ++t) {
        double beta = s.betas[static_cast<size_t>(t)];
        if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta outside (0,1) at step " + std::to_string(t));
        s.alphas[static_cast<size_t>(t)] = 1.0 - beta;
        prod *= s.alphas[static_cast<size_t>(t)];
        s.alpha_bars[static_cast<size_t>(t)] = prod;
    }
    return s;
}

Tensor forward_diffuse(const Tensor& z0, int64_t t, const Tensor& eps, const NoiseSchedule& sched) {
    if (t < 0 || t >= sched.T) throw ShapeError("forward_diffuse: t out of range");
    check_same_shape(z0, eps, "forward_diffuse");
    double abar = sched.alpha_bars[static_cast<size_t>(t)];
    double a = std::sqrt(abar);
    double b = std::sqrt(1.0 - abar);
    Tensor out = z0;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a * out[i] + b * eps[i];
    return out;
}

double posterior_sigma2(int64_t hi, int64_t lo, const NoiseSchedule& sched) {
    if (hi <= 0 || hi >= sched.T || lo < 0 || lo >= hi) {
        throw ShapeError("posterior step: need 0 <= lo < hi <= T-1");
    }
    if (lo == 0) return 0.0;
    double abar_hi = sched.alpha_bars[static_cast<size_t>(hi)];
    double abar_lo = sched.alpha_bars[static_cast<size_t>(lo)];
    double alpha = (lo == hi - 1) ? sched.alphas[static_cast<size_t>(hi)] : abar_hi / abar_lo;
    return (1.0 - abar_lo) * (1.0 - alpha) / (1.0 - abar_hi);
}

Tensor posterior_sample_pair(const Tensor& z_hi, const Tensor& zhat0, int64_t hi, int64_t lo,
                             const NoiseSchedule& sched, const Tensor& noise) {
    if (hi <= 0 || hi >= sched.T || lo < 0 || lo >= hi) {
        throw ShapeError("posterior step: need 0 <= lo < hi <= T-1");
    }
    check_same_shape(z_hi, zhat0, "posterior_sample");
    check_same_shape(z_hi, noise, "posterior_sample noise");
    if (lo == 0) return zhat0;  // deterministic final step
    double abar_hi = sched.alpha_bars[static_cast<size_t>(hi)];
    double abar_lo = sched.alpha_bars[static_cast<size_t>(lo)];
    double alpha = (lo == hi - 1) ? sched.alphas[static_cast<size_t>(hi)] : abar_hi / abar_lo;
    double c_z = std::sqrt(alpha) * (1.0 - abar_lo) / (1.0 - abar_hi);
    double c_x0 = std::sqrt(abar_lo) * (1.0 - alpha) / (1.0 - abar_hi);
    double sigma = std::sqrt((1.0 - abar_lo) * (1.0 - alpha) / (1.0 - abar_hi));
    Tensor out = z_hi;
    for (int64_t i = 0; i < out.numel(); ++i) {
        out[i] = c_z * out[i] + c_x0 * zhat0[i] + sigma * noise[i];
    }
    return out;
}

Tensor posterior_sample(const Tensor& z_t, const Tensor& zhat0, int64_t t,
                        const NoiseSchedule& sched, const Tensor& noise) {
    if (t == 0) throw ShapeError("posterior_sample: t = 0 is invalid, nothing to sample");
    return posterior_sample_pair(z_t, zhat0, t, t - 1, sched, noise);
}

SubSchedule subsample_schedule(const NoiseSchedule& sched, int64_t steps) {
    if (steps < 1 || steps > sched.T) {
        throw ConfigError("subsample_schedule: steps must be in [1, T], got " + std::to_string(steps));
    }
    SubSchedule sub;
    sub.parent = &sched;
    if (steps == 1) {
        sub.step_indices = {sched.T - 1};
        return sub;
    }
    sub.step_indices.resize(static_cast<size_t>(steps));
    for (int64_t j = 0; j < steps; ++j) {
        sub.step_indices[static_cast<size_t>(j)] = j * (sched.T - 1) / (steps - 1);
    }
    return sub;
}

}  // namespace svimo
