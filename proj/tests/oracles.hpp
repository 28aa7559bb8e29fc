#pragma once

// Independent brute-force oracles kept apart from the implementations they
// check. Everything here favors the obvious formula over speed.

#include <cmath>
#include <functional>
#include <vector>

#include "svimo/tensor.hpp"

namespace oracle {

// plain product loop for cumulative alphas
inline std::vector<double> alpha_bars_bruteforce(const std::vector<double>& betas) {
    std::vector<double> out(betas.size());
    for (size_t t = 0; t < betas.size(); ++t) {
        double prod = 1.0;
        for (size_t s = 0; s <= t; ++s) prod *= 1.0 - betas[s];
        out[t] = prod;
    }
    return out;
}

// halved symmetric mean squared nearest-neighbor distance over all pairs
inline double chamfer_bruteforce(const svimo::Tensor& a, const svimo::Tensor& b) {
    int64_t p = a.dim(0), q = b.dim(0);
    auto sq = [&](const svimo::Tensor& x, int64_t i, const svimo::Tensor& y, int64_t j) {
        double s = 0.0;
        for (int64_t c = 0; c < 3; ++c) {
            double d = x[i * 3 + c] - y[j * 3 + c];
            s += d * d;
        }
        return s;
    };
    double ta = 0.0;
    for (int64_t i = 0; i < p; ++i) {
        double best = sq(a, i, b, 0);
        for (int64_t j = 1; j < q; ++j) best = std::min(best, sq(a, i, b, j));
        ta += best;
    }
    double tb = 0.0;
    for (int64_t j = 0; j < q; ++j) {
        double best = sq(a, 0, b, j);
        for (int64_t i = 1; i < p; ++i) best = std::min(best, sq(a, i, b, j));
        tb += best;
    }
    return 0.5 * (ta / static_cast<double>(p) + tb / static_cast<double>(q));
}

// central finite difference of f at x, elementwise
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    int64_t checked = 0;
};

// compares analytic gradient entries against central differences through an
// arbitrary scalar-valued functional of a parameter vector
inline GradCheckResult grad_check(svimo::Tensor& values, const svimo::Tensor& analytic_grad,
                                  const std::function<double()>& eval, double step, int64_t stride = 1) {
    GradCheckResult res;
    for (int64_t i = 0; i < values.numel(); i += stride) {
        double saved = values[i];
        values[i] = saved + step;
        double fp = eval();
        values[i] = saved - step;
        double fm = eval();
        values[i] = saved;
        double fd = (fp - fm) / (2.0 * step);
        double denom = std::max({1e-6, std::fabs(fd), std::fabs(analytic_grad[i])});
        res.max_rel_err = std::max(res.max_rel_err, std::fabs(fd - analytic_grad[i]) / denom);
        ++res.checked;
    }
    return res;
}

}  // namespace oracle
