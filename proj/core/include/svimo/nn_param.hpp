#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "svimo/rng.hpp"
#include "svimo/tensor.hpp"

namespace svimo {

// A trainable tensor plus its gradient and Adam state.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
};

// Name-ordered parameter registry; the ordering fixes checkpoint bytes and
// optimizer iteration order.
class ParamStore {
public:
    explicit ParamStore(std::string prefix = "") : prefix_(std::move(prefix)) {}

    Param& create(const std::string& name, std::vector<int64_t> shape);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }

    void zero_grads();
    double grad_norm() const;
    int64_t param_count() const;

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& [name, p] : params_) fn(*p);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& [name, p] : params_) fn(*p);
    }

    const std::string& prefix() const { return prefix_; }

private:
    std::string prefix_;
    std::map<std::string, std::unique_ptr<Param>> params_;
};

// Weight init helpers; every model takes an "init" RngStream.
void init_normal(Param& p, RngStream& rng, double stddev);
void init_zero(Param& p);

// Adam with linear learning-rate warmup. State lives inside the Params.
class AdamOptimizer {
public:
    struct Options {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        int64_t lr_warmup_steps = 100;
    };

    explicit AdamOptimizer(Options opt) : opt_(opt) {}

    void step(const std::vector<ParamStore*>& stores);
    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t n) { step_count_ = n; }
    const Options& options() const { return opt_; }

private:
    Options opt_;
    int64_t step_count_ = 0;
};

}  // namespace svimo
