#include "svimo/nn_param.hpp"

#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

Param& ParamStore::create(const std::string& name, std::vector<int64_t> shape) {
    std::string full = prefix_.empty() ? name : prefix_ + "." + name;
    if (params_.count(full)) throw ShapeError("duplicate parameter " + full);
    auto p = std::make_unique<Param>();
    p->name = full;
    p->value = Tensor(shape);
    p->grad = Tensor(shape);
    p->adam_m = Tensor(shape);
    p->adam_v = Tensor(std::move(shape));
    Param& ref = *p;
    params_[full] = std::move(p);
    return ref;
}

Param& ParamStore::get(const std::string& name) {
    std::string full = prefix_.empty() ? name : prefix_ + "." + name;
    auto it = params_.find(full);
    if (it == params_.end()) throw ShapeError("unknown parameter " + full);
    return *it->second;
}

const Param& ParamStore::get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
}

void ParamStore::zero_grads() {
    for (auto& [name, p] : params_) {
        for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] = 0.0;
    }
}

double ParamStore::grad_norm() const {
    double s = 0.0;
    for (const auto& [name, p] : params_) {
        for (int64_t i = 0; i < p->grad.numel(); ++i) s += p->grad[i] * p->grad[i];
    }
    return std::sqrt(s);
}

int64_t ParamStore::param_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : params_) n += p->value.numel();
    return n;
}

void init_normal(Param& p, RngStream& rng, double stddev) { rng.fill_normal(p.value, stddev); }

void init_zero(Param& p) {
    for (int64_t i = 0; i < p.value.numel(); ++i) p.value[i] = 0.0;
}

void AdamOptimizer::step(const std::vector<ParamStore*>& stores) {
    ++step_count_;
    double lr = opt_.lr;
    if (opt_.lr_warmup_steps > 0 && step_count_ <= opt_.lr_warmup_steps) {
        lr = opt_.lr * static_cast<double>(step_count_) / static_cast<double>(opt_.lr_warmup_steps);
    }
    double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_count_));
    for (ParamStore* store : stores) {
        store->for_each([&](Param& p) {
            for (int64_t i = 0; i < p.value.numel(); ++i) {
                double g = p.grad[i];
                p.adam_m[i] = opt_.beta1 * p.adam_m[i] + (1.0 - opt_.beta1) * g;
                p.adam_v[i] = opt_.beta2 * p.adam_v[i] + (1.0 - opt_.beta2) * g * g;
                double mhat = p.adam_m[i] / bc1;
                double vhat = p.adam_v[i] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + opt_.eps);
            }
        });
    }
}

}  // namespace svimo
