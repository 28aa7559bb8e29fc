#include "svimo/rng.hpp"

#include <cmath>
#include <sstream>

namespace svimo {

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s, uint64_t seed) { return fnv1a64(s.data(), s.size(), seed); }

RngStream::RngStream(uint64_t master_seed, const std::string& name) : name_(name) {
    uint64_t h = fnv1a64(name);
    h = fnv1a64(&master_seed, sizeof(master_seed), h);
    engine_.seed(h);
}

double RngStream::uniform() {
    // 53-bit mantissa uniform in [0,1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) throw ShapeError("uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // rejection sampling keeps the draw unbiased
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return lo + static_cast<int64_t>(v % span);
}

void RngStream::fill_normal(Tensor& t, double stddev) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = normal() * stddev;
}

Tensor RngStream::normal_tensor(std::vector<int64_t> shape, double stddev) {
    Tensor t(std::move(shape));
    fill_normal(t, stddev);
    return t;
}

std::string RngStream::serialize() const {
    std::ostringstream os;
    os << engine_ << " " << (has_spare_ ? 1 : 0) << " ";
    os.precision(17);
    os << std::scientific << spare_;
    return os.str();
}

void RngStream::deserialize(const std::string& state) {
    std::istringstream is(state);
    int spare_flag = 0;
    is >> engine_ >> spare_flag >> spare_;
    if (is.fail()) throw DataIntegrityError("corrupt RNG state for stream " + name_);
    has_spare_ = spare_flag != 0;
}

}  // namespace svimo
