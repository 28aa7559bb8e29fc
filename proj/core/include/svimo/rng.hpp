#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "svimo/tensor.hpp"

namespace svimo {

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s, uint64_t seed = 0xcbf29ce484222325ULL);

// One named random stream. Streams are seeded independently from a master
// seed so any single stream can be replayed without the others. Gaussians go
// through an explicit Box-Muller so draws are identical across platforms.
class RngStream {
public:
    RngStream() : RngStream(0, "default") {}
    RngStream(uint64_t master_seed, const std::string& name);

    double uniform();                  // [0, 1)
    double normal();                   // standard normal
    int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds

    void fill_normal(Tensor& t, double stddev = 1.0);
    Tensor normal_tensor(std::vector<int64_t> shape, double stddev = 1.0);

    // Exact state round-trip for checkpoint resume.
    std::string serialize() const;
    void deserialize(const std::string& state);

    const std::string& name() const { return name_; }

private:
    std::mt19937_64 engine_;
    std::string name_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace svimo
