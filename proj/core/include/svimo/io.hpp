#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svimo/tensor.hpp"

namespace svimo {

// Tensor container: "SVTEN001" magic, u8 dtype code (0 = f64), u8 rank,
// rank x u64 little-endian dims, then the row-major payload. Used everywhere
// tensors touch disk (motions, latents, checkpoint payloads).
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is, const std::string& what);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255). Frames store reals in [0,1] quantized to the
// 1/255 grid, so a video that lives on that grid round-trips exactly.
void write_ppm(const std::filesystem::path& path, const Tensor& image);  // [H,W,3]
Tensor read_ppm(const std::filesystem::path& path);

// Binary PGM (P5), for masks; nonzero = foreground.
void write_pgm(const std::filesystem::path& path, const std::vector<uint8_t>& mask, int64_t h, int64_t w);
std::vector<uint8_t> read_pgm(const std::filesystem::path& path, int64_t& h, int64_t& w);

uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(uint64_t v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Write to a temp name then rename, so partial writes never corrupt a sample.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

inline double quantize_u8(double v) {
    double c = std::min(1.0, std::max(0.0, v));
    return std::round(c * 255.0) / 255.0;
}

}  // namespace svimo
