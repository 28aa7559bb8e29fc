#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svimo/codec.hpp"
#include "svimo/projection.hpp"
#include "svimo/vocab.hpp"

namespace svimo {

struct DataConfig {
    int64_t num_samples = 8;
    int64_t J = 12;
    int64_t K = 32;
    double split_ratio = 0.75;  // train fraction
    double fps = 8.0;
    std::vector<std::string> actions = {"stir", "push", "lift", "rotate", "brush"};

    void validate() const;
};

// Scene constants shared by the generator and the video renderer.
struct SceneStyle {
    Aabb bounds{{-0.6, -0.6, -0.6}, {0.6, 0.6, 0.6}};
    std::array<double, 3> video_background{0.55, 0.50, 0.45};
    double texture_amplitude = 0.03;  // kept under the mask threshold
    std::array<double, 3> video_tool{0.75, 0.25, 0.20};
    std::array<double, 3> video_target{0.20, 0.30, 0.75};
    std::array<double, 3> video_left_hand{0.85, 0.65, 0.50};
    std::array<double, 3> video_right_hand{0.95, 0.80, 0.35};
};

const SceneStyle& scene_style();

struct SampleMeta {
    std::string id;
    uint64_t seed = 0;
    std::string action;
    std::string prompt;
    double fps = 8.0;
    int64_t grasp_frame = 0;
    std::string units = "meters";
};

struct SampleRecord {
    Tensor image;           // I = V[0], [H,W,3]
    std::string prompt;
    VideoTensor video;      // shaded appearance render, quantized to the u8 grid
    HandTrajectory hands;   // [N,J,3]
    ObjectCloudSeq objects; // [N,K,3], tool half first
    CameraModel camera;
    std::vector<std::vector<uint8_t>> masks;  // per-frame foreground masks [H*W]
    SampleMeta meta;
};

SampleRecord generate_sample(uint64_t seed, const ShapeConfig& shapes, const DataConfig& data);

struct DatasetManifest {
    int64_t format_version = 1;
    uint64_t master_seed = 0;
    ShapeConfig shapes;
    DataConfig data;
    std::vector<std::string> ids;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::vector<std::string> vocab_words;
    CameraModel camera;
    Skeleton skeleton;
    // id -> relative file path -> content hash (hex)
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> hashes;
};

void write_dataset(const std::vector<SampleRecord>& records, const std::filesystem::path& root,
                   const ShapeConfig& shapes, const DataConfig& data, uint64_t master_seed);
std::vector<SampleRecord> read_dataset(const std::filesystem::path& root);
DatasetManifest read_manifest(const std::filesystem::path& root);
SampleRecord read_sample(const std::filesystem::path& root, const std::string& id,
                         const ShapeConfig& shapes);
uint64_t manifest_hash(const std::filesystem::path& root);

std::pair<std::vector<std::string>, std::vector<std::string>> make_splits(
    const std::vector<std::string>& ids, double ratio, uint64_t seed);

}  // namespace svimo
