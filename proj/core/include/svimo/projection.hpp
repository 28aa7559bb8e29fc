#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "svimo/codec.hpp"
#include "svimo/tensor.hpp"

namespace svimo {

struct HandTrajectory {
    Tensor joints;  // [N,J,3], scene units
};

struct ObjectCloudSeq {
    Tensor points;  // [N,K,3]; first K/2 rows per frame are the tool, last K/2 the target
};

struct CameraModel {
    std::array<double, 9> rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major view axes
    double scale = 1.0;                                            // pixels per scene unit
    double u0 = 0.0, v0 = 0.0;

    void validate() const;  // orthonormal rotation, positive scale
};

struct Projected {
    double u = 0.0, v = 0.0, depth = 0.0;
};

Projected project_point(const std::array<double, 3>& p, const CameraModel& cam);

struct Aabb {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
};

// Orthographic camera framing the box into the central 80% of the canvas.
// Degenerate boxes are padded by a 1e-3 scene-unit extent floor.
CameraModel default_camera(const Aabb& bounds, int64_t H, int64_t W);

// Fixed render palette; the four part colors are pairwise distinct and far
// from the background so parts stay identifiable after encoding.
struct Palette {
    std::array<double, 3> background{0.02, 0.02, 0.05};
    std::array<double, 3> tool{0.10, 0.80, 0.90};
    std::array<double, 3> target{0.90, 0.20, 0.80};
    std::array<double, 3> left_hand{0.20, 0.90, 0.20};
    std::array<double, 3> right_hand{1.00, 0.60, 0.10};
};

const Palette& render_palette();

using Skeleton = std::vector<std::array<int64_t, 2>>;  // bone joint-index pairs

// Chain skeleton of two hands with J/2 joints each: joint 0 is the wrist of
// the left hand, joint J/2 the wrist of the right hand.
Skeleton default_skeleton(int64_t J);

// Dot/skeleton rendering of explicit motion: object points as single pixels,
// hand joints as filled disks plus bone segments, painter's-algorithm depth.
VideoTensor render_motion_video(const HandTrajectory& h, const ObjectCloudSeq& o,
                                const CameraModel& cam, int64_t H, int64_t W);

}  // namespace svimo
