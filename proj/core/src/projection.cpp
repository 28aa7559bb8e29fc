#include "svimo/projection.hpp"

#include <algorithm>
#include <cmath>

#include "svimo/errors.hpp"

namespace svimo {

void CameraModel::validate() const {
    if (!(scale > 0.0)) throw ShapeError("camera: scale must be positive");
    const auto& r = rotation;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += r[static_cast<size_t>(i * 3 + k)] * r[static_cast<size_t>(j * 3 + k)];
            double want = i == j ? 1.0 : 0.0;
            if (std::fabs(dot - want) > 1e-9) throw ShapeError("camera: rotation not orthonormal");
        }
    }
}

Projected project_point(const std::array<double, 3>& p, const CameraModel& cam) {
    const auto& r = cam.rotation;
    double x = r[0] * p[0] + r[1] * p[1] + r[2] * p[2];
    double y = r[3] * p[0] + r[4] * p[1] + r[5] * p[2];
    double z = r[6] * p[0] + r[7] * p[1] + r[8] * p[2];
    return {cam.u0 + cam.scale * x, cam.v0 + cam.scale * y, z};
}

CameraModel default_camera(const Aabb& bounds, int64_t H, int64_t W) {
    CameraModel cam;
    std::array<double, 3> extent{}, center{};
    for (int k = 0; k < 3; ++k) {
        double e = bounds.hi[static_cast<size_t>(k)] - bounds.lo[static_cast<size_t>(k)];
        if (e < 0.0) throw ShapeError("default_camera: empty box");
        extent[static_cast<size_t>(k)] = std::max(e, 1e-3);
        center[static_cast<size_t>(k)] = 0.5 * (bounds.hi[static_cast<size_t>(k)] + bounds.lo[static_cast<size_t>(k)]);
    }
    double sx = 0.8 * static_cast<double>(W) / extent[0];
    double sy = 0.8 * static_cast<double>(H) / extent[1];
    cam.scale = std::min(sx, sy);
    cam.u0 = static_cast<double>(W) / 2.0 - cam.scale * center[0];
    cam.v0 = static_cast<double>(H) / 2.0 - cam.scale * center[1];
    return cam;
}

const Palette& render_palette() {
    static const Palette p;
    return p;
}

Skeleton default_skeleton(int64_t J) {
    Skeleton bones;
    int64_t per_hand = J / 2;
    for (int64_t hand = 0; hand < 2; ++hand) {
        int64_t base = hand * per_hand;
        for (int64_t i = 0; i + 1 < per_hand; ++i) bones.push_back({base + i, base + i + 1});
    }
    return bones;
}

namespace {

struct DrawOp {
    double u, v, depth;
    int radius;  // 0 = single pixel
    std::array<double, 3> color;
};

void splat(Tensor& frame, int64_t H, int64_t W, const DrawOp& op) {
    int64_t cu = static_cast<int64_t>(std::llround(op.u));
    int64_t cv = static_cast<int64_t>(std::llround(op.v));
    int r = op.radius;
    for (int64_t dy = -r; dy <= r; ++dy)
        for (int64_t dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy > static_cast<int64_t>(r) * r) continue;
            int64_t x = cu + dx, y = cv + dy;
            if (x < 0 || x >= W || y < 0 || y >= H) continue;
            double* px = frame.data() + (y * W + x) * 3;
            px[0] = op.color[0];
            px[1] = op.color[1];
            px[2] = op.color[2];
        }
}

void draw_segment(std::vector<DrawOp>& ops, const Projected& a, const Projected& b,
                  const std::array<double, 3>& color) {
    double len = std::max(std::fabs(b.u - a.u), std::fabs(b.v - a.v));
    int n = std::max(1, static_cast<int>(std::ceil(len)));
    for (int i = 0; i <= n; ++i) {
        double s = static_cast<double>(i) / static_cast<double>(n);
        ops.push_back({a.u + s * (b.u - a.u), a.v + s * (b.v - a.v),
                       a.depth + s * (b.depth - a.depth), 0, color});
    }
}

}  // namespace

VideoTensor render_motion_video(const HandTrajectory& h, const ObjectCloudSeq& o,
                                const CameraModel& cam, int64_t H, int64_t W) {
    cam.validate();
    if (H < 1 || W < 1) throw ShapeError("render: degenerate canvas");
    int64_t N = 0, J = 0, K = 0;
    if (h.joints.rank() == 3) {
        if (h.joints.dim(2) != 3) throw ShapeError("hands must be [N,J,3]");
        N = h.joints.dim(0);
        J = h.joints.dim(1);
    } else if (h.joints.rank() != 0) {
        throw ShapeError("hands must be [N,J,3]");
    }
    if (o.points.rank() == 3) {
        if (o.points.dim(2) != 3) throw ShapeError("objects must be [N,K,3]");
        if (N != 0 && o.points.dim(0) != N) throw ShapeError("hand/object frame counts differ");
        N = o.points.dim(0);
        K = o.points.dim(1);
    } else if (o.points.rank() != 0) {
        throw ShapeError("objects must be [N,K,3]");
    }
    if (N == 0) throw ShapeError("render: no frames");
    const Palette& pal = render_palette();
    Skeleton bones = default_skeleton(J);
    int hand_radius = static_cast<int>(std::max<int64_t>(1, H / 64));
    VideoTensor out;
    out.frames = Tensor({N, H, W, 3});
    for (int64_t n = 0; n < N; ++n) {
        Tensor frame({H, W, 3});
        for (int64_t i = 0; i < H * W; ++i) {
            frame[i * 3] = pal.background[0];
            frame[i * 3 + 1] = pal.background[1];
            frame[i * 3 + 2] = pal.background[2];
        }
        std::vector<DrawOp> ops;
        for (int64_t k = 0; k < K; ++k) {
            const double* p = o.points.data() + (n * K + k) * 3;
            Projected pr = project_point({p[0], p[1], p[2]}, cam);
            ops.push_back({pr.u, pr.v, pr.depth, 0, k < K / 2 ? pal.tool : pal.target});
        }
        auto hand_color = [&](int64_t j) { return j < J / 2 ? pal.left_hand : pal.right_hand; };
        for (const auto& bone : bones) {
            const double* pa = h.joints.data() + (n * J + bone[0]) * 3;
            const double* pb = h.joints.data() + (n * J + bone[1]) * 3;
            draw_segment(ops, project_point({pa[0], pa[1], pa[2]}, cam),
                         project_point({pb[0], pb[1], pb[2]}, cam), hand_color(bone[0]));
        }
        for (int64_t j = 0; j < J; ++j) {
            const double* p = h.joints.data() + (n * J + j) * 3;
            Projected pr = project_point({p[0], p[1], p[2]}, cam);
            ops.push_back({pr.u, pr.v, pr.depth, hand_radius, hand_color(j)});
        }
        // painter's algorithm: far to near, nearer (smaller depth) overdraws
        std::stable_sort(ops.begin(), ops.end(),
                         [](const DrawOp& a, const DrawOp& b) { return a.depth > b.depth; });
        for (const auto& op : ops) splat(frame, H, W, op);
        std::copy(frame.data(), frame.data() + frame.numel(), out.frames.data() + n * H * W * 3);
    }
    return out;
}

}  // namespace svimo
