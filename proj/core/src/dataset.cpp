#include "svimo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "svimo/errors.hpp"
#include "svimo/io.hpp"
#include "svimo/rng.hpp"

using nlohmann::json;

namespace svimo {

void DataConfig::validate() const {
    if (num_samples < 1) throw ConfigError("data: num_samples must be >= 1");
    if (J < 2 || J % 2 != 0) throw ConfigError("data: J must be even and >= 2");
    if (K < 2 || K % 2 != 0) throw ConfigError("data: K must be even and >= 2");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("data: split_ratio must be in (0,1)");
    if (fps <= 0.0) throw ConfigError("data: fps must be positive");
    static const std::set<std::string> known = {"stir", "push", "lift", "rotate", "brush"};
    if (actions.empty()) throw ConfigError("data: actions must be nonempty");
    for (const auto& a : actions) {
        if (!known.count(a)) throw ConfigError("data: unknown action '" + a + "'");
    }
}

const SceneStyle& scene_style() {
    static const SceneStyle s;
    return s;
}

namespace {

double smoothstep(double x) {
    x = std::min(1.0, std::max(0.0, x));
    return x * x * (3.0 - 2.0 * x);
}

using Vec3 = std::array<double, 3>;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 mul(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

// K/2 surface points of a primitive centered at the origin.
std::vector<Vec3> sample_primitive(const std::string& kind, int64_t count, RngStream& rng) {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<size_t>(count));
    if (kind == "box") {
        Vec3 half{0.05 + 0.04 * rng.uniform(), 0.05 + 0.04 * rng.uniform(), 0.05 + 0.04 * rng.uniform()};
        for (int64_t i = 0; i < count; ++i) {
            int face = static_cast<int>(rng.uniform_int(0, 5));
            Vec3 p{(2.0 * rng.uniform() - 1.0) * half[0], (2.0 * rng.uniform() - 1.0) * half[1],
                   (2.0 * rng.uniform() - 1.0) * half[2]};
            p[static_cast<size_t>(face / 2)] = (face % 2 == 0 ? 1.0 : -1.0) * half[static_cast<size_t>(face / 2)];
            pts.push_back(p);
        }
    } else if (kind == "cylinder") {
        double r = 0.04 + 0.03 * rng.uniform();
        double h = 0.08 + 0.06 * rng.uniform();
        for (int64_t i = 0; i < count; ++i) {
            double theta = 2.0 * M_PI * rng.uniform();
            if (rng.uniform() < 0.8) {
                pts.push_back({r * std::cos(theta), r * std::sin(theta), (rng.uniform() - 0.5) * h});
            } else {
                double rr = r * std::sqrt(rng.uniform());
                pts.push_back({rr * std::cos(theta), rr * std::sin(theta), (rng.uniform() < 0.5 ? -0.5 : 0.5) * h});
            }
        }
    } else {  // sphere
        double r = 0.05 + 0.03 * rng.uniform();
        for (int64_t i = 0; i < count; ++i) {
            double z = 2.0 * rng.uniform() - 1.0;
            double theta = 2.0 * M_PI * rng.uniform();
            double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            pts.push_back({r * s * std::cos(theta), r * s * std::sin(theta), r * z});
        }
    }
    return pts;
}

Vec3 rotate_z(const Vec3& p, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

struct ScenePlan {
    std::string action;
    std::string tool_kind, target_kind;
    bool right_handed = true;
    Vec3 tool_start{}, target_center{};
    std::vector<Vec3> tool_pts, target_pts;  // centered
    int64_t grasp_frame = 0;
    int64_t contact_frame = 0;
};

// tool center and orientation angle at frame n
void tool_pose(const ScenePlan& plan, int64_t n, int64_t N, Vec3& center, double& angle) {
    angle = 0.0;
    center = plan.tool_start;
    if (n < plan.grasp_frame) return;
    double tau = plan.grasp_frame >= N - 1
                     ? 1.0
                     : static_cast<double>(n - plan.grasp_frame) / static_cast<double>(N - 1 - plan.grasp_frame);
    if (plan.action == "stir") {
        double theta = 2.0 * M_PI * tau;
        Vec3 orbit{0.13 * std::cos(theta), 0.13 * std::sin(theta), 0.05};
        center = add(plan.target_center, orbit);
    } else if (plan.action == "push") {
        Vec3 dir = sub(plan.target_center, plan.tool_start);
        center = add(plan.tool_start, mul(dir, 0.9 * smoothstep(tau)));
    } else if (plan.action == "lift") {
        center = add(plan.tool_start, {0.0, 0.28 * smoothstep(tau), 0.0});
    } else if (plan.action == "rotate") {
        angle = 1.5 * M_PI * tau;
    } else {  // brush
        Vec3 base = add(plan.target_center, {0.0, 0.12, 0.02});
        center = add(base, {0.14 * std::sin(2.0 * M_PI * 2.0 * tau), 0.0, 0.0});
    }
}

struct VideoDraw {
    double u, v, depth;
    int radius;
    Vec3 color;
};

}  // namespace

SampleRecord generate_sample(uint64_t seed, const ShapeConfig& shapes, const DataConfig& data) {
    shapes.validate();
    data.validate();
    const SceneStyle& style = scene_style();
    RngStream rng(seed, "sample");
    int64_t N = shapes.N, J = data.J, K = data.K, H = shapes.H, W = shapes.W;
    int64_t per_hand = J / 2, half = K / 2;

    static const char* kTools[] = {"box", "cylinder", "sphere"};
    static const char* kTargets[] = {"box", "cylinder", "sphere"};
    static const char* kTargetWords[] = {"block", "tube", "ball"};

    ScenePlan plan;
    plan.action = data.actions[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(data.actions.size()) - 1))];
    int tool_idx = static_cast<int>(rng.uniform_int(0, 2));
    int target_idx = static_cast<int>(rng.uniform_int(0, 2));
    plan.tool_kind = kTools[tool_idx];
    plan.target_kind = kTargets[target_idx];
    plan.right_handed = rng.uniform() < 0.5;
    plan.grasp_frame = std::max<int64_t>(1, N / 3);
    plan.contact_frame = std::max<int64_t>(plan.grasp_frame + 1, 2 * N / 3);
    plan.tool_pts = sample_primitive(plan.tool_kind, half, rng);
    plan.target_pts = sample_primitive(plan.target_kind, half, rng);
    double side = plan.right_handed ? 1.0 : -1.0;
    plan.tool_start = {side * (0.15 + 0.1 * rng.uniform()), -0.15 + 0.1 * rng.uniform(),
                       0.05 * (2.0 * rng.uniform() - 1.0)};
    plan.target_center = {-side * (0.15 + 0.1 * rng.uniform()), 0.1 + 0.15 * rng.uniform(),
                          0.05 * (2.0 * rng.uniform() - 1.0)};

    SampleRecord rec;
    rec.meta.seed = seed;
    rec.meta.action = plan.action;
    rec.meta.fps = data.fps;
    rec.meta.grasp_frame = plan.grasp_frame;
    rec.meta.prompt = std::string(plan.right_handed ? "right" : "left") + " hand uses the " +
                      plan.tool_kind + " to " + plan.action + " the " + kTargetWords[target_idx];
    rec.prompt = rec.meta.prompt;
    rec.camera = default_camera(style.bounds, H, W);

    // hand chains: actor follows the tool, idle hand sways near its rest pose
    Vec3 rest_actor = add(plan.tool_start, {0.0, -0.2, 0.0});
    Vec3 rest_idle = {-side * 0.35, -0.25, 0.0};
    Vec3 grasp_offset = {0.0, -0.07, 0.02};
    std::vector<double> finger_phase(static_cast<size_t>(per_hand));
    for (auto& p : finger_phase) p = 2.0 * M_PI * rng.uniform();

    rec.hands.joints = Tensor({N, J, 3});
    rec.objects.points = Tensor({N, K, 3});

    for (int64_t n = 0; n < N; ++n) {
        Vec3 tool_center;
        double tool_angle;
        tool_pose(plan, n, N, tool_center, tool_angle);

        // objects
        for (int64_t k = 0; k < half; ++k) {
            Vec3 p = add(rotate_z(plan.tool_pts[static_cast<size_t>(k)], tool_angle), tool_center);
            for (int c = 0; c < 3; ++c) rec.objects.points[((n * K + k) * 3) + c] = p[static_cast<size_t>(c)];
        }
        Vec3 target_center = plan.target_center;
        if (plan.action == "push" && n >= plan.contact_frame) {
            double tau = static_cast<double>(n - plan.contact_frame) /
                         std::max<double>(1.0, static_cast<double>(N - 1 - plan.contact_frame));
            Vec3 dir = sub(plan.target_center, plan.tool_start);
            target_center = add(plan.target_center, mul(dir, 0.25 * smoothstep(tau)));
        }
        for (int64_t k = 0; k < half; ++k) {
            Vec3 p = add(plan.target_pts[static_cast<size_t>(k)], target_center);
            for (int c = 0; c < 3; ++c) rec.objects.points[((n * K + half + k) * 3) + c] = p[static_cast<size_t>(c)];
        }

        // wrists
        double approach = plan.grasp_frame > 0
                              ? smoothstep(static_cast<double>(n) / static_cast<double>(plan.grasp_frame))
                              : 1.0;
        Vec3 grasp_point = add(tool_center, grasp_offset);
        Vec3 wrist_actor = n >= plan.grasp_frame
                               ? grasp_point
                               : add(rest_actor, mul(sub(add(plan.tool_start, grasp_offset), rest_actor), approach));
        double sway = 0.03 * std::sin(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(N));
        Vec3 wrist_idle = add(rest_idle, {sway, 0.5 * sway, 0.0});

        // chains; actor occupies the right-hand slot when right_handed
        for (int hand = 0; hand < 2; ++hand) {
            bool is_actor = plan.right_handed ? hand == 1 : hand == 0;
            Vec3 wrist = is_actor ? wrist_actor : wrist_idle;
            double base_dir = is_actor ? (plan.right_handed ? M_PI * 0.75 : M_PI * 0.25) : M_PI * 0.5;
            for (int64_t i = 0; i < per_hand; ++i) {
                double curl = 0.25 * static_cast<double>(i) +
                              0.15 * std::sin(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(N) +
                                              finger_phase[static_cast<size_t>(i)]);
                double ang = base_dir + curl;
                Vec3 joint = add(wrist, {0.045 * static_cast<double>(i) * std::cos(ang),
                                         0.045 * static_cast<double>(i) * std::sin(ang),
                                         0.01 * static_cast<double>(i % 3)});
                int64_t j = hand * per_hand + i;
                for (int c = 0; c < 3; ++c) rec.hands.joints[((n * J + j) * 3) + c] = joint[static_cast<size_t>(c)];
            }
        }
    }

    // shaded appearance render of V, deliberately unlike the dot/skeleton
    // motion video so the two latent streams differ
    rec.video.fps = data.fps;
    rec.video.frames = Tensor({N, H, W, 3});
    rec.masks.assign(static_cast<size_t>(N), std::vector<uint8_t>(static_cast<size_t>(H * W), 0));
    int obj_radius = std::max(1, static_cast<int>(H / 24));
    int joint_radius = std::max(2, static_cast<int>(H / 16));
    Skeleton bones = default_skeleton(J);

    for (int64_t n = 0; n < N; ++n) {
        double* fr = rec.video.frames.data() + n * H * W * 3;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double tex = std::sin(2.0 * M_PI * 3.0 * static_cast<double>(x) / static_cast<double>(W)) *
                             std::cos(2.0 * M_PI * 2.0 * static_cast<double>(y) / static_cast<double>(H));
                for (int c = 0; c < 3; ++c) {
                    fr[(y * W + x) * 3 + c] = style.video_background[static_cast<size_t>(c)] +
                                              0.5 * style.texture_amplitude * tex;
                }
            }
        std::vector<VideoDraw> ops;
        auto proj = [&](const double* p) {
            return project_point({p[0], p[1], p[2]}, rec.camera);
        };
        for (int64_t k = 0; k < K; ++k) {
            const double* p = rec.objects.points.data() + (n * K + k) * 3;
            Projected pr = proj(p);
            ops.push_back({pr.u, pr.v, pr.depth, obj_radius,
                           k < half ? style.video_tool : style.video_target});
        }
        auto hand_color = [&](int64_t j) {
            return j < per_hand ? style.video_left_hand : style.video_right_hand;
        };
        for (const auto& b : bones) {
            const double* pa = rec.hands.joints.data() + (n * J + b[0]) * 3;
            const double* pb = rec.hands.joints.data() + (n * J + b[1]) * 3;
            Projected a = proj(pa), bb = proj(pb);
            double len = std::max(std::fabs(bb.u - a.u), std::fabs(bb.v - a.v));
            int steps = std::max(1, static_cast<int>(std::ceil(len)));
            for (int i = 0; i <= steps; ++i) {
                double s = static_cast<double>(i) / static_cast<double>(steps);
                ops.push_back({a.u + s * (bb.u - a.u), a.v + s * (bb.v - a.v),
                               a.depth + s * (bb.depth - a.depth), 1, hand_color(b[0])});
            }
        }
        for (int64_t j = 0; j < J; ++j) {
            const double* p = rec.hands.joints.data() + (n * J + j) * 3;
            Projected pr = proj(p);
            ops.push_back({pr.u, pr.v, pr.depth, joint_radius, hand_color(j)});
        }
        std::stable_sort(ops.begin(), ops.end(),
                         [](const VideoDraw& a, const VideoDraw& b) { return a.depth > b.depth; });
        double zlo = style.bounds.lo[2], zhi = style.bounds.hi[2];
        for (const auto& op : ops) {
            double shade = 1.0 - 0.25 * std::min(1.0, std::max(0.0, (op.depth - zlo) / (zhi - zlo)));
            int64_t cu = static_cast<int64_t>(std::llround(op.u));
            int64_t cv = static_cast<int64_t>(std::llround(op.v));
            for (int64_t dy = -op.radius; dy <= op.radius; ++dy)
                for (int64_t dx = -op.radius; dx <= op.radius; ++dx) {
                    if (dx * dx + dy * dy > static_cast<int64_t>(op.radius) * op.radius) continue;
                    int64_t x = cu + dx, y = cv + dy;
                    if (x < 0 || x >= W || y < 0 || y >= H) continue;
                    for (int c = 0; c < 3; ++c) fr[(y * W + x) * 3 + c] = op.color[static_cast<size_t>(c)] * shade;
                    rec.masks[static_cast<size_t>(n)][static_cast<size_t>(y * W + x)] = 1;
                }
        }
        for (int64_t i = 0; i < H * W * 3; ++i) fr[i] = quantize_u8(fr[i]);
    }

    rec.image = Tensor({H, W, 3});
    std::copy(rec.video.frames.data(), rec.video.frames.data() + H * W * 3, rec.image.data());
    return rec;
}

std::pair<std::vector<std::string>, std::vector<std::string>> make_splits(
    const std::vector<std::string>& ids, double ratio, uint64_t seed) {
    if (ids.empty()) throw ConfigError("make_splits: empty id list");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("make_splits: ratio must be in (0,1)");
    std::vector<std::string> shuffled = ids;
    RngStream rng(seed, "splits");
    for (size_t i = shuffled.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(shuffled[i - 1], shuffled[j]);
    }
    size_t n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(shuffled.size())));
    n_train = std::min(n_train, shuffled.size());
    std::vector<std::string> train(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::string> test(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    return {train, test};
}

namespace {

json camera_to_json(const CameraModel& cam) {
    json j;
    j["rotation"] = cam.rotation;
    j["scale"] = cam.scale;
    j["u0"] = cam.u0;
    j["v0"] = cam.v0;
    return j;
}

CameraModel camera_from_json(const json& j) {
    CameraModel cam;
    auto rot = j.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) throw DataIntegrityError("manifest camera rotation must have 9 entries");
    std::copy(rot.begin(), rot.end(), cam.rotation.begin());
    cam.scale = j.at("scale").get<double>();
    cam.u0 = j.at("u0").get<double>();
    cam.v0 = j.at("v0").get<double>();
    return cam;
}

std::string frame_name(int64_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03lld.ppm", static_cast<long long>(n));
    return buf;
}

std::string mask_name(int64_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03lld.pgm", static_cast<long long>(n));
    return buf;
}

std::vector<std::string> sample_files(const ShapeConfig& shapes) {
    std::vector<std::string> files = {"image.ppm", "hands.svt", "objects.svt", "meta.json"};
    for (int64_t n = 0; n < shapes.N; ++n) {
        files.push_back("frames/" + frame_name(n));
        files.push_back("masks/" + mask_name(n));
    }
    return files;
}

}  // namespace

void write_dataset(const std::vector<SampleRecord>& records, const std::filesystem::path& root,
                   const ShapeConfig& shapes, const DataConfig& data, uint64_t master_seed) {
    std::filesystem::create_directories(root);
    std::vector<std::string> ids;
    json hashes = json::object();
    for (const auto& rec : records) {
        const std::string& id = rec.meta.id;
        if (id.empty()) throw ConfigError("write_dataset: sample is missing an id");
        ids.push_back(id);
        std::filesystem::path dir = root / id;
        std::filesystem::create_directories(dir / "frames");
        std::filesystem::create_directories(dir / "masks");
        write_ppm(dir / "image.ppm", rec.image);
        for (int64_t n = 0; n < shapes.N; ++n) {
            Tensor frame({shapes.H, shapes.W, 3});
            std::copy(rec.video.frames.data() + n * shapes.H * shapes.W * 3,
                      rec.video.frames.data() + (n + 1) * shapes.H * shapes.W * 3, frame.data());
            write_ppm(dir / "frames" / frame_name(n), frame);
            write_pgm(dir / "masks" / mask_name(n), rec.masks[static_cast<size_t>(n)], shapes.H, shapes.W);
        }
        save_tensor(dir / "hands.svt", rec.hands.joints);
        save_tensor(dir / "objects.svt", rec.objects.points);
        json meta;
        meta["id"] = id;
        meta["seed"] = rec.meta.seed;
        meta["action"] = rec.meta.action;
        meta["prompt"] = rec.meta.prompt;
        meta["fps"] = rec.meta.fps;
        meta["grasp_frame"] = rec.meta.grasp_frame;
        meta["units"] = rec.meta.units;
        meta["J"] = data.J;
        meta["K"] = data.K;
        meta["tool_point_count"] = data.K / 2;
        meta["camera"] = camera_to_json(rec.camera);
        write_text_file(dir / "meta.json", meta.dump(2) + "\n");
        json fh = json::object();
        for (const auto& f : sample_files(shapes)) fh[f] = hex64(hash_file(dir / f));
        hashes[id] = fh;
    }

    auto [train, test] = make_splits(ids, data.split_ratio, master_seed);
    const SceneStyle& style = scene_style();
    const Palette& pal = render_palette();
    json m;
    m["format_version"] = 1;
    m["master_seed"] = master_seed;
    m["shapes"] = {{"N", shapes.N},   {"H", shapes.H},       {"W", shapes.W},
                   {"rh", shapes.rh}, {"rw", shapes.rw},     {"rn", shapes.rn},
                   {"patch", shapes.patch}, {"L_text", shapes.L_text},
                   {"d_model", shapes.d_model}, {"d_latent", shapes.d_latent}};
    m["data"] = {{"num_samples", data.num_samples}, {"J", data.J}, {"K", data.K},
                 {"split_ratio", data.split_ratio}, {"fps", data.fps}, {"actions", data.actions}};
    m["ids"] = ids;
    m["splits"] = {{"train", train}, {"test", test}};
    m["vocab"] = PromptVocab::grammar_vocab().words();
    m["camera"] = camera_to_json(records.empty() ? CameraModel{} : records[0].camera);
    json bones = json::array();
    for (const auto& b : default_skeleton(data.J)) bones.push_back({b[0], b[1]});
    m["skeleton"] = bones;
    m["palette"] = {{"background", pal.background}, {"tool", pal.tool}, {"target", pal.target},
                    {"left_hand", pal.left_hand}, {"right_hand", pal.right_hand}};
    m["video_style"] = {{"background", style.video_background},
                        {"texture_amplitude", style.texture_amplitude}};
    m["bounds"] = {{"lo", style.bounds.lo}, {"hi", style.bounds.hi}};
    m["hashes"] = hashes;
    write_text_file(root / "manifest.json", m.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& root) {
    json m = json::parse(read_text_file(root / "manifest.json"));
    DatasetManifest out;
    out.format_version = m.at("format_version").get<int64_t>();
    if (out.format_version != 1) {
        throw DataIntegrityError("unsupported dataset format_version " + std::to_string(out.format_version));
    }
    out.master_seed = m.at("master_seed").get<uint64_t>();
    const json& s = m.at("shapes");
    out.shapes.N = s.at("N").get<int64_t>();
    out.shapes.H = s.at("H").get<int64_t>();
    out.shapes.W = s.at("W").get<int64_t>();
    out.shapes.rh = s.at("rh").get<int64_t>();
    out.shapes.rw = s.at("rw").get<int64_t>();
    out.shapes.rn = s.at("rn").get<int64_t>();
    out.shapes.patch = s.at("patch").get<int64_t>();
    out.shapes.L_text = s.at("L_text").get<int64_t>();
    out.shapes.d_model = s.at("d_model").get<int64_t>();
    out.shapes.d_latent = s.at("d_latent").get<int64_t>();
    const json& d = m.at("data");
    out.data.num_samples = d.at("num_samples").get<int64_t>();
    out.data.J = d.at("J").get<int64_t>();
    out.data.K = d.at("K").get<int64_t>();
    out.data.split_ratio = d.at("split_ratio").get<double>();
    out.data.fps = d.at("fps").get<double>();
    out.data.actions = d.at("actions").get<std::vector<std::string>>();
    out.ids = m.at("ids").get<std::vector<std::string>>();
    out.train_ids = m.at("splits").at("train").get<std::vector<std::string>>();
    out.test_ids = m.at("splits").at("test").get<std::vector<std::string>>();
    out.vocab_words = m.at("vocab").get<std::vector<std::string>>();
    out.camera = camera_from_json(m.at("camera"));
    for (const auto& b : m.at("skeleton")) {
        out.skeleton.push_back({b.at(0).get<int64_t>(), b.at(1).get<int64_t>()});
    }
    for (const auto& [id, files] : m.at("hashes").items()) {
        std::vector<std::pair<std::string, std::string>> fh;
        for (const auto& [f, h] : files.items()) fh.emplace_back(f, h.get<std::string>());
        out.hashes.emplace_back(id, std::move(fh));
    }
    return out;
}

SampleRecord read_sample(const std::filesystem::path& root, const std::string& id,
                         const ShapeConfig& shapes) {
    std::filesystem::path dir = root / id;
    SampleRecord rec;
    rec.image = read_ppm(dir / "image.ppm");
    rec.video.frames = Tensor({shapes.N, shapes.H, shapes.W, 3});
    rec.masks.resize(static_cast<size_t>(shapes.N));
    for (int64_t n = 0; n < shapes.N; ++n) {
        Tensor frame = read_ppm(dir / "frames" / frame_name(n));
        if (frame.dim(0) != shapes.H || frame.dim(1) != shapes.W) {
            throw DataIntegrityError("frame size mismatch in sample " + id);
        }
        std::copy(frame.data(), frame.data() + frame.numel(),
                  rec.video.frames.data() + n * shapes.H * shapes.W * 3);
        int64_t mh = 0, mw = 0;
        rec.masks[static_cast<size_t>(n)] = read_pgm(dir / "masks" / mask_name(n), mh, mw);
        if (mh != shapes.H || mw != shapes.W) throw DataIntegrityError("mask size mismatch in sample " + id);
    }
    rec.hands.joints = load_tensor(dir / "hands.svt");
    rec.objects.points = load_tensor(dir / "objects.svt");
    json meta = json::parse(read_text_file(dir / "meta.json"));
    rec.meta.id = meta.at("id").get<std::string>();
    rec.meta.seed = meta.at("seed").get<uint64_t>();
    rec.meta.action = meta.at("action").get<std::string>();
    rec.meta.prompt = meta.at("prompt").get<std::string>();
    rec.meta.fps = meta.at("fps").get<double>();
    rec.meta.grasp_frame = meta.at("grasp_frame").get<int64_t>();
    rec.meta.units = meta.at("units").get<std::string>();
    rec.prompt = rec.meta.prompt;
    rec.video.fps = rec.meta.fps;
    rec.camera = camera_from_json(meta.at("camera"));
    return rec;
}

std::vector<SampleRecord> read_dataset(const std::filesystem::path& root) {
    DatasetManifest m = read_manifest(root);
    // integrity first: every listed file must exist and hash-match
    for (const auto& [id, files] : m.hashes) {
        for (const auto& [f, h] : files) {
            std::filesystem::path p = root / id / f;
            if (!std::filesystem::exists(p)) throw MissingArtifactError("dataset file missing: " + p.string());
            if (hex64(hash_file(p)) != h) {
                throw DataIntegrityError("content hash mismatch for " + p.string());
            }
        }
    }
    std::vector<SampleRecord> records;
    records.reserve(m.ids.size());
    for (const auto& id : m.ids) records.push_back(read_sample(root, id, m.shapes));
    return records;
}

uint64_t manifest_hash(const std::filesystem::path& root) {
    return hash_file(root / "manifest.json");
}

}  // namespace svimo
