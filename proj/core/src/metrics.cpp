#include "svimo/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "svimo/dataset.hpp"
#include "svimo/errors.hpp"
#include "svimo/graph.hpp"
#include "svimo/io.hpp"
#include "svimo/nn.hpp"
#include "svimo/vid.hpp"

namespace svimo {

namespace {

constexpr int kGrid = 8;
constexpr int kOrientBins = 8;

Tensor frame_slice(const Tensor& video, int64_t n, int64_t h, int64_t w) {
    Tensor f({h, w, 3});
    std::copy(video.data() + n * h * w * 3, video.data() + (n + 1) * h * w * 3, f.data());
    return f;
}

std::vector<double> grayscale(const Tensor& frame) {
    int64_t h = frame.dim(0), w = frame.dim(1);
    std::vector<double> g(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h * w; ++i) {
        g[static_cast<size_t>(i)] = (frame[i * 3] + frame[i * 3 + 1] + frame[i * 3 + 2]) / 3.0;
    }
    return g;
}

double cosine(const Tensor& a, const Tensor& b) {
    double dot = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) dot += a[i] * b[i];
    return dot;  // features are unit-normalized (or zero)
}

}  // namespace

Tensor frame_feature(const Tensor& frame, const std::vector<uint8_t>& mask) {
    if (frame.rank() != 3 || frame.dim(2) != 3) throw ShapeError("frame_feature expects [H,W,3]");
    int64_t h = frame.dim(0), w = frame.dim(1);
    if (static_cast<int64_t>(mask.size()) != h * w) throw ShapeError("frame_feature: mask size mismatch");
    std::vector<double> gray = grayscale(frame);
    Tensor feat({kGrid * kGrid + kOrientBins});
    std::array<double, kGrid * kGrid> cell_sum{};
    std::array<int64_t, kGrid * kGrid> cell_cnt{};
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            if (!mask[static_cast<size_t>(y * w + x)]) continue;
            int64_t cy = y * kGrid / h, cx = x * kGrid / w;
            cell_sum[static_cast<size_t>(cy * kGrid + cx)] += gray[static_cast<size_t>(y * w + x)];
            cell_cnt[static_cast<size_t>(cy * kGrid + cx)] += 1;
        }
    for (int i = 0; i < kGrid * kGrid; ++i) {
        feat[i] = cell_cnt[static_cast<size_t>(i)] > 0
                      ? cell_sum[static_cast<size_t>(i)] / static_cast<double>(cell_cnt[static_cast<size_t>(i)])
                      : 0.0;
    }
    for (int64_t y = 1; y + 1 < h; ++y)
        for (int64_t x = 1; x + 1 < w; ++x) {
            if (!mask[static_cast<size_t>(y * w + x)]) continue;
            double gx = 0.5 * (gray[static_cast<size_t>(y * w + x + 1)] - gray[static_cast<size_t>(y * w + x - 1)]);
            double gy = 0.5 * (gray[static_cast<size_t>((y + 1) * w + x)] - gray[static_cast<size_t>((y - 1) * w + x)]);
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag < 1e-12) continue;
            double ang = std::atan2(gy, gx);  // [-pi, pi]
            int bin = static_cast<int>((ang + M_PI) / (2.0 * M_PI) * kOrientBins);
            bin = std::min(bin, kOrientBins - 1);
            feat[kGrid * kGrid + bin] += mag;
        }
    double norm = 0.0;
    for (int64_t i = 0; i < feat.numel(); ++i) norm += feat[i] * feat[i];
    norm = std::sqrt(norm);
    if (norm > 1e-12) {
        for (int64_t i = 0; i < feat.numel(); ++i) feat[i] /= norm;
    }
    return feat;
}

std::vector<std::vector<uint8_t>> derive_masks(const VideoTensor& video,
                                               const std::array<double, 3>& background,
                                               double threshold) {
    int64_t n = video.frames.dim(0), h = video.frames.dim(1), w = video.frames.dim(2);
    std::vector<std::vector<uint8_t>> masks(static_cast<size_t>(n),
                                            std::vector<uint8_t>(static_cast<size_t>(h * w), 0));
    for (int64_t f = 0; f < n; ++f) {
        const double* p = video.frames.data() + f * h * w * 3;
        for (int64_t i = 0; i < h * w; ++i) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                d = std::max(d, std::fabs(p[i * 3 + c] - background[static_cast<size_t>(c)]));
            }
            masks[static_cast<size_t>(f)][static_cast<size_t>(i)] = d > threshold ? 1 : 0;
        }
    }
    return masks;
}

namespace {

ConsistencyResult masked_consistency(const VideoTensor& video,
                                     const std::vector<std::vector<uint8_t>>& masks,
                                     const FrameFeatureFn& fx, bool complement) {
    int64_t n = video.frames.dim(0), h = video.frames.dim(1), w = video.frames.dim(2);
    if (n < 2) throw ShapeError("consistency metrics need N >= 2");
    if (static_cast<int64_t>(masks.size()) != n) throw ShapeError("consistency: one mask per frame required");
    FrameFeatureFn f = fx ? fx : FrameFeatureFn(frame_feature);
    ConsistencyResult res;
    std::vector<Tensor> feats;
    feats.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        std::vector<uint8_t> m = masks[static_cast<size_t>(i)];
        if (complement) {
            for (auto& v : m) v = v ? 0 : 1;
        }
        bool empty = std::none_of(m.begin(), m.end(), [](uint8_t v) { return v != 0; });
        if (empty) {
            res.empty_mask_fallback = true;
            std::fill(m.begin(), m.end(), static_cast<uint8_t>(1));
        }
        feats.push_back(f(frame_slice(video.frames, i, h, w), m));
    }
    double acc = 0.0;
    for (int64_t t = 1; t < n; ++t) {
        acc += 0.5 * (cosine(feats[0], feats[static_cast<size_t>(t)]) +
                      cosine(feats[static_cast<size_t>(t - 1)], feats[static_cast<size_t>(t)]));
    }
    res.value = acc / static_cast<double>(n - 1);
    return res;
}

}  // namespace

ConsistencyResult subject_consistency(const VideoTensor& video,
                                      const std::vector<std::vector<uint8_t>>& fg_masks,
                                      const FrameFeatureFn& fx) {
    return masked_consistency(video, fg_masks, fx, false);
}

ConsistencyResult background_consistency(const VideoTensor& video,
                                         const std::vector<std::vector<uint8_t>>& fg_masks,
                                         const FrameFeatureFn& fx) {
    return masked_consistency(video, fg_masks, fx, true);
}

SmoothnessResult temporal_smoothness(const VideoTensor& video) {
    int64_t n = video.frames.dim(0), h = video.frames.dim(1), w = video.frames.dim(2);
    SmoothnessResult res;
    if (n % 2 != 0) {
        n -= 1;
        res.trailing_frame_dropped = true;
    }
    if (n < 4) throw ShapeError("temporal_smoothness needs at least 4 frames");
    int64_t px = h * w * 3;
    auto frame = [&](int64_t i) { return video.frames.data() + i * px; };
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t i = 0; i < n; i += 2) {  // reconstruct even 0-based (odd 1-based) frames
        double mae = 0.0;
        const double* target = frame(i);
        if (i == 0) {
            const double* nb = frame(1);
            for (int64_t k = 0; k < px; ++k) mae += std::fabs(target[k] - nb[k]);
        } else {
            const double* a = frame(i - 1);
            const double* b = frame(i + 1);
            for (int64_t k = 0; k < px; ++k) mae += std::fabs(target[k] - 0.5 * (a[k] + b[k]));
        }
        mae = mae / static_cast<double>(px) * 255.0;
        acc += (255.0 - mae) / 255.0;
        ++count;
    }
    res.value = acc / static_cast<double>(count);
    return res;
}

double video_dynamic_score(const VideoTensor& video) {
    int64_t n = video.frames.dim(0), h = video.frames.dim(1), w = video.frames.dim(2);
    if (n < 2) throw ShapeError("dynamic score needs N >= 2");
    constexpr int kBlock = 4;
    constexpr int kRadius = 3;
    // candidate displacements ordered so ties resolve to the smallest one
    static const std::vector<std::array<int, 2>> kCandidates = [] {
        std::vector<std::array<int, 2>> c;
        for (int dy = -kRadius; dy <= kRadius; ++dy)
            for (int dx = -kRadius; dx <= kRadius; ++dx) c.push_back({dy, dx});
        std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) {
            int na = a[0] * a[0] + a[1] * a[1], nb = b[0] * b[0] + b[1] * b[1];
            if (na != nb) return na < nb;
            return a < b;
        });
        return c;
    }();
    std::vector<double> magnitudes;
    magnitudes.reserve(static_cast<size_t>((n - 1) * h * w));
    std::vector<double> prev, cur;
    for (int64_t f = 0; f + 1 < n; ++f) {
        prev = grayscale(frame_slice(video.frames, f, h, w));
        cur = grayscale(frame_slice(video.frames, f + 1, h, w));
        // brightness invariance: match on mean-subtracted frames
        for (auto* v : {&prev, &cur}) {
            double m = 0.0;
            for (double x : *v) m += x;
            m /= static_cast<double>(v->size());
            for (double& x : *v) x -= m;
        }
        for (int64_t by = 0; by < h; by += kBlock)
            for (int64_t bx = 0; bx < w; bx += kBlock) {
                int64_t bh = std::min<int64_t>(kBlock, h - by);
                int64_t bw = std::min<int64_t>(kBlock, w - bx);
                double best_sad = 0.0;
                std::array<int, 2> best{0, 0};
                bool first = true;
                for (const auto& cand : kCandidates) {
                    int64_t sy = by + cand[0], sx = bx + cand[1];
                    if (sy < 0 || sx < 0 || sy + bh > h || sx + bw > w) continue;
                    double sad = 0.0;
                    for (int64_t y = 0; y < bh; ++y)
                        for (int64_t x = 0; x < bw; ++x) {
                            sad += std::fabs(cur[static_cast<size_t>((by + y) * w + bx + x)] -
                                             prev[static_cast<size_t>((sy + y) * w + sx + x)]);
                        }
                    if (first || sad < best_sad) {
                        best_sad = sad;
                        best = cand;
                        first = false;
                    }
                }
                double mag = std::sqrt(static_cast<double>(best[0] * best[0] + best[1] * best[1]));
                for (int64_t i = 0; i < bh * bw; ++i) magnitudes.push_back(mag);
            }
    }
    std::sort(magnitudes.begin(), magnitudes.end(), std::greater<double>());
    size_t top = std::max<size_t>(1, magnitudes.size() / 20);
    double s = 0.0;
    for (size_t i = 0; i < top; ++i) s += magnitudes[i];
    return s / static_cast<double>(top);
}

double dynamic_degree(const std::vector<VideoTensor>& videos, double tau_op) {
    if (videos.empty()) throw ShapeError("dynamic_degree: empty video set");
    int64_t dynamic = 0;
    for (const auto& v : videos) {
        if (video_dynamic_score(v) > tau_op) ++dynamic;
    }
    return static_cast<double>(dynamic) / static_cast<double>(videos.size());
}

double overall_score(double subj, double bkg, double tsmoo, double dyn) {
    return subj * bkg * tsmoo * dyn;
}

double mpjpe(const Tensor& h, const Tensor& hhat) {
    check_same_shape(h, hhat, "mpjpe");
    if (h.rank() != 3 || h.dim(2) != 3) throw ShapeError("mpjpe expects [N,J,3]");
    int64_t nj = h.dim(0) * h.dim(1);
    double acc = 0.0;
    for (int64_t i = 0; i < nj; ++i) {
        double d0 = h[i * 3] - hhat[i * 3];
        double d1 = h[i * 3 + 1] - hhat[i * 3 + 1];
        double d2 = h[i * 3 + 2] - hhat[i * 3 + 2];
        acc += std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
    }
    return acc / static_cast<double>(nj);
}

double motion_smoothness(const Tensor& hhat) {
    if (hhat.rank() != 3 || hhat.dim(2) != 3) throw ShapeError("motion_smoothness expects [N,J,3]");
    int64_t n = hhat.dim(0), j = hhat.dim(1);
    if (n < 3) throw ShapeError("motion_smoothness needs N >= 3");
    double acc = 0.0;
    for (int64_t f = 1; f + 1 < n; ++f)
        for (int64_t k = 0; k < j; ++k) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) {
                double dd = hhat[((f + 1) * j + k) * 3 + c] - 2.0 * hhat[(f * j + k) * 3 + c] +
                            hhat[((f - 1) * j + k) * 3 + c];
                s += dd * dd;
            }
            acc += std::sqrt(s);
        }
    return acc / static_cast<double>((n - 2) * j);
}

double fid_from_features(const Tensor& real_feats, const Tensor& gen_feats, bool* regularized) {
    if (real_feats.rank() != 2 || gen_feats.rank() != 2 || real_feats.dim(1) != gen_feats.dim(1)) {
        throw ShapeError("fid: feature matrices must be [n,d] with matching d");
    }
    int64_t d = real_feats.dim(1);
    if (real_feats.dim(0) < 2 || gen_feats.dim(0) < 2) throw ShapeError("fid: need at least 2 samples per set");
    using Mat = Eigen::MatrixXd;
    using Vec = Eigen::VectorXd;
    auto stats = [&](const Tensor& f, Vec& mu, Mat& sigma) {
        int64_t n = f.dim(0);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
            f.data(), n, d);
        mu = X.colwise().mean();
        Mat centered = X.rowwise() - mu.transpose();
        sigma = centered.transpose() * centered / static_cast<double>(n - 1);
    };
    Vec mu_r, mu_g;
    Mat sig_r, sig_g;
    stats(real_feats, mu_r, sig_r);
    stats(gen_feats, mu_g, sig_g);

    bool reg = false;
    auto maybe_regularize = [&](Mat& s) {
        Eigen::SelfAdjointEigenSolver<Mat> es(s);
        if (es.eigenvalues().minCoeff() < 1e-10) {
            s += 1e-6 * Mat::Identity(d, d);
            reg = true;
        }
    };
    maybe_regularize(sig_r);
    maybe_regularize(sig_g);
    if (regularized != nullptr) *regularized = reg;

    // tr sqrt(Sr Sg) = tr sqrt(B Sg B) with B = sqrt(Sr); eigenvalues clipped at 0
    Eigen::SelfAdjointEigenSolver<Mat> es_r(sig_r);
    Vec ev = es_r.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Mat b = es_r.eigenvectors() * ev.asDiagonal() * es_r.eigenvectors().transpose();
    Mat inner = b * sig_g * b;
    Eigen::SelfAdjointEigenSolver<Mat> es_c(inner);
    double tr_sqrt = es_c.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    double mean_term = (mu_r - mu_g).squaredNorm();
    return mean_term + sig_r.trace() + sig_g.trace() - 2.0 * tr_sqrt;
}

Tensor flatten_motion(const HandTrajectory& h, const ObjectCloudSeq& o) {
    Tensor out({h.joints.numel() + o.points.numel()});
    std::copy(h.joints.data(), h.joints.data() + h.joints.numel(), out.data());
    std::copy(o.points.data(), o.points.data() + o.points.numel(), out.data() + h.joints.numel());
    return out;
}

MotionAutoencoder::MotionAutoencoder(int64_t input_dim, int64_t bottleneck, RngStream& init_rng)
    : input_dim_(input_dim), bottleneck_(bottleneck), store_("motion_ae") {
    const int64_t hidden = 128;
    double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    double s3 = 1.0 / std::sqrt(static_cast<double>(bottleneck));
    init_normal(store_.create("enc1.weight", {input_dim, hidden}), init_rng, s1);
    store_.create("enc1.bias", {hidden});
    init_normal(store_.create("enc2.weight", {hidden, bottleneck}), init_rng, s2);
    store_.create("enc2.bias", {bottleneck});
    init_normal(store_.create("dec1.weight", {bottleneck, hidden}), init_rng, s3);
    store_.create("dec1.bias", {hidden});
    init_normal(store_.create("dec2.weight", {hidden, input_dim}), init_rng, s2);
    store_.create("dec2.bias", {input_dim});
}

namespace {

Var ae_forward(Graph& g, ParamStore& store, Var x, bool to_code) {
    Var h1 = g.gelu(g.row_add(g.matmul(x, g.use(store.get("enc1.weight"))), g.use(store.get("enc1.bias"))));
    Var code = g.row_add(g.matmul(h1, g.use(store.get("enc2.weight"))), g.use(store.get("enc2.bias")));
    if (to_code) return code;
    Var h2 = g.gelu(g.row_add(g.matmul(code, g.use(store.get("dec1.weight"))), g.use(store.get("dec1.bias"))));
    return g.row_add(g.matmul(h2, g.use(store.get("dec2.weight"))), g.use(store.get("dec2.bias")));
}

}  // namespace

double MotionAutoencoder::train(const std::vector<Tensor>& motions, int64_t max_steps, double lr,
                                double target_mse) {
    if (motions.size() < 2) throw ConfigError("motion autoencoder: need at least 2 motions");
    Tensor batch({static_cast<int64_t>(motions.size()), input_dim_});
    for (size_t i = 0; i < motions.size(); ++i) {
        if (motions[i].numel() != input_dim_) throw ShapeError("motion autoencoder: input length mismatch");
        std::copy(motions[i].data(), motions[i].data() + input_dim_,
                  batch.data() + static_cast<int64_t>(i) * input_dim_);
    }
    AdamOptimizer opt({lr, 0.9, 0.999, 1e-8, 0});
    double last = 0.0;
    for (int64_t s = 0; s < max_steps; ++s) {
        store_.zero_grads();
        Graph g;
        Var x = g.leaf(batch);
        Var rec = ae_forward(g, store_, x, false);
        Var loss = g.mse(rec, x);
        last = loss.val()[0];
        if (last < target_mse && s > 0) return last;
        g.backward(loss);
        opt.step({&store_});
    }
    {
        Graph g;
        last = g.mse(ae_forward(g, store_, g.leaf(batch), false), g.leaf(batch)).val()[0];
    }
    if (last >= target_mse) {
        throw NumericalError("motion autoencoder failed to reach MSE " + std::to_string(target_mse) +
                             " within " + std::to_string(max_steps) + " steps (got " +
                             std::to_string(last) + ")");
    }
    return last;
}

Tensor MotionAutoencoder::encode(const Tensor& flat_motion) const {
    auto& self = const_cast<MotionAutoencoder&>(*this);
    Graph g;
    Var code = ae_forward(g, self.store_, g.leaf(flat_motion.reshaped({1, input_dim_})), true);
    return code.val().reshaped({bottleneck_});
}

double MotionAutoencoder::reconstruction_mse(const Tensor& flat_motion) const {
    auto& self = const_cast<MotionAutoencoder&>(*this);
    Graph g;
    Var x = g.leaf(flat_motion.reshaped({1, input_dim_}));
    return g.mse(ae_forward(g, self.store_, x, false), x).val()[0];
}

void MotionAutoencoder::save(const std::filesystem::path& path) const {
    std::ostringstream os(std::ios::binary);
    const_cast<ParamStore&>(store_).for_each([&](Param& p) {
        uint32_t len = static_cast<uint32_t>(p.name.size());
        os.write(reinterpret_cast<const char*>(&len), 4);
        os.write(p.name.data(), len);
        write_tensor(os, p.value);
    });
    atomic_write_file(path, os.str());
}

void MotionAutoencoder::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("cannot open autoencoder checkpoint " + path.string());
    store_.for_each([&](Param& p) {
        uint32_t len = 0;
        is.read(reinterpret_cast<char*>(&len), 4);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (name != p.name) throw DataIntegrityError("autoencoder checkpoint name mismatch: " + name);
        Tensor t = read_tensor(is, path.string());
        if (!t.same_shape(p.value)) throw DataIntegrityError("autoencoder checkpoint shape mismatch");
        p.value = std::move(t);
    });
}

MetricsReport evaluate_generation(const std::vector<SampleRecord>& reference,
                                  const std::vector<GeneratedSample>& generated, double tau_op,
                                  double bg_threshold, uint64_t fid_seed, int64_t fid_steps,
                                  double fid_lr) {
    if (generated.empty()) throw ShapeError("evaluate_generation: no generated samples");
    auto find_ref = [&](const std::string& id) -> const SampleRecord& {
        for (const auto& r : reference) {
            if (r.meta.id == id) return r;
        }
        throw MissingArtifactError("no reference sample with id " + id);
    };
    MetricsReport rep;
    const SceneStyle& style = scene_style();
    std::vector<VideoTensor> videos;
    double subj_acc = 0, bkg_acc = 0, tsmoo_acc = 0, mpjpe_acc = 0, msmoo_acc = 0, cham_acc = 0;
    for (const auto& gen : generated) {
        const SampleRecord& ref = find_ref(gen.id);
        MetricsReport::PerSample ps;
        ps.id = gen.id;
        auto masks = derive_masks(gen.video, style.video_background, bg_threshold);
        auto subj = subject_consistency(gen.video, masks);
        auto bkg = background_consistency(gen.video, masks);
        rep.empty_mask_fallback |= subj.empty_mask_fallback || bkg.empty_mask_fallback;
        if (subj.value < 0.0 || bkg.value < 0.0) rep.negative_consistency_clamped = true;
        ps.subj = std::min(1.0, std::max(0.0, subj.value));
        ps.bkg = std::min(1.0, std::max(0.0, bkg.value));
        auto ts = temporal_smoothness(gen.video);
        rep.trailing_frame_dropped |= ts.trailing_frame_dropped;
        ps.tsmoo = ts.value;
        ps.dyn_score = video_dynamic_score(gen.video);
        ps.mpjpe = mpjpe(ref.hands.joints, gen.hands.joints);
        ps.msmoo = motion_smoothness(gen.hands.joints);
        int64_t n = ref.objects.points.dim(0), k = ref.objects.points.dim(1);
        double cham = 0.0;
        for (int64_t f = 0; f < n; ++f) {
            Tensor a({k, 3}), b({k, 3});
            std::copy(ref.objects.points.data() + f * k * 3, ref.objects.points.data() + (f + 1) * k * 3, a.data());
            std::copy(gen.objects.points.data() + f * k * 3, gen.objects.points.data() + (f + 1) * k * 3, b.data());
            cham += chamfer(a, b);
        }
        ps.chamfer = cham / static_cast<double>(n);
        videos.push_back(gen.video);
        subj_acc += ps.subj;
        bkg_acc += ps.bkg;
        tsmoo_acc += ps.tsmoo;
        mpjpe_acc += ps.mpjpe;
        msmoo_acc += ps.msmoo;
        cham_acc += ps.chamfer;
        rep.samples.push_back(std::move(ps));
    }
    double cnt = static_cast<double>(generated.size());
    rep.subj = subj_acc / cnt;
    rep.bkg = bkg_acc / cnt;
    rep.tsmoo = tsmoo_acc / cnt;
    rep.dyn = dynamic_degree(videos, tau_op);
    rep.overall = overall_score(rep.subj, rep.bkg, rep.tsmoo, rep.dyn);
    rep.mpjpe = mpjpe_acc / cnt;
    rep.msmoo = msmoo_acc / cnt;
    rep.chamfer = cham_acc / cnt;

    std::vector<Tensor> ref_motions;
    for (const auto& r : reference) ref_motions.push_back(flatten_motion(r.hands, r.objects));
    RngStream ae_rng(fid_seed, "fid-autoencoder");
    MotionAutoencoder ae(ref_motions[0].numel(), 64, ae_rng);
    ae.train(ref_motions, fid_steps, fid_lr, 1e-2);
    auto embed = [&](const std::vector<Tensor>& motions) {
        Tensor feats({static_cast<int64_t>(motions.size()), ae.bottleneck()});
        for (size_t i = 0; i < motions.size(); ++i) {
            Tensor c = ae.encode(motions[i]);
            std::copy(c.data(), c.data() + c.numel(), feats.data() + static_cast<int64_t>(i) * ae.bottleneck());
        }
        return feats;
    };
    std::vector<Tensor> gen_motions;
    for (const auto& gen : generated) gen_motions.push_back(flatten_motion(gen.hands, gen.objects));
    rep.fid = fid_from_features(embed(ref_motions), embed(gen_motions), &rep.fid_regularized);
    return rep;
}

}  // namespace svimo
