#include "svimo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "svimo/errors.hpp"
#include "svimo/io.hpp"

using nlohmann::json;

namespace svimo {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void trace_push(Trace* trace, const char* op, const std::vector<int64_t>& shape) {
    if (trace != nullptr) trace->push_back({op, shape});
}

}  // namespace

Trainer::Trainer(RunConfig cfg, const PromptVocab& vocab, const CameraModel& camera)
    : cfg_(std::move(cfg)),
      vocab_(vocab),
      camera_(camera),
      sched_(cfg_.make_schedule()),
      warmup_opt_({cfg_.train.learning_rate, 0.9, 0.999, 1e-8, cfg_.train.lr_warmup_steps}),
      joint_opt_({cfg_.train.learning_rate, 0.9, 0.999, 1e-8, cfg_.train.lr_warmup_steps}),
      rng_data_(cfg_.seed, "data"),
      rng_t_(cfg_.seed, "diffusion-t"),
      rng_noise_(cfg_.seed, "diffusion-noise"),
      rng_sampling_(cfg_.seed, "sampling-noise") {
    cfg_.validate();
    RngStream init(cfg_.seed, "init");
    svimo_ = std::make_unique<SViMoModel>(cfg_.backbone_config(vocab_.size()), init);
    vid_ = std::make_unique<VidModel>(cfg_.vid_config(), init);
}

void Trainer::set_dataset(const std::vector<SampleRecord>& records) {
    samples_.clear();
    samples_.reserve(records.size());
    for (const auto& rec : records) {
        PreparedSample s;
        s.id = rec.meta.id;
        s.z0_v = encode(rec.video, cfg_.shapes).codes;
        VideoTensor motion_video =
            render_motion_video(rec.hands, rec.objects, rec.camera, cfg_.shapes.H, cfg_.shapes.W);
        s.z0_m = encode(motion_video, cfg_.shapes).codes;
        s.h0 = rec.hands.joints;
        s.o0 = rec.objects.points;
        s.image = rec.image;
        s.prompt_ids = vocab_.tokenize(rec.prompt, cfg_.shapes.L_text);
        samples_.push_back(std::move(s));
    }
}

const Trainer::PreparedSample& Trainer::draw_sample() {
    if (samples_.empty()) throw MissingArtifactError("trainer has no dataset");
    int64_t i = rng_data_.uniform_int(0, static_cast<int64_t>(samples_.size()) - 1);
    return samples_[static_cast<size_t>(i)];
}

Tensor Trainer::encode_guidance(const Tensor& hhat, const Tensor& ohat) const {
    HandTrajectory h{hhat};
    ObjectCloudSeq o{ohat};
    VideoTensor rendered = render_motion_video(h, o, camera_, cfg_.shapes.H, cfg_.shapes.W);
    return encode(rendered, cfg_.shapes).codes;
}

Tensor Trainer::image_latent(const Tensor& image, bool add_noise) {
    if (!add_noise || cfg_.train.image_noise_sigma == 0.0) {
        return encode_frame(image, cfg_.shapes).codes;
    }
    Tensor noised = image;
    for (int64_t i = 0; i < noised.numel(); ++i) {
        noised[i] += cfg_.train.image_noise_sigma * rng_data_.normal();
    }
    return encode_frame(noised, cfg_.shapes).codes;
}

void Trainer::check_finite(double v, const char* what, int64_t step) const {
    if (!std::isfinite(v)) {
        throw NumericalError(std::string(what) + " is not finite at step " + std::to_string(step) +
                             " (value " + std::to_string(v) + ")");
    }
}

StepMetrics Trainer::vid_warmup_step() {
    double t0 = now_ms();
    vid_->params().zero_grads();
    double loss_acc = 0.0;
    int64_t B = cfg_.train.batch_size;
    for (int64_t b = 0; b < B; ++b) {
        const PreparedSample& s = draw_sample();
        int64_t t = rng_t_.uniform_int(0, sched_.T - 1);
        Tensor z_t_v = forward_diffuse(s.z0_v, t, rng_noise_.normal_tensor(s.z0_v.shape()), sched_);
        Tensor z_t_m = forward_diffuse(s.z0_m, t, rng_noise_.normal_tensor(s.z0_m.shape()), sched_);
        Tensor h_t = forward_diffuse(s.h0, t, rng_noise_.normal_tensor(s.h0.shape()), sched_);
        Tensor o_t = forward_diffuse(s.o0, t, rng_noise_.normal_tensor(s.o0.shape()), sched_);
        Graph g;
        auto [hhat, ohat] = vid_->forward(g, h_t, o_t, g.leaf(z_t_v), g.leaf(z_t_m), t);
        Var loss = g.scale(vid_loss_g(g, hhat, ohat, s.h0, s.o0), 1.0 / static_cast<double>(B));
        check_finite(loss.val()[0], "warmup vid loss", warmup_steps_done_);
        loss_acc += loss.val()[0];
        g.backward(loss);
    }
    double gnorm = vid_->params().grad_norm();
    warmup_opt_.step({&vid_->params()});
    ++warmup_steps_done_;
    return {warmup_steps_done_, loss_acc, 0.0, loss_acc, gnorm, now_ms() - t0};
}

Trainer::JointGraphOut Trainer::build_joint_graph(Graph& g, const PreparedSample& s, int64_t t,
                                                  FeedbackMode mode, Trace* trace, StepDebug* debug) {
    trace_push(trace, "sample_t", {t});
    Tensor z_t_v = forward_diffuse(s.z0_v, t, rng_noise_.normal_tensor(s.z0_v.shape()), sched_);
    trace_push(trace, "diffuse_zV", z_t_v.shape());
    Tensor z_t_m = forward_diffuse(s.z0_m, t, rng_noise_.normal_tensor(s.z0_m.shape()), sched_);
    trace_push(trace, "diffuse_zM", z_t_m.shape());
    Tensor h_t = forward_diffuse(s.h0, t, rng_noise_.normal_tensor(s.h0.shape()), sched_);
    trace_push(trace, "diffuse_h", h_t.shape());
    Tensor o_t = forward_diffuse(s.o0, t, rng_noise_.normal_tensor(s.o0.shape()), sched_);
    trace_push(trace, "diffuse_o", o_t.shape());

    // interaction guidance from the no-grad VID pass on the noisy state
    Tensor guidance;
    Tensor hhat0_ng, ohat0_ng;
    {
        Graph ng;  // separate tape, never backpropagated
        auto [hhat, ohat] = vid_->forward(ng, h_t, o_t, ng.leaf(z_t_v), ng.leaf(z_t_m), t);
        hhat0_ng = hhat.val();
        ohat0_ng = ohat.val();
    }
    trace_push(trace, "vid_nograd", hhat0_ng.shape());
    if (mode == FeedbackMode::kFull || mode == FeedbackMode::kGuidanceOnly) {
        HandTrajectory ht{hhat0_ng};
        ObjectCloudSeq ot{ohat0_ng};
        VideoTensor rendered = render_motion_video(ht, ot, camera_, cfg_.shapes.H, cfg_.shapes.W);
        trace_push(trace, "render_guidance", rendered.frames.shape());
        guidance = encode(rendered, cfg_.shapes).codes;
        trace_push(trace, "encode_guidance", guidance.shape());
    } else {
        guidance = Tensor(s.z0_m.shape());  // zeros: guidance path disabled
        trace_push(trace, "zero_guidance", guidance.shape());
    }
    if (debug != nullptr) {
        debug->ts.push_back(t);
        debug->guidance.push_back(guidance);
        debug->hhat_nograd.push_back(hhat0_ng);
        debug->ohat_nograd.push_back(ohat0_ng);
    }

    Tensor z_i = image_latent(s.image, true);
    auto [zhat_v, zhat_m] = svimo_->forward(g, z_t_v, z_t_m, guidance, s.prompt_ids, z_i, t);
    trace_push(trace, "svimo_forward", zhat_v.val().shape());

    Var vid_in_v = zhat_v;
    Var vid_in_m = zhat_m;
    if (mode == FeedbackMode::kGuidanceOnly || mode == FeedbackMode::kNone) {
        vid_in_v = g.detach(zhat_v);  // cut the gradient-constraint path
        vid_in_m = g.detach(zhat_m);
    }
    auto [hhat, ohat] = vid_->forward(g, h_t, o_t, vid_in_v, vid_in_m, t);
    trace_push(trace, "vid_grad", hhat.val().shape());

    JointGraphOut out;
    out.loss_svimo = svimo_loss(g, zhat_v, zhat_m, s.z0_v, s.z0_m);
    out.loss_vid = vid_loss_g(g, hhat, ohat, s.h0, s.o0);
    trace_push(trace, "loss", {});
    return out;
}

StepMetrics Trainer::joint_train_step(Trace* trace, StepDebug* debug) {
    double t0 = now_ms();
    FeedbackMode mode = feedback_mode_from_string(cfg_.train.feedback_mode);
    svimo_->params().zero_grads();
    vid_->params().zero_grads();
    int64_t B = cfg_.train.batch_size;
    double l_total = 0.0, l_svimo = 0.0, l_vid = 0.0;
    for (int64_t b = 0; b < B; ++b) {
        const PreparedSample& s = draw_sample();
        int64_t t = rng_t_.uniform_int(0, sched_.T - 1);
        Graph g;
        JointGraphOut out = build_joint_graph(g, s, t, mode, trace, debug);
        double ls = out.loss_svimo.val()[0];
        double lv = out.loss_vid.val()[0];
        check_finite(ls, "SViMo loss", joint_steps_done_);
        check_finite(lv, "VID loss", joint_steps_done_);
        Var total = g.add(g.scale(out.loss_svimo, cfg_.train.omega1), g.scale(out.loss_vid, cfg_.train.omega2));
        Var scaled = g.scale(total, 1.0 / static_cast<double>(B));
        g.backward(scaled);
        l_svimo += ls / static_cast<double>(B);
        l_vid += lv / static_cast<double>(B);
        l_total += total.val()[0] / static_cast<double>(B);
    }
    double gnorm = std::sqrt(std::pow(svimo_->params().grad_norm(), 2) +
                             std::pow(vid_->params().grad_norm(), 2));
    check_finite(gnorm, "gradient norm", joint_steps_done_);
    joint_opt_.step({&svimo_->params(), &vid_->params()});
    trace_push(trace, "optimizer_step", {});
    ++joint_steps_done_;
    return {joint_steps_done_, l_total, l_svimo, l_vid, gnorm, now_ms() - t0};
}

double Trainer::probe_vid_gradient_into_svimo() {
    FeedbackMode mode = feedback_mode_from_string(cfg_.train.feedback_mode);
    svimo_->params().zero_grads();
    vid_->params().zero_grads();
    const PreparedSample& s = draw_sample();
    int64_t t = rng_t_.uniform_int(0, sched_.T - 1);
    Graph g;
    JointGraphOut out = build_joint_graph(g, s, t, mode, nullptr, nullptr);
    g.backward(g.scale(out.loss_vid, cfg_.train.omega2));
    double norm = svimo_->params().grad_norm();
    svimo_->params().zero_grads();
    vid_->params().zero_grads();
    return norm;
}

GenerationResult Trainer::generate(const Tensor& image, const std::string& prompt,
                                   int64_t inference_steps) {
    const ShapeConfig& sh = cfg_.shapes;
    FeedbackMode mode = feedback_mode_from_string(cfg_.train.feedback_mode);
    SubSchedule sub = subsample_schedule(sched_, inference_steps);
    std::vector<int64_t> prompt_ids = vocab_.tokenize(prompt, sh.L_text);
    Tensor z_i = encode_frame(image, sh).codes;

    std::vector<int64_t> lat_shape = {sh.lat_t(), sh.lat_h(), sh.lat_w(), sh.d_latent};
    Tensor z_v = rng_sampling_.normal_tensor(lat_shape);
    Tensor z_m = rng_sampling_.normal_tensor(lat_shape);
    Tensor h = rng_sampling_.normal_tensor({sh.N, cfg_.data.J, 3});
    Tensor o = rng_sampling_.normal_tensor({sh.N, cfg_.data.K, 3});

    auto step_once = [&](int64_t hi, int64_t lo, bool final_jump) {
        // VID (no grad) on the current noisy state -> guidance
        Tensor guidance(lat_shape);
        {
            Graph ng;
            auto [hh, oh] = vid_->forward(ng, h, o, ng.leaf(z_v), ng.leaf(z_m), hi);
            if (mode == FeedbackMode::kFull || mode == FeedbackMode::kGuidanceOnly) {
                guidance = encode_guidance(hh.val(), oh.val());
            }
        }
        Graph g;
        auto [zhat_v, zhat_m] = svimo_->forward(g, z_v, z_m, guidance, prompt_ids, z_i, hi);
        auto [hhat, ohat] = vid_->forward(g, h, o, zhat_v, zhat_m, hi);
        if (final_jump) {
            z_v = zhat_v.val();
            z_m = zhat_m.val();
            h = hhat.val();
            o = ohat.val();
            return;
        }
        // shared sigma^2, independent noise per stream
        z_v = posterior_sample_pair(z_v, zhat_v.val(), hi, lo, sched_,
                                    rng_sampling_.normal_tensor(z_v.shape()));
        z_m = posterior_sample_pair(z_m, zhat_m.val(), hi, lo, sched_,
                                    rng_sampling_.normal_tensor(z_m.shape()));
        h = posterior_sample_pair(h, hhat.val(), hi, lo, sched_, rng_sampling_.normal_tensor(h.shape()));
        o = posterior_sample_pair(o, ohat.val(), hi, lo, sched_, rng_sampling_.normal_tensor(o.shape()));
    };

    int64_t S = static_cast<int64_t>(sub.step_indices.size());
    if (S == 1) {
        step_once(sub.step_indices[0], 0, true);
    } else {
        for (int64_t j = S - 1; j >= 1; --j) {
            step_once(sub.step_indices[static_cast<size_t>(j)],
                      sub.step_indices[static_cast<size_t>(j - 1)], false);
        }
    }

    GenerationResult res;
    res.final_video_latent = z_v;
    res.video = decode(LatentVideo{z_v}, sh, true);
    res.video.fps = cfg_.data.fps;
    res.hands.joints = h;
    res.objects.points = o;
    res.rendered_motion = render_motion_video(res.hands, res.objects, camera_, sh.H, sh.W);
    for (const Tensor* t : {&res.video.frames, &h, &o}) {
        if (!t->all_finite()) throw NumericalError("generation produced non-finite values");
    }
    return res;
}

TrainEvalResult Trainer::evaluate_on_train(const std::vector<int64_t>& ts) {
    if (samples_.empty()) throw MissingArtifactError("trainer has no dataset");
    FeedbackMode mode = feedback_mode_from_string(cfg_.train.feedback_mode);
    RngStream eval_rng(cfg_.seed, "train-eval");
    TrainEvalResult res;
    int64_t count = 0;
    for (const PreparedSample& s : samples_) {
        for (int64_t t : ts) {
            Tensor z_t_v = forward_diffuse(s.z0_v, t, eval_rng.normal_tensor(s.z0_v.shape()), sched_);
            Tensor z_t_m = forward_diffuse(s.z0_m, t, eval_rng.normal_tensor(s.z0_m.shape()), sched_);
            Tensor h_t = forward_diffuse(s.h0, t, eval_rng.normal_tensor(s.h0.shape()), sched_);
            Tensor o_t = forward_diffuse(s.o0, t, eval_rng.normal_tensor(s.o0.shape()), sched_);
            Tensor guidance(s.z0_m.shape());
            {
                Graph ng;
                auto [hh, oh] = vid_->forward(ng, h_t, o_t, ng.leaf(z_t_v), ng.leaf(z_t_m), t);
                if (mode == FeedbackMode::kFull || mode == FeedbackMode::kGuidanceOnly) {
                    guidance = encode_guidance(hh.val(), oh.val());
                }
            }
            Tensor z_i = encode_frame(s.image, cfg_.shapes).codes;  // eval: no image noising
            Graph g;
            auto [zhat_v, zhat_m] = svimo_->forward(g, z_t_v, z_t_m, guidance, s.prompt_ids, z_i, t);
            auto [hhat, ohat] = vid_->forward(g, h_t, o_t, zhat_v, zhat_m, t);
            double mse = 0.0;
            const Tensor& zv = zhat_v.val();
            for (int64_t i = 0; i < zv.numel(); ++i) {
                double d = zv[i] - s.z0_v[i];
                mse += d * d;
            }
            res.video_latent_mse += mse / static_cast<double>(zv.numel());
            res.mpjpe += mpjpe(s.h0, hhat.val());
            int64_t k = s.o0.dim(1);
            double cham = 0.0;
            for (int64_t f = 0; f < cfg_.shapes.N; ++f) {
                Tensor a({k, 3}), b({k, 3});
                std::copy(s.o0.data() + f * k * 3, s.o0.data() + (f + 1) * k * 3, a.data());
                std::copy(ohat.val().data() + f * k * 3, ohat.val().data() + (f + 1) * k * 3, b.data());
                cham += chamfer(a, b);
            }
            res.object_chamfer += cham / static_cast<double>(cfg_.shapes.N);
            ++count;
        }
    }
    res.video_latent_mse /= static_cast<double>(count);
    res.mpjpe /= static_cast<double>(count);
    res.object_chamfer /= static_cast<double>(count);
    return res;
}

namespace {

constexpr char kCkptMagic[8] = {'S', 'V', 'C', 'K', '0', '0', '0', '1'};

void write_store(std::ostream& os, ParamStore& store) {
    store.for_each([&](Param& p) {
        for (const auto& [suffix, tensor] : std::initializer_list<std::pair<const char*, Tensor*>>{
                 {".value", &p.value}, {".m", &p.adam_m}, {".v", &p.adam_v}}) {
            std::string name = p.name + suffix;
            uint32_t len = static_cast<uint32_t>(name.size());
            os.write(reinterpret_cast<const char*>(&len), 4);
            os.write(name.data(), len);
            write_tensor(os, *tensor);
        }
    });
}

void read_store(std::istream& is, ParamStore& store, const std::string& what) {
    store.for_each([&](Param& p) {
        for (const auto& [suffix, tensor] : std::initializer_list<std::pair<const char*, Tensor*>>{
                 {".value", &p.value}, {".m", &p.adam_m}, {".v", &p.adam_v}}) {
            uint32_t len = 0;
            is.read(reinterpret_cast<char*>(&len), 4);
            if (!is.good() || len > 4096) throw DataIntegrityError("truncated checkpoint " + what);
            std::string name(len, '\0');
            is.read(name.data(), len);
            if (name != p.name + suffix) {
                throw DataIntegrityError("checkpoint tensor order mismatch: expected " + p.name + suffix +
                                         ", found " + name);
            }
            Tensor t = read_tensor(is, what);
            if (!t.same_shape(*tensor)) {
                throw DataIntegrityError("checkpoint shape mismatch for " + name + ": " + t.shape_str() +
                                         " vs " + tensor->shape_str());
            }
            *tensor = std::move(t);
        }
    });
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    json manifest;
    manifest["format_version"] = 1;
    manifest["svimo_arch"] = hex64(architecture_hash(svimo_->config()));
    manifest["vid_arch"] = hex64(architecture_hash(vid_->config()));
    manifest["config"] = cfg_.to_json_text();
    manifest["warmup_steps_done"] = warmup_steps_done_;
    manifest["joint_steps_done"] = joint_steps_done_;
    manifest["warmup_opt_steps"] = warmup_opt_.step_count();
    manifest["joint_opt_steps"] = joint_opt_.step_count();
    manifest["rng"] = {{"data", rng_data_.serialize()},
                       {"diffusion-t", rng_t_.serialize()},
                       {"diffusion-noise", rng_noise_.serialize()},
                       {"sampling-noise", rng_sampling_.serialize()}};
    std::string mtext = manifest.dump();

    std::ostringstream os(std::ios::binary);
    os.write(kCkptMagic, 8);
    uint64_t mlen = mtext.size();
    os.write(reinterpret_cast<const char*>(&mlen), 8);
    os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    write_store(os, svimo_->params());
    write_store(os, vid_->params());
    atomic_write_file(path, os.str());
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("checkpoint not found: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is.good() || std::memcmp(magic, kCkptMagic, 8) != 0) {
        throw DataIntegrityError("bad checkpoint magic in " + path.string());
    }
    uint64_t mlen = 0;
    is.read(reinterpret_cast<char*>(&mlen), 8);
    if (!is.good() || mlen > (1ull << 24)) throw DataIntegrityError("corrupt checkpoint manifest length");
    std::string mtext(mlen, '\0');
    is.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!is.good()) throw DataIntegrityError("truncated checkpoint manifest");
    json manifest = json::parse(mtext);
    std::string svimo_arch = manifest.at("svimo_arch").get<std::string>();
    std::string vid_arch = manifest.at("vid_arch").get<std::string>();
    if (svimo_arch != hex64(architecture_hash(svimo_->config()))) {
        throw DataIntegrityError("checkpoint architecture hash mismatch for the SViMo backbone (" +
                                 svimo_arch + " in file)");
    }
    if (vid_arch != hex64(architecture_hash(vid_->config()))) {
        throw DataIntegrityError("checkpoint architecture hash mismatch for the VID head (" + vid_arch +
                                 " in file)");
    }
    warmup_steps_done_ = manifest.at("warmup_steps_done").get<int64_t>();
    joint_steps_done_ = manifest.at("joint_steps_done").get<int64_t>();
    warmup_opt_.set_step_count(manifest.at("warmup_opt_steps").get<int64_t>());
    joint_opt_.set_step_count(manifest.at("joint_opt_steps").get<int64_t>());
    rng_data_.deserialize(manifest.at("rng").at("data").get<std::string>());
    rng_t_.deserialize(manifest.at("rng").at("diffusion-t").get<std::string>());
    rng_noise_.deserialize(manifest.at("rng").at("diffusion-noise").get<std::string>());
    rng_sampling_.deserialize(manifest.at("rng").at("sampling-noise").get<std::string>());
    read_store(is, svimo_->params(), path.string());
    read_store(is, vid_->params(), path.string());
    if (!is.good()) throw DataIntegrityError("truncated checkpoint payload in " + path.string());
}

}  // namespace svimo
