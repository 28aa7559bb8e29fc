#include "svimo/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "svimo/errors.hpp"
#include "svimo/io.hpp"
#include "svimo/metrics.hpp"
#include "svimo/trainer.hpp"

using nlohmann::json;

namespace svimo {

namespace {

void write_run_provenance(const std::filesystem::path& out_dir, const RunConfig& cfg,
                          const std::string& command, const json& input_hashes) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "resolved_config.json", cfg.to_json_text());
    json p;
    p["command"] = command;
    p["seed"] = cfg.seed;
    p["input_hashes"] = input_hashes;
    write_text_file(out_dir / "provenance.json", p.dump(2) + "\n");
}

std::string frame_name(int64_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03lld.ppm", static_cast<long long>(n));
    return buf;
}

class MetricsLog {
public:
    explicit MetricsLog(const std::filesystem::path& path) : os_(path, std::ios::trunc) {
        if (!os_) throw MissingArtifactError("cannot open log " + path.string());
    }
    void record(const char* phase, const StepMetrics& m) {
        json j;
        j["phase"] = phase;
        j["step"] = m.step;
        j["loss"] = m.loss;
        j["loss_svimo"] = m.loss_svimo;
        j["loss_vid"] = m.loss_vid;
        j["grad_norm"] = m.grad_norm;
        j["ms"] = m.millis;
        os_ << j.dump() << "\n";
        os_.flush();
    }

private:
    std::ofstream os_;
};

Trainer make_trainer(const RunConfig& cfg) {
    CameraModel cam = default_camera(scene_style().bounds, cfg.shapes.H, cfg.shapes.W);
    return Trainer(cfg, PromptVocab::grammar_vocab(), cam);
}

std::vector<SampleRecord> load_train_records(const RunConfig& cfg,
                                             const std::filesystem::path& data_dir) {
    DatasetManifest m = read_manifest(data_dir);
    if (m.shapes.N != cfg.shapes.N || m.shapes.H != cfg.shapes.H || m.shapes.W != cfg.shapes.W) {
        throw ConfigError("dataset shapes do not match the run config");
    }
    std::vector<SampleRecord> records;
    for (const auto& id : m.train_ids) records.push_back(read_sample(data_dir, id, m.shapes));
    if (records.empty()) throw DataIntegrityError("dataset has an empty train split");
    return records;
}

}  // namespace

int cmd_datagen(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::vector<SampleRecord> records;
    for (int64_t i = 0; i < cfg.data.num_samples; ++i) {
        uint64_t sample_seed = fnv1a64(&i, sizeof(i), cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        SampleRecord rec = generate_sample(sample_seed, cfg.shapes, cfg.data);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%04lld", static_cast<long long>(i));
        rec.meta.id = buf;
        records.push_back(std::move(rec));
    }
    write_dataset(records, out_dir, cfg.shapes, cfg.data, cfg.seed);
    write_run_provenance(out_dir, cfg, "datagen", json::object());
    DatasetManifest m = read_manifest(out_dir);
    std::cout << "samples: " << records.size() << "\n"
              << "train: " << m.train_ids.size() << "\n"
              << "test: " << m.test_ids.size() << "\n"
              << "manifest_hash: " << hex64(manifest_hash(out_dir)) << "\n";
    return kExitOk;
}

int cmd_warmup(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir) {
    auto records = load_train_records(cfg, data_dir);
    Trainer trainer = make_trainer(cfg);
    trainer.set_dataset(records);
    json hashes;
    hashes["dataset_manifest"] = hex64(manifest_hash(data_dir));
    write_run_provenance(out_dir, cfg, "warmup", hashes);
    MetricsLog log(out_dir / "metrics.log");
    for (int64_t s = 0; s < cfg.train.warmup_steps; ++s) {
        StepMetrics m = trainer.vid_warmup_step();
        log.record("warmup", m);
        if (m.step % 50 == 0 || m.step == 1) {
            std::cout << "warmup step " << m.step << " loss " << m.loss << "\n";
        }
    }
    trainer.save_checkpoint(out_dir / "vid_warmup.svck");
    std::cout << "checkpoint: " << (out_dir / "vid_warmup.svck").string() << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
              const std::filesystem::path& vid_ckpt, const std::filesystem::path& out_dir) {
    auto records = load_train_records(cfg, data_dir);
    Trainer trainer = make_trainer(cfg);
    trainer.set_dataset(records);
    trainer.load_checkpoint(vid_ckpt);
    json hashes;
    hashes["dataset_manifest"] = hex64(manifest_hash(data_dir));
    hashes["vid_checkpoint"] = hex64(hash_file(vid_ckpt));
    write_run_provenance(out_dir, cfg, "train", hashes);
    MetricsLog log(out_dir / "metrics.log");
    for (int64_t s = 0; s < cfg.train.total_steps; ++s) {
        StepMetrics m = trainer.joint_train_step();
        log.record("joint", m);
        if (m.step % 50 == 0 || m.step == 1) {
            std::cout << "joint step " << m.step << " loss " << m.loss << " (svimo " << m.loss_svimo
                      << ", vid " << m.loss_vid << ")\n";
        }
        if (cfg.train.checkpoint_every > 0 && m.step % cfg.train.checkpoint_every == 0) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "ckpt_%06lld.svck", static_cast<long long>(m.step));
            trainer.save_checkpoint(out_dir / buf);
        }
    }
    trainer.save_checkpoint(out_dir / "ckpt_final.svck");
    std::cout << "checkpoint: " << (out_dir / "ckpt_final.svck").string() << "\n";
    return kExitOk;
}

int cmd_sample(const RunConfig& cfg, const std::filesystem::path& ckpt,
               const std::filesystem::path& image_path, const std::string& prompt,
               const std::filesystem::path& out_dir, const std::string& sample_id) {
    Trainer trainer = make_trainer(cfg);
    trainer.load_checkpoint(ckpt);
    Tensor image = read_ppm(image_path);
    GenerationResult gen = trainer.generate(image, prompt, cfg.schedule.inference_steps);
    json hashes;
    hashes["checkpoint"] = hex64(hash_file(ckpt));
    hashes["image"] = hex64(hash_file(image_path));
    write_run_provenance(out_dir, cfg, "sample", hashes);

    const ShapeConfig& sh = cfg.shapes;
    std::filesystem::create_directories(out_dir / "frames");
    std::filesystem::create_directories(out_dir / "motion_frames");
    for (int64_t n = 0; n < sh.N; ++n) {
        Tensor frame({sh.H, sh.W, 3});
        std::copy(gen.video.frames.data() + n * sh.H * sh.W * 3,
                  gen.video.frames.data() + (n + 1) * sh.H * sh.W * 3, frame.data());
        write_ppm(out_dir / "frames" / frame_name(n), frame);
        std::copy(gen.rendered_motion.frames.data() + n * sh.H * sh.W * 3,
                  gen.rendered_motion.frames.data() + (n + 1) * sh.H * sh.W * 3, frame.data());
        write_ppm(out_dir / "motion_frames" / frame_name(n), frame);
    }
    save_tensor(out_dir / "hands.svt", gen.hands.joints);
    save_tensor(out_dir / "objects.svt", gen.objects.points);
    save_tensor(out_dir / "video_latent.svt", gen.final_video_latent);
    json meta;
    meta["id"] = sample_id;
    meta["prompt"] = prompt;
    meta["inference_steps"] = cfg.schedule.inference_steps;
    meta["seed"] = cfg.seed;
    meta["J"] = cfg.data.J;
    meta["K"] = cfg.data.K;
    meta["fps"] = cfg.data.fps;
    write_text_file(out_dir / "meta.json", meta.dump(2) + "\n");
    std::cout << "wrote " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& real_dir,
             const std::filesystem::path& gen_dir, const std::filesystem::path& out_path) {
    DatasetManifest m = read_manifest(real_dir);
    std::vector<SampleRecord> reference;
    for (const auto& id : m.ids) reference.push_back(read_sample(real_dir, id, m.shapes));

    std::vector<GeneratedSample> generated;
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(gen_dir)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "meta.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        json meta = json::parse(read_text_file(dir / "meta.json"));
        GeneratedSample gs;
        gs.id = meta.at("id").get<std::string>();
        gs.video.frames = Tensor({m.shapes.N, m.shapes.H, m.shapes.W, 3});
        for (int64_t n = 0; n < m.shapes.N; ++n) {
            Tensor frame = read_ppm(dir / "frames" / frame_name(n));
            std::copy(frame.data(), frame.data() + frame.numel(),
                      gs.video.frames.data() + n * m.shapes.H * m.shapes.W * 3);
        }
        gs.hands.joints = load_tensor(dir / "hands.svt");
        gs.objects.points = load_tensor(dir / "objects.svt");
        generated.push_back(std::move(gs));
    }
    if (generated.empty()) throw MissingArtifactError("no generated samples found in " + gen_dir.string());

    MetricsReport rep = evaluate_generation(reference, generated, cfg.metrics.tau_op,
                                            cfg.metrics.bg_threshold, cfg.seed,
                                            cfg.metrics.fid_ae_steps, cfg.metrics.fid_ae_lr);
    json out;
    out["aggregate"] = {{"subj", rep.subj},       {"bkg", rep.bkg},   {"tsmoo", rep.tsmoo},
                        {"dyn", rep.dyn},         {"overall", rep.overall}, {"mpjpe", rep.mpjpe},
                        {"msmoo", rep.msmoo},     {"chamfer", rep.chamfer}, {"fid", rep.fid}};
    out["flags"] = {{"negative_consistency_clamped", rep.negative_consistency_clamped},
                    {"empty_mask_fallback", rep.empty_mask_fallback},
                    {"trailing_frame_dropped", rep.trailing_frame_dropped},
                    {"fid_regularized", rep.fid_regularized}};
    json per = json::array();
    for (const auto& s : rep.samples) {
        per.push_back({{"id", s.id}, {"subj", s.subj}, {"bkg", s.bkg}, {"tsmoo", s.tsmoo},
                       {"dyn_score", s.dyn_score}, {"mpjpe", s.mpjpe}, {"msmoo", s.msmoo},
                       {"chamfer", s.chamfer}});
    }
    out["per_sample"] = per;
    write_text_file(out_path, out.dump(2) + "\n");

    std::printf("%-10s %8s %8s %8s %8s %8s\n", "sample", "subj", "bkg", "tsmoo", "mpjpe", "chamfer");
    for (const auto& s : rep.samples) {
        std::printf("%-10s %8.4f %8.4f %8.4f %8.4f %8.4f\n", s.id.c_str(), s.subj, s.bkg, s.tsmoo,
                    s.mpjpe, s.chamfer);
    }
    std::printf("overall: subj %.4f  bkg %.4f  tsmoo %.4f  dyn %.4f  -> %.4f\n", rep.subj, rep.bkg,
                rep.tsmoo, rep.dyn, rep.overall);
    std::printf("motion:  mpjpe %.4f  msmoo %.4f  chamfer %.4f  fid %.4f\n", rep.mpjpe, rep.msmoo,
                rep.chamfer, rep.fid);
    return kExitOk;
}

int cmd_token_budget(const RunConfig& cfg) {
    TokenBudget b = token_budget(cfg.shapes);
    std::printf("%-8s %8s\n", "stream", "tokens");
    std::printf("%-8s %8lld\n", "text", static_cast<long long>(b.text));
    std::printf("%-8s %8lld\n", "video", static_cast<long long>(b.video));
    std::printf("%-8s %8lld\n", "motion", static_cast<long long>(b.motion));
    std::printf("%-8s %8lld\n", "total", static_cast<long long>(b.total));
    std::printf("latent grid: [%lld, %lld, %lld]\n", static_cast<long long>(cfg.shapes.lat_t()),
                static_cast<long long>(cfg.shapes.lat_h()), static_cast<long long>(cfg.shapes.lat_w()));
    return kExitOk;
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataIntegrityError& e) {
        std::cerr << "data integrity error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace svimo
