#include "svimo/config.hpp"

#include <nlohmann/json.hpp>
#include <set>

#include "svimo/errors.hpp"
#include "svimo/io.hpp"

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace svimo {

FeedbackMode feedback_mode_from_string(const std::string& s) {
    if (s == "full") return FeedbackMode::kFull;
    if (s == "guidance_only") return FeedbackMode::kGuidanceOnly;
    if (s == "gradient_only") return FeedbackMode::kGradientOnly;
    if (s == "none") return FeedbackMode::kNone;
    throw ConfigError("unknown feedback_mode '" + s +
                      "' (expected full|guidance_only|gradient_only|none)");
}

std::string to_string(FeedbackMode m) {
    switch (m) {
        case FeedbackMode::kFull: return "full";
        case FeedbackMode::kGuidanceOnly: return "guidance_only";
        case FeedbackMode::kGradientOnly: return "gradient_only";
        case FeedbackMode::kNone: return "none";
    }
    return "full";
}

void RunConfig::validate() const {
    if (format_version != 1) throw ConfigError("config: unsupported format_version");
    shapes.validate();
    data.validate();
    if (schedule.T < 1) throw ConfigError("schedule: T must be >= 1");
    if (!(schedule.beta_start > 0.0 && schedule.beta_start <= schedule.beta_end && schedule.beta_end < 1.0)) {
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
    }
    schedule_kind_from_string(schedule.kind);
    if (schedule.inference_steps < 1 || schedule.inference_steps > schedule.T) {
        throw ConfigError("schedule: inference_steps must be in [1, T]");
    }
    feedback_mode_from_string(train.feedback_mode);
    if (!(train.omega1 >= 0.0 && train.omega2 >= 0.0)) throw ConfigError("train: omega weights must be >= 0");
    if (train.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (train.warmup_steps < 0 || train.total_steps < 0) throw ConfigError("train: step counts must be >= 0");
    if (!(train.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (train.image_noise_sigma < 0.0) throw ConfigError("train: image_noise_sigma must be >= 0");
    if (codec.mode != "lossless" && codec.mode != "learned") {
        throw ConfigError("codec: mode must be lossless or learned");
    }
    if (!(metrics.bg_threshold > 0.0)) throw ConfigError("metrics: bg_threshold must be positive");
    backbone_config(1).validate();
    vid_config().validate();
}

BackboneConfig RunConfig::backbone_config(int64_t vocab_size) const {
    BackboneConfig cfg;
    cfg.shapes = shapes;
    cfg.n_blocks = model.n_blocks;
    cfg.heads = model.heads;
    cfg.d_time = model.d_time;
    cfg.ffn_mult = model.ffn_mult;
    cfg.ln_eps = model.ln_eps;
    cfg.vocab_size = vocab_size;
    cfg.schedule_T = schedule.T;
    return cfg;
}

VidConfig RunConfig::vid_config() const {
    VidConfig cfg;
    cfg.shapes = shapes;
    cfg.J = data.J;
    cfg.K = data.K;
    cfg.d_model = model.vid_d_model;
    cfg.heads = model.vid_heads;
    cfg.n_blocks = model.vid_n_blocks;
    cfg.conv_c1 = model.vid_conv_c1;
    cfg.conv_c2 = model.vid_conv_c2;
    cfg.d_time = model.vid_d_time;
    cfg.ffn_mult = model.ffn_mult;
    cfg.ln_eps = model.ln_eps;
    cfg.schedule_T = schedule.T;
    return cfg;
}

NoiseSchedule RunConfig::make_schedule() const {
    return build_schedule(schedule.T, schedule.beta_start, schedule.beta_end,
                          schedule_kind_from_string(schedule.kind));
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: section '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("config: unknown key '" + where + "." + key + "'");
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;  // keep default
    try {
        it->get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown(j, {"format_version", "seed", "shapes", "schedule", "model", "train", "data",
                       "metrics", "codec"},
                   "config");
    RunConfig c;
    get_to(j, "format_version", c.format_version);
    get_to(j, "seed", c.seed);
    if (j.contains("shapes")) {
        const json& s = j["shapes"];
        reject_unknown(s, {"N", "H", "W", "rh", "rw", "rn", "patch", "L_text", "d_model", "d_latent"},
                       "shapes");
        get_to(s, "N", c.shapes.N);
        get_to(s, "H", c.shapes.H);
        get_to(s, "W", c.shapes.W);
        get_to(s, "rh", c.shapes.rh);
        get_to(s, "rw", c.shapes.rw);
        get_to(s, "rn", c.shapes.rn);
        get_to(s, "patch", c.shapes.patch);
        get_to(s, "L_text", c.shapes.L_text);
        get_to(s, "d_model", c.shapes.d_model);
        get_to(s, "d_latent", c.shapes.d_latent);
    }
    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        reject_unknown(s, {"T", "beta_start", "beta_end", "kind", "inference_steps"}, "schedule");
        get_to(s, "T", c.schedule.T);
        get_to(s, "beta_start", c.schedule.beta_start);
        get_to(s, "beta_end", c.schedule.beta_end);
        get_to(s, "kind", c.schedule.kind);
        get_to(s, "inference_steps", c.schedule.inference_steps);
    }
    if (j.contains("model")) {
        const json& s = j["model"];
        reject_unknown(s, {"n_blocks", "heads", "d_time", "ffn_mult", "ln_eps", "vid_d_model",
                           "vid_heads", "vid_n_blocks", "vid_conv_c1", "vid_conv_c2", "vid_d_time"},
                       "model");
        get_to(s, "n_blocks", c.model.n_blocks);
        get_to(s, "heads", c.model.heads);
        get_to(s, "d_time", c.model.d_time);
        get_to(s, "ffn_mult", c.model.ffn_mult);
        get_to(s, "ln_eps", c.model.ln_eps);
        get_to(s, "vid_d_model", c.model.vid_d_model);
        get_to(s, "vid_heads", c.model.vid_heads);
        get_to(s, "vid_n_blocks", c.model.vid_n_blocks);
        get_to(s, "vid_conv_c1", c.model.vid_conv_c1);
        get_to(s, "vid_conv_c2", c.model.vid_conv_c2);
        get_to(s, "vid_d_time", c.model.vid_d_time);
    }
    if (j.contains("train")) {
        const json& s = j["train"];
        reject_unknown(s, {"omega1", "omega2", "warmup_steps", "total_steps", "batch_size",
                           "learning_rate", "lr_warmup_steps", "feedback_mode", "checkpoint_every",
                           "image_noise_sigma"},
                       "train");
        get_to(s, "omega1", c.train.omega1);
        get_to(s, "omega2", c.train.omega2);
        get_to(s, "warmup_steps", c.train.warmup_steps);
        get_to(s, "total_steps", c.train.total_steps);
        get_to(s, "batch_size", c.train.batch_size);
        get_to(s, "learning_rate", c.train.learning_rate);
        get_to(s, "lr_warmup_steps", c.train.lr_warmup_steps);
        get_to(s, "feedback_mode", c.train.feedback_mode);
        get_to(s, "checkpoint_every", c.train.checkpoint_every);
        get_to(s, "image_noise_sigma", c.train.image_noise_sigma);
    }
    if (j.contains("data")) {
        const json& s = j["data"];
        reject_unknown(s, {"num_samples", "J", "K", "split_ratio", "fps", "actions"}, "data");
        get_to(s, "num_samples", c.data.num_samples);
        get_to(s, "J", c.data.J);
        get_to(s, "K", c.data.K);
        get_to(s, "split_ratio", c.data.split_ratio);
        get_to(s, "fps", c.data.fps);
        get_to(s, "actions", c.data.actions);
    }
    if (j.contains("metrics")) {
        const json& s = j["metrics"];
        reject_unknown(s, {"tau_op", "bg_threshold", "fid_ae_steps", "fid_ae_lr"}, "metrics");
        get_to(s, "tau_op", c.metrics.tau_op);
        get_to(s, "bg_threshold", c.metrics.bg_threshold);
        get_to(s, "fid_ae_steps", c.metrics.fid_ae_steps);
        get_to(s, "fid_ae_lr", c.metrics.fid_ae_lr);
    }
    if (j.contains("codec")) {
        const json& s = j["codec"];
        reject_unknown(s, {"mode", "learned_dim", "learned_steps", "learned_lr"}, "codec");
        get_to(s, "mode", c.codec.mode);
        get_to(s, "learned_dim", c.codec.learned_dim);
        get_to(s, "learned_steps", c.codec.learned_steps);
        get_to(s, "learned_lr", c.codec.learned_lr);
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const MissingArtifactError&) {
        throw ConfigError("config file not found: " + path.string());
    }
    return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
    ordered_json j;
    j["format_version"] = format_version;
    j["seed"] = seed;
    j["shapes"] = {{"N", shapes.N}, {"H", shapes.H}, {"W", shapes.W}, {"rh", shapes.rh},
                   {"rw", shapes.rw}, {"rn", shapes.rn}, {"patch", shapes.patch},
                   {"L_text", shapes.L_text}, {"d_model", shapes.d_model}, {"d_latent", shapes.d_latent}};
    j["schedule"] = {{"T", schedule.T}, {"beta_start", schedule.beta_start},
                     {"beta_end", schedule.beta_end}, {"kind", schedule.kind},
                     {"inference_steps", schedule.inference_steps}};
    j["model"] = {{"n_blocks", model.n_blocks}, {"heads", model.heads}, {"d_time", model.d_time},
                  {"ffn_mult", model.ffn_mult}, {"ln_eps", model.ln_eps},
                  {"vid_d_model", model.vid_d_model}, {"vid_heads", model.vid_heads},
                  {"vid_n_blocks", model.vid_n_blocks}, {"vid_conv_c1", model.vid_conv_c1},
                  {"vid_conv_c2", model.vid_conv_c2}, {"vid_d_time", model.vid_d_time}};
    j["train"] = {{"omega1", train.omega1}, {"omega2", train.omega2},
                  {"warmup_steps", train.warmup_steps}, {"total_steps", train.total_steps},
                  {"batch_size", train.batch_size}, {"learning_rate", train.learning_rate},
                  {"lr_warmup_steps", train.lr_warmup_steps}, {"feedback_mode", train.feedback_mode},
                  {"checkpoint_every", train.checkpoint_every},
                  {"image_noise_sigma", train.image_noise_sigma}};
    j["data"] = {{"num_samples", data.num_samples}, {"J", data.J}, {"K", data.K},
                 {"split_ratio", data.split_ratio}, {"fps", data.fps}, {"actions", data.actions}};
    j["metrics"] = {{"tau_op", metrics.tau_op}, {"bg_threshold", metrics.bg_threshold},
                    {"fid_ae_steps", metrics.fid_ae_steps}, {"fid_ae_lr", metrics.fid_ae_lr}};
    j["codec"] = {{"mode", codec.mode}, {"learned_dim", codec.learned_dim},
                  {"learned_steps", codec.learned_steps}, {"learned_lr", codec.learned_lr}};
    return j.dump(2) + "\n";
}

void apply_override(std::string& json_text, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
    }
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    json parsed_value;
    try {
        parsed_value = json::parse(value);
    } catch (const json::exception&) {
        parsed_value = value;  // plain string
    }
    json* cur = &j;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override has an empty path segment: " + path);
        if (dot == std::string::npos) {
            (*cur)[key] = parsed_value;
            break;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
    json_text = j.dump();
}

}  // namespace svimo
