#include <CLI11.hpp>
#include <cstdlib>
#include <string>
#include <vector>

#include "svimo/cli.hpp"
#include "svimo/io.hpp"

namespace {

// --set overrides and the SVIMO_SEED environment variable are applied to the
// raw JSON before parsing, so validation sees the final values.
svimo::RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    std::string text = svimo::read_text_file(path);
    if (const char* env_seed = std::getenv("SVIMO_SEED")) {
        svimo::apply_override(text, std::string("seed=") + env_seed);
    }
    for (const auto& s : sets) svimo::apply_override(text, s);
    return svimo::RunConfig::from_json_text(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synchronized video-motion diffusion workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--set", sets, "dotted override, e.g. train.total_steps=100");

    std::string data_dir, out_dir, ckpt, vid_ckpt, image_path, prompt, real_dir, gen_dir, out_path;
    std::string sample_id = "sample";

    auto* datagen = app.add_subcommand("datagen", "generate and persist a synthetic dataset");
    datagen->add_option("--out", out_dir, "dataset directory")->required();

    auto* warmup = app.add_subcommand("warmup", "warm up the VID head");
    warmup->add_option("--data", data_dir, "dataset directory")->required();
    warmup->add_option("--out", out_dir, "run directory")->required();

    auto* train = app.add_subcommand("train", "closed-loop joint training");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--vid-ckpt", vid_ckpt, "warmed-up VID checkpoint")->required();
    train->add_option("--out", out_dir, "run directory")->required();

    auto* sample = app.add_subcommand("sample", "generate video and motion from (image, prompt)");
    sample->add_option("--ckpt", ckpt, "trained checkpoint")->required();
    sample->add_option("--image", image_path, "reference image (ppm)")->required();
    sample->add_option("--prompt", prompt, "text prompt")->required();
    sample->add_option("--out", out_dir, "output directory")->required();
    sample->add_option("--id", sample_id, "reference sample id recorded in meta.json");

    auto* eval = app.add_subcommand("eval", "compute the metrics report");
    eval->add_option("--real", real_dir, "ground-truth dataset directory")->required();
    eval->add_option("--gen", gen_dir, "directory of generation outputs")->required();
    eval->add_option("--out", out_path, "report JSON path")->required();

    app.add_subcommand("token-budget", "print the token accounting table");

    CLI11_PARSE(app, argc, argv);

    try {
        svimo::RunConfig cfg = load_config(config_path, sets);
        if (datagen->parsed()) return svimo::cmd_datagen(cfg, out_dir);
        if (warmup->parsed()) return svimo::cmd_warmup(cfg, data_dir, out_dir);
        if (train->parsed()) return svimo::cmd_train(cfg, data_dir, vid_ckpt, out_dir);
        if (sample->parsed()) return svimo::cmd_sample(cfg, ckpt, image_path, prompt, out_dir, sample_id);
        if (eval->parsed()) return svimo::cmd_eval(cfg, real_dir, gen_dir, out_path);
        return svimo::cmd_token_budget(cfg);
    } catch (...) {
        return svimo::exit_code_for_current_exception();
    }
}
