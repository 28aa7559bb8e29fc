#pragma once

#include <filesystem>
#include <string>

#include "svimo/config.hpp"

namespace svimo {

// Subcommand bodies behind the `svimo` binary; they throw typed errors which
// the binary maps onto exit codes (0 ok, 2 config, 3 integrity, 4 numerical,
// 5 missing artifact).
int cmd_datagen(const RunConfig& cfg, const std::filesystem::path& out_dir);
int cmd_warmup(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir);
int cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
              const std::filesystem::path& vid_ckpt, const std::filesystem::path& out_dir);
int cmd_sample(const RunConfig& cfg, const std::filesystem::path& ckpt,
               const std::filesystem::path& image_path, const std::string& prompt,
               const std::filesystem::path& out_dir, const std::string& sample_id);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& real_dir,
             const std::filesystem::path& gen_dir, const std::filesystem::path& out_path);
int cmd_token_budget(const RunConfig& cfg);

int exit_code_for_current_exception();

}  // namespace svimo
