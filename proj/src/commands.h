#pragma once

#include <optional>
#include <string>

#include "core/config.h"

namespace salseg {

// Implementation of the CLI surface. Each command writes its artifacts under
// out_dir (created when missing) and returns a short human-readable summary.

struct CommandOptions {
    FullConfig full;
    std::optional<int64_t> seed_override;  // replaces pipeline/dataset seed
    bool force = false;                    // allow overwriting checkpoints
};

FullConfig apply_seed_override(FullConfig full, const std::optional<int64_t>& seed);

std::string cmd_gen_data(const CommandOptions& opt, const std::string& out_dir);
std::string cmd_train(const CommandOptions& opt, const std::string& out_dir);
std::string cmd_eval(const CommandOptions& opt, const std::string& checkpoint_path,
                     const std::string& out_dir, double* miou_out);
std::string cmd_ablate(const CommandOptions& opt, const std::string& suite,
                       const std::string& taxonomy_path, const std::string& out_dir);
std::string cmd_report_efficiency(const CommandOptions& opt, const std::string& out_dir);
std::string cmd_visualize(const CommandOptions& opt, const std::string& checkpoint_path,
                          int scene_index, const std::string& class_name, const std::string& kind,
                          const std::string& out_dir);

}  // namespace salseg
