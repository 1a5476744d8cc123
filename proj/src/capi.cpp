#include "salseg.h"

#include <cstring>
#include <string>

#include "commands.h"
#include "core/errors.h"

using namespace salseg;

struct salseg_session {
    CommandOptions opt;
    std::string last_error;
    std::string last_summary;
};

namespace {

constexpr const char* kVersion = "1.0.0";

void copy_msg(char* buf, size_t len, const std::string& msg) {
    if (!buf || len == 0) return;
    const size_t n = std::min(msg.size(), len - 1);
    std::memcpy(buf, msg.data(), n);
    buf[n] = '\0';
}

salseg_status classify(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const TaxonomyError*>(&e)) {
        return SALSEG_CONFIG_ERROR;
    }
    if (dynamic_cast<const IoError*>(&e)) return SALSEG_IO_ERROR;
    return SALSEG_RUNTIME_ERROR;
}

template <typename Fn>
salseg_status guarded(salseg_session* s, const char* stage, Fn&& fn) {
    if (!s) return SALSEG_RUNTIME_ERROR;
    try {
        s->last_summary = fn();
        s->last_error.clear();
        return SALSEG_OK;
    } catch (const Error& e) {
        s->last_error = std::string(stage) + ": " + e.what();
        return classify(e);
    } catch (const std::exception& e) {
        s->last_error = std::string(stage) + ": " + e.what();
        return SALSEG_RUNTIME_ERROR;
    }
}

}  // namespace

extern "C" {

const char* salseg_version(void) { return kVersion; }

salseg_status salseg_open(const char* config_path, int64_t seed_override, salseg_session** out,
                          char* errbuf, size_t errbuf_len) {
    if (!out) return SALSEG_CONFIG_ERROR;
    *out = nullptr;
    if (!config_path) {
        copy_msg(errbuf, errbuf_len, "open: config path is NULL");
        return SALSEG_CONFIG_ERROR;
    }
    try {
        auto* s = new salseg_session();
        s->opt.full = FullConfig::load_file(config_path);
        if (seed_override >= 0) s->opt.seed_override = seed_override;
        s->opt.full = apply_seed_override(s->opt.full, s->opt.seed_override);
        *out = s;
        return SALSEG_OK;
    } catch (const Error& e) {
        copy_msg(errbuf, errbuf_len, std::string("open: ") + e.what());
        return classify(e);
    } catch (const std::exception& e) {
        copy_msg(errbuf, errbuf_len, std::string("open: ") + e.what());
        return SALSEG_RUNTIME_ERROR;
    }
}

void salseg_close(salseg_session* s) { delete s; }

const char* salseg_last_error(const salseg_session* s) {
    return s ? s->last_error.c_str() : "";
}

const char* salseg_last_summary(const salseg_session* s) {
    return s ? s->last_summary.c_str() : "";
}

salseg_status salseg_gen_data(salseg_session* s, const char* out_dir) {
    return guarded(s, "gen-data", [&] {
        if (!out_dir) throw ConfigError("output directory is NULL");
        return cmd_gen_data(s->opt, out_dir);
    });
}

salseg_status salseg_train(salseg_session* s, const char* out_dir, int force) {
    return guarded(s, "train", [&] {
        if (!out_dir) throw ConfigError("output directory is NULL");
        CommandOptions opt = s->opt;
        opt.force = force != 0;
        return cmd_train(opt, out_dir);
    });
}

salseg_status salseg_eval(salseg_session* s, const char* checkpoint_path, const char* out_dir,
                          double* miou_out) {
    return guarded(s, "eval", [&] {
        if (!checkpoint_path || !out_dir) throw ConfigError("checkpoint path and output directory are required");
        return cmd_eval(s->opt, checkpoint_path, out_dir, miou_out);
    });
}

salseg_status salseg_ablate(salseg_session* s, const char* suite, const char* taxonomy_path,
                            const char* out_dir) {
    return guarded(s, "ablate", [&] {
        if (!suite || !out_dir) throw ConfigError("suite and output directory are required");
        return cmd_ablate(s->opt, suite, taxonomy_path ? taxonomy_path : "", out_dir);
    });
}

salseg_status salseg_report_efficiency(salseg_session* s, const char* out_dir) {
    return guarded(s, "report-efficiency", [&] {
        if (!out_dir) throw ConfigError("output directory is NULL");
        return cmd_report_efficiency(s->opt, out_dir);
    });
}

salseg_status salseg_visualize(salseg_session* s, const char* checkpoint_path, int scene_index,
                               const char* class_name, const char* kind, const char* out_dir) {
    return guarded(s, "visualize", [&] {
        if (!checkpoint_path || !kind || !out_dir) {
            throw ConfigError("checkpoint, kind and output directory are required");
        }
        return cmd_visualize(s->opt, checkpoint_path, scene_index,
                             class_name ? class_name : "", kind, out_dir);
    });
}

}  // extern "C"
