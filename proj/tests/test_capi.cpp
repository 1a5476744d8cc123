// Exercises the shared library strictly through the public C header.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "salseg.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

std::string write_config(const TempDir& dir, const std::string& text) {
    const std::string path = dir.str("config.cfg");
    std::ofstream f(path);
    f << text;
    return path;
}

const char* kTinyConfig =
    "grid_h = 4\n"
    "grid_w = 4\n"
    "n_classes = 2\n"
    "d_enc = 6\n"
    "d_corr = 4\n"
    "d_attn = 8\n"
    "n_attn_heads = 2\n"
    "n_attn_layers = 1\n"
    "k_fg = 4\n"
    "window_size = 2\n"
    "n_scenes = 3\n"
    "image_size = 32\n"
    "noise_sigma = 0.02\n"
    "total_iters = 3\n"
    "batch_size = 1\n"
    "eval_every = 3\n"
    "checkpoint_every = 100\n"
    "seed = 5\n";

}  // namespace

TEST_CASE("version string exists") {
    CHECK(std::string(salseg_version()).find('.') != std::string::npos);
}

TEST_CASE("open fails cleanly on missing or invalid configs") {
    char err[256] = {0};
    salseg_session* s = nullptr;
    CHECK(salseg_open("/nonexistent/path.cfg", -1, &s, err, sizeof(err)) == SALSEG_CONFIG_ERROR);
    CHECK(s == nullptr);
    CHECK(std::string(err).find("open:") == 0);

    TempDir dir("salseg_capi_badcfg");
    const std::string bad = write_config(dir, "k_fg = 0\n");
    CHECK(salseg_open(bad.c_str(), -1, &s, err, sizeof(err)) == SALSEG_CONFIG_ERROR);
    const std::string unknown = write_config(dir, "no_such_key = 1\n");
    CHECK(salseg_open(unknown.c_str(), -1, &s, err, sizeof(err)) == SALSEG_CONFIG_ERROR);
}

TEST_CASE("gen-data, train, eval, visualize flow through the C API") {
    TempDir dir("salseg_capi_flow");
    const std::string cfg = write_config(dir, kTinyConfig);
    salseg_session* s = nullptr;
    char err[512] = {0};
    REQUIRE(salseg_open(cfg.c_str(), -1, &s, err, sizeof(err)) == SALSEG_OK);

    CHECK(salseg_gen_data(s, dir.str("data").c_str()) == SALSEG_OK);
    CHECK(fs::exists(dir.str("data/scenes/scene_00000.nar")));
    CHECK(fs::exists(dir.str("data/hash.txt")));
    CHECK(fs::exists(dir.str("data/dataset.cfg")));

    REQUIRE(salseg_train(s, dir.str("run").c_str(), 0) == SALSEG_OK);
    CHECK(fs::exists(dir.str("run/checkpoint.nar")));
    CHECK(fs::exists(dir.str("run/metrics.csv")));
    // refuses to overwrite without force
    CHECK(salseg_train(s, dir.str("run").c_str(), 0) == SALSEG_CONFIG_ERROR);
    CHECK(std::string(salseg_last_error(s)).find("force") != std::string::npos);
    CHECK(salseg_train(s, dir.str("run").c_str(), 1) == SALSEG_OK);

    double miou = -1.0;
    CHECK(salseg_eval(s, dir.str("run/checkpoint.nar").c_str(), dir.str("eval").c_str(), &miou) ==
          SALSEG_OK);
    CHECK(miou >= 0.0);
    CHECK(miou <= 1.0);
    CHECK(fs::exists(dir.str("eval/eval.csv")));

    CHECK(salseg_visualize(s, dir.str("run/checkpoint.nar").c_str(), 0, "class0", "partition",
                           dir.str("vis").c_str()) == SALSEG_OK);
    CHECK(fs::exists(dir.str("vis/partition_class0.pgm")));
    CHECK(salseg_visualize(s, dir.str("run/checkpoint.nar").c_str(), 0, "class0", "saliency",
                           dir.str("vis").c_str()) == SALSEG_OK);
    CHECK(salseg_visualize(s, dir.str("run/checkpoint.nar").c_str(), 0, nullptr, "prediction",
                           dir.str("vis").c_str()) == SALSEG_OK);
    CHECK(fs::exists(dir.str("vis/prediction.pgm")));
    // unknown class reports an error, not a crash
    CHECK(salseg_visualize(s, dir.str("run/checkpoint.nar").c_str(), 0, "zebra", "saliency",
                           dir.str("vis").c_str()) == SALSEG_RUNTIME_ERROR);
    CHECK(std::string(salseg_last_error(s)).find("zebra") != std::string::npos);

    CHECK(salseg_report_efficiency(s, dir.str("eff").c_str()) == SALSEG_OK);
    CHECK(fs::exists(dir.str("eff/efficiency.csv")));

    // the partition overlay marks exactly k_fg cells
    {
        std::ifstream pgm(dir.str("vis/partition_class0.pgm"), std::ios::binary);
        std::string magic, dims, maxval;
        std::getline(pgm, magic);
        std::getline(pgm, dims);
        std::getline(pgm, maxval);
        CHECK(magic == "P5");
        std::string payload((std::istreambuf_iterator<char>(pgm)),
                            std::istreambuf_iterator<char>());
        REQUIRE(payload.size() == 16);
        int marked = 0;
        for (char c : payload) marked += static_cast<unsigned char>(c) == 255 ? 1 : 0;
        CHECK(marked == 4);  // k_fg in kTinyConfig
    }

    salseg_close(s);
}

TEST_CASE("seed override changes the generated data") {
    TempDir dir("salseg_capi_seed");
    const std::string cfg = write_config(dir, kTinyConfig);
    char err[256] = {0};
    salseg_session *a = nullptr, *b = nullptr;
    REQUIRE(salseg_open(cfg.c_str(), -1, &a, err, sizeof(err)) == SALSEG_OK);
    REQUIRE(salseg_open(cfg.c_str(), 123, &b, err, sizeof(err)) == SALSEG_OK);
    CHECK(salseg_gen_data(a, dir.str("da").c_str()) == SALSEG_OK);
    CHECK(salseg_gen_data(b, dir.str("db").c_str()) == SALSEG_OK);
    std::ifstream ha(dir.str("da/hash.txt")), hb(dir.str("db/hash.txt"));
    std::string sa, sb;
    std::getline(ha, sa);
    std::getline(hb, sb);
    CHECK(sa != sb);
    salseg_close(a);
    salseg_close(b);
}

TEST_CASE("ablate validates its suite name through the C API") {
    TempDir dir("salseg_capi_suite");
    const std::string cfg = write_config(dir, kTinyConfig);
    char err[256] = {0};
    salseg_session* s = nullptr;
    REQUIRE(salseg_open(cfg.c_str(), -1, &s, err, sizeof(err)) == SALSEG_OK);
    CHECK(salseg_ablate(s, "bogus", nullptr, dir.str("abl").c_str()) == SALSEG_CONFIG_ERROR);
    salseg_close(s);
}
