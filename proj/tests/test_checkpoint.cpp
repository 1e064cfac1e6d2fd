#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "flowplan/checkpoint.hpp"
#include "flowplan/rng.hpp"

using namespace flowplan;
namespace fs = std::filesystem;

namespace {
std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("checkpoint round-trip is value-exact at f32") {
    TempDir dir("flowplan_ckpt_test");
    Rng rng(17);
    ParamStore store;
    store.create("a", rng.normal_tensor({3, 4}));
    store.create("b", rng.normal_tensor({5}));

    CheckpointMeta meta;
    meta.kind = "test";
    meta.seed = 17;
    meta.hyper = {{"width", 4}};
    save_checkpoint(dir.path, store, meta);

    ParamStore loaded;
    loaded.create("a", Tensor::zeros({3, 4}));
    loaded.create("b", Tensor::zeros({5}));
    load_weights(dir.path, loaded);

    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& orig = store.entries()[i].value;
        const auto& back = loaded.entries()[i].value;
        for (std::size_t j = 0; j < orig.numel(); ++j) {
            REQUIRE(static_cast<float>(back.values[j]) == static_cast<float>(orig.values[j]));
        }
    }

    // re-saving the loaded store reproduces weights.f32 byte for byte
    TempDir dir2("flowplan_ckpt_test2");
    save_checkpoint(dir2.path, loaded, meta);
    REQUIRE(read_bytes(dir.path / "weights.f32") == read_bytes(dir2.path / "weights.f32"));
    REQUIRE(weights_checksum(store) == weights_checksum(loaded));
}

TEST_CASE("checkpoint shape mismatch is rejected with the parameter name") {
    TempDir dir("flowplan_ckpt_shape");
    ParamStore store;
    store.create("w", Tensor::zeros({2, 2}));
    CheckpointMeta meta;
    meta.kind = "test";
    save_checkpoint(dir.path, store, meta);

    ParamStore other;
    other.create("w", Tensor::zeros({4}));
    try {
        load_weights(dir.path, other);
        FAIL("expected mismatch error");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()).find("'w'") != std::string::npos);
    }
}

TEST_CASE("checkpoint version mismatch is rejected") {
    TempDir dir("flowplan_ckpt_ver");
    ParamStore store;
    store.create("w", Tensor::zeros({1}));
    CheckpointMeta meta;
    meta.kind = "test";
    save_checkpoint(dir.path, store, meta);

    // tamper with the version
    nlohmann::json j;
    {
        std::ifstream f(dir.path / "model.json");
        f >> j;
    }
    j["format_version"] = 99;
    {
        std::ofstream f(dir.path / "model.json");
        f << j.dump(2);
    }
    REQUIRE_THROWS_WITH(read_checkpoint_json(dir.path), Catch::Matchers::ContainsSubstring("99"));
}

TEST_CASE("weights checksum changes when any weight changes") {
    ParamStore store;
    store.create("w", Tensor({2}, {1.0, 2.0}));
    const std::string before = weights_checksum(store);
    store.mutable_value("w").values[1] = 2.5;
    REQUIRE(weights_checksum(store) != before);
}
