#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "ultr/kvconfig.hpp"

namespace {

ultr::KvConfig parse(const std::string& content) {
    const auto path = (std::filesystem::temp_directory_path() / "kv_test.cfg").string();
    std::ofstream(path) << content;
    return ultr::KvConfig::parse_file(path);
}

}  // namespace

TEST_CASE("scalars, strings and lists parse with defaults for missing keys") {
    const auto cfg = parse(
        "# comment\n"
        "n = 42\n"
        "ratio = 0.25\n"
        "name = \"quoted value\"\n"
        "plain = bare\n"
        "list = 1,2,3\n"
        "curve = 1.0, 0.5 ,0.25\n");
    CHECK(cfg.get_u64("n", 0) == 42);
    CHECK(cfg.get_double("ratio", 0.0) == doctest::Approx(0.25));
    CHECK(cfg.get_string("name", "") == "quoted value");
    CHECK(cfg.get_string("plain", "") == "bare");
    CHECK(cfg.get_u64s("list") == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(cfg.get_doubles("curve") == std::vector<double>{1.0, 0.5, 0.25});

    CHECK(cfg.get_u64("missing", 7) == 7);
    CHECK(cfg.get_string("missing", "fallback") == "fallback");
    CHECK(cfg.get_doubles("missing").empty());
    CHECK(cfg.has("n"));
    CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("lines without an equals sign are rejected") {
    CHECK_THROWS_AS(parse("just some words\n"), std::runtime_error);
    CHECK_THROWS_AS(parse("= value\n"), std::runtime_error);
}

TEST_CASE("malformed numbers are rejected on access") {
    const auto cfg = parse("n = twelve\n");
    CHECK_THROWS(cfg.get_u64("n", 0));
}

TEST_CASE("later assignments win") {
    const auto cfg = parse("seed = 1\nseed = 9\n");
    CHECK(cfg.get_u64("seed", 0) == 9);
}
