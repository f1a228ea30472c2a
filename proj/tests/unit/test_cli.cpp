#include "ccc/cli.hpp"
#include "ccc/csv.hpp"
#include "ccc/manifest.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Session {
    fs::path root;
    std::ostringstream out, err;

    explicit Session(const std::string& name) : root(fs::temp_directory_path() / ("ccc_unit_cli_" + name)) {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Session() { fs::remove_all(root); }

    int operator()(const std::vector<std::string>& args) {
        out.str("");
        err.str("");
        return ccc::cli::run(args, out, err);
    }
    std::string at(const std::string& rel) const { return (root / rel).string(); }
};

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);)
        lines += !line.empty();
    return lines;
}

} // namespace

TEST_CASE("git blob hash") {
    CHECK(ccc::git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(ccc::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("usage errors exit with 1") {
    Session s("usage");
    CHECK(s({}) == 1);
    CHECK(s({"frobnicate"}) == 1);
    CHECK(s.err.str().find("unknown command") != std::string::npos);
    CHECK(s.err.str().find("evaluate") != std::string::npos);
    CHECK(s({"fit", "--data", "x"}) == 1);
    CHECK(s({"fit", "--data", "x", "--out", "y", "--alpha", "abc"}) == 1);
    CHECK(s({"--help"}) == 0);
}

TEST_CASE("synth, fit and predict on defaults") {
    Session s("pipeline");
    REQUIRE(s({"synth", "--out", s.at("data"), "--slots", "12", "--seed", "3"}) == 0);
    for (const char* f : {"crimes.csv", "features.csv", "regions.csv", "manifest.json"})
        CHECK(fs::exists(s.root / "data" / f));

    REQUIRE(s({"fit", "--data", s.at("data"), "--out", s.at("model"), "--max_iters", "20"}) == 0);
    const auto report = nlohmann::json::parse(std::ifstream(s.root / "model" / "fit_report.json"));
    CHECK(report["iterations"].get<int>() == 20);

    {
        std::ofstream f(s.root / "next.csv");
        f << "region_id,time_slot,f1,f2,f3,f4\n";
        for (int n = 1; n <= 9; ++n)
            f << n << ",13,1,0.5,-0.5,2\n";
    }
    REQUIRE(s({"predict", "--model", s.at("model/model.ckpt"), "--features", s.at("next.csv"), "--out",
               s.at("pred.csv")}) == 0);
    // header plus N * K rows
    CHECK(count_lines(s.root / "pred.csv") == 1 + 9 * 3);

    const auto manifest = nlohmann::json::parse(std::ifstream(s.root / "model" / "manifest.json"));
    CHECK(manifest["command"] == "fit");
    CHECK(manifest["inputs"]["crimes.csv"] == ccc::git_blob_hash_file(s.root / "data" / "crimes.csv"));
    CHECK(manifest["outputs"]["model.ckpt"] == ccc::git_blob_hash_file(s.root / "model" / "model.ckpt"));
}

TEST_CASE("config files and command-line overrides") {
    Session s("config");
    REQUIRE(s({"synth", "--out", s.at("data"), "--slots", "10"}) == 0);
    std::ofstream(s.root / "cfg.ini") << "alpha = 0.25\nmax_iters = 7\nspatial = false\n";
    REQUIRE(s({"fit", "--data", s.at("data"), "--config", s.at("cfg.ini"), "--out", s.at("a"), "--max_iters",
               "5"}) == 0);
    const auto m = nlohmann::json::parse(std::ifstream(s.root / "a" / "manifest.json"));
    CHECK(m["config"]["alpha"].get<double>() == 0.25);
    CHECK(m["config"]["max_iters"].get<int>() == 5);
    CHECK(m["config"]["spatial"].get<bool>() == false);

    std::ofstream(s.root / "bad.ini") << "alhpa = 0.25\n";
    CHECK(s({"fit", "--data", s.at("data"), "--config", s.at("bad.ini"), "--out", s.at("b")}) == 2);
    CHECK(s.err.str().find("alhpa") != std::string::npos);
}

TEST_CASE("data and numeric failures map to exit codes 2 and 3") {
    Session s("codes");
    CHECK(s({"fit", "--data", s.at("missing"), "--out", s.at("o")}) == 2);
    CHECK(s.err.str().find("ccc fit") != std::string::npos);

    REQUIRE(s({"synth", "--out", s.at("data"), "--slots", "8"}) == 0);
    CHECK(s({"evaluate", "--data", s.at("data"), "--out", s.at("e"), "--train_window", "8"}) == 2);
    CHECK(s({"fit", "--data", s.at("data"), "--out", s.at("o"), "--rho", "0"}) == 2);

    // a huge step on a long run blows up the augmented Lagrangian
    CHECK(s({"fit", "--data", s.at("data"), "--out", s.at("o"), "--eta", "1e6", "--max_halvings", "0",
             "--max_iters", "50"}) == 3);
}

TEST_CASE("evaluate and analyze write their reports") {
    Session s("eval");
    REQUIRE(s({"synth", "--out", s.at("data"), "--grid_side", "2", "--slots", "10"}) == 0);
    REQUIRE(s({"evaluate", "--data", s.at("data"), "--out", s.at("e"), "--max_iters", "20", "--train_window",
               "6"}) == 0);
    // 4 origins x 4 regions x 3 types
    CHECK(count_lines(s.root / "e" / "predictions.csv") == 1 + 4 * 4 * 3);
    const auto r = nlohmann::json::parse(std::ifstream(s.root / "e" / "evaluation.json"));
    CHECK(r["rmse"]["ccc"].is_number());
    CHECK(r["rmse"]["last_value"].is_number());

    REQUIRE(s({"analyze", "--data", s.at("data"), "--out", s.at("a")}) == 0);
    CHECK(count_lines(s.root / "a" / "temporal_curve.csv") == 1 + 3 * 9);
    CHECK(fs::exists(s.root / "a" / "cross_type.csv"));
}
