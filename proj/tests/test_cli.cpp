// Smoke tests for the command-line surface; CPSCAN_BIN points at the built
// binary (set by CMake).
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "cpscan/io.hpp"

using namespace cpscan;
namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* bin = std::getenv("CPSCAN_BIN");
    REQUIRE(bin != nullptr);
    return bin;
}

int run(const std::string& args) {
    const int status = std::system((binary() + " " + args).c_str());
    return WEXITSTATUS(status);
}

std::string work_dir() {
    const fs::path dir = fs::temp_directory_path() / "cpscan_cli_tests";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("generate, detect and evaluate chain together", "[cli]") {
    const std::string dir = work_dir();
    write_file(dir + "/gen.json", R"({
        "family": "mlp_piecewise", "p": 4, "h": 2, "n_changes": 1,
        "gap": {"min": 90, "max": 110}, "sigma": 0.3, "seed": 5,
        "mlp": {"hidden": [8]}
    })");
    REQUIRE(run("generate --spec " + dir + "/gen.json --out " + dir + " > " + dir +
                "/gen.log 2>&1") == 0);
    REQUIRE(fs::exists(dir + "/dataset.csv"));
    REQUIRE(fs::exists(dir + "/dataset.manifest.json"));

    REQUIRE(run("detect " + dir + "/dataset.csv --out " + dir +
                " --t0 16 --stride 4 --pi signal --hidden 8 --epochs 120 --lr 0.01"
                " --seed 3 --workers 2 > " + dir + "/det.log 2>&1") == 0);
    REQUIRE(fs::exists(dir + "/detection.json"));
    REQUIRE(fs::exists(dir + "/detection.curve.csv"));
    REQUIRE(fs::exists(dir + "/detection.run.json"));

    const json det = json::parse(read_file(dir + "/detection.json"));
    REQUIRE(det.at("t1") == 16);
    REQUIRE(det.at("t3") == 32);
    REQUIRE(det.contains("change_points"));

    REQUIRE(run("evaluate --manifest " + dir + "/dataset.manifest.json --estimates " + dir +
                "/detection.json --out " + dir + "/eval.json > " + dir + "/eval.log 2>&1") == 0);
    const json eval = json::parse(read_file(dir + "/eval.json"));
    REQUIRE(eval.contains("mean_distance"));
    REQUIRE(eval.at("margin") == 32);  // defaulted to the run's T3

    // The run manifest records content hashes of the outputs.
    const json runinfo = json::parse(read_file(dir + "/detection.run.json"));
    REQUIRE(runinfo.at("outputs").at("detection").at("fnv64") ==
            file_hash(dir + "/detection.json"));
}

TEST_CASE("lag flattening builds VAR inputs from a raw series", "[cli]") {
    const std::string dir = work_dir();
    write_file(dir + "/gen.json", R"({
        "family": "var", "h": 3, "n_changes": 0,
        "gap": {"min": 150, "max": 150}, "sigma": 0.2, "seed": 9,
        "var": {"lags": 2}
    })");
    REQUIRE(run("generate --spec " + dir + "/gen.json --out " + dir + " > " + dir +
                "/gen.log 2>&1") == 0);
    REQUIRE(fs::exists(dir + "/dataset.raw.csv"));
    // Flattened CSV has p = lags * h input columns.
    const SeriesDataset flat = read_dataset_csv(dir + "/dataset.csv");
    REQUIRE(flat.input_dim() == 6);

    REQUIRE(run("detect " + dir + "/dataset.raw.csv --lags 2 --out " + dir +
                " --name lagdet --t0 14 --stride 6 --epochs 60 --hidden 8 > " + dir +
                "/det2.log 2>&1") == 0);
    REQUIRE(fs::exists(dir + "/lagdet.json"));
}

TEST_CASE("errors exit nonzero with a single-line reason", "[cli]") {
    const std::string dir = work_dir();
    REQUIRE(run("detect /nonexistent.csv --out " + dir + " > " + dir + "/out.log 2> " + dir +
                "/err.log") != 0);
    const std::string err = read_file(dir + "/err.log");
    REQUIRE(err.rfind("error:", 0) == 0);
    REQUIRE(std::count(err.begin(), err.end(), '\n') == 1);

    REQUIRE(run("generate --spec /nonexistent.json > " + dir + "/out2.log 2> " + dir +
                "/err2.log") != 0);
    REQUIRE(read_file(dir + "/err2.log").rfind("error:", 0) == 0);

    // Unknown flags are also nonzero.
    REQUIRE(run("detect --bogus-flag 2>/dev/null 1>/dev/null") != 0);
}
