#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = DENSITOMETER_CLI_PATH " "s + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path write_tiny_config(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("densitometer_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "grid.cfg";
    std::ofstream out(cfg);
    out << "[data]\n"
           "dataset = synthetic\n"
           "validation_count = 80\n"
           "synthetic_items = 400\n"
           "synthetic_dim = 12\n"
           "synthetic_classes = 10\n"
           "[grid]\n"
           "families = MLP\n"
           "sizes = 0.05,0.1\n"
           "optimizers = sgd\n"
           "init_schemes = glorot\n"
           "init_seeds = 0\n"
           "data_seeds = 0\n"
           "[train]\n"
           "batch_size = 32\n"
           "learning_rate = 0.1\n"
           "rule = val_min:2\n"
           "[output]\n"
           "dir = "
        << (dir / "out").string() << "\n";
    return cfg;
}

int count_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int rows = -1;  // minus header
    while (std::getline(in, line)) {
        if (!line.empty()) {
            ++rows;
        }
    }
    return rows;
}

}  // namespace

TEST_CASE("cli: no subcommand or unknown flag is a usage error (exit 1)") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("--bogus") == 1);
    CHECK(run_cli("train --no-such-flag") == 1);
    CHECK(run_cli("frobnicate") == 1);
}

TEST_CASE("cli: --help exits 0") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("train --help") == 0);
}

TEST_CASE("cli: stats on a directory without runs.csv exits 2") {
    const fs::path dir = fs::temp_directory_path() / "densitometer_cli_nostats";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK(run_cli("stats --out " + dir.string()) == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli: train on missing dataset exits 2") {
    const fs::path cfg = write_tiny_config("missing_data");
    // same config but pointed at mnist without files
    CHECK(run_cli("train --config " + cfg.string() + " --data /nonexistent" +
                  " --out /tmp/densitometer_cli_missing_out") == 0);  // synthetic needs no files
    fs::remove_all(cfg.parent_path());

    const fs::path dir = fs::temp_directory_path() / "densitometer_cli_mnist_missing";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg2 = dir / "mnist.cfg";
    {
        std::ofstream out(cfg2);
        out << "[data]\ndataset = mnist\ndir = " << (dir / "nodata").string() << "\n[output]\ndir = "
            << (dir / "out").string() << "\n";
    }
    CHECK(run_cli("train --config " + cfg2.string()) == 2);
    fs::remove_all(dir);
    fs::remove_all("/tmp/densitometer_cli_missing_out");
}

TEST_CASE("cli: full pipeline with grid overrides") {
    const fs::path cfg = write_tiny_config("pipeline");
    const fs::path out = cfg.parent_path() / "out";

    // --sizes/--seeds override the config grid: 2 sizes x 3 seeds x 1 data seed
    CHECK(run_cli("train --config " + cfg.string() + " --sizes 0.05,0.1 --seeds 0..2") == 0);
    CHECK(count_csv_rows(out / "runs.csv") == 6);

    CHECK(run_cli("stats --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "stats.json"));

    CHECK(run_cli("report --config " + cfg.string()) == 0);
    CHECK(fs::exists(out / "fig_trajectory_synthetic_mlp_sgd.svg"));
    CHECK(fs::exists(out / "fig_trajectory_synthetic_mlp_sgd.csv"));

    CHECK(run_cli("analyze --config " + cfg.string() + " --what overlap,selectivity") == 0);
    CHECK(fs::exists(out / "overlap.csv"));
    CHECK(fs::exists(out / "selectivity.csv"));
    CHECK_FALSE(fs::exists(out / "embedding.csv"));

    // prune at a different threshold rewrites densities in place
    CHECK(run_cli("prune --config " + cfg.string() + " --threshold 10") == 0);
    CHECK(count_csv_rows(out / "runs.csv") == 6);

    fs::remove_all(cfg.parent_path());
}

TEST_CASE("cli: repro twice produces byte-identical runs.csv and stats.json") {
    const fs::path cfg = write_tiny_config("repro");
    const fs::path out = cfg.parent_path() / "out";

    const auto read_all = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };

    CHECK(run_cli("repro --config " + cfg.string()) == 0);
    const std::string runs_first = read_all(out / "runs.csv");
    const std::string stats_first = read_all(out / "stats.json");
    REQUIRE(!runs_first.empty());

    CHECK(run_cli("repro --config " + cfg.string()) == 0);
    CHECK(read_all(out / "runs.csv") == runs_first);
    CHECK(read_all(out / "stats.json") == stats_first);

    fs::remove_all(cfg.parent_path());
}
