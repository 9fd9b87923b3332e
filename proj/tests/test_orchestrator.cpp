#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "densitometer/config.hpp"
#include "densitometer/fetch.hpp"
#include "densitometer/pruner.hpp"
#include "densitometer/report.hpp"
#include "densitometer/run_grid.hpp"
#include "densitometer/sha256.hpp"

using namespace densitometer;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// small synthetic grid that trains in well under a second per run
ExperimentConfig tiny_config(const std::string& out_dir) {
    ExperimentConfig config;
    config.dataset = "synthetic";
    config.validation_count = 100;
    config.synthetic_items = 600;
    config.synthetic_dim = 16;
    config.synthetic_classes = 10;
    config.families = {Family::MLP};
    config.sizes = {0.05, 0.1};
    config.optimizers = {OptimizerKind::SGD};
    config.init_schemes = {InitKind::Glorot};
    config.init_seeds = {0, 1};
    config.data_seeds = {0};
    config.batch_size = 32;
    config.learning_rate = 0.1;
    config.rule = StoppingRule::val_min(3);
    config.threshold_pp = 5.0;
    config.output_dir = out_dir;
    return config;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("densitometer_orch_" + tag);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("sha256: known test vectors") {
    CHECK(sha256_hex(std::string("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("config: parse sections, lists, ranges, comments") {
    const std::string text = R"(
# comment
[data]
dataset = synthetic
validation_count = 200   # trailing comment
[grid]
families = MLP
sizes = 0.1, 0.5 ,1
init_seeds = 0..3
data_seeds = 5,7
optimizers = sgd,adam
init_schemes = glorot,he
[train]
batch_size = 16
learning_rate = 0.05
rule = val_min:4
[prune]
threshold_pp = 7.5
[output]
dir = /tmp/somewhere
[fetch]
mnist_mirror = http://mirror.example
sha256_train_images_idx3_ubyte_gz = cafe01
)";
    const ExperimentConfig config = parse_config_text(text);
    CHECK(config.dataset == "synthetic");
    CHECK(config.validation_count == 200);
    CHECK(config.sizes == std::vector<double>{0.1, 0.5, 1.0});
    CHECK(config.init_seeds == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(config.data_seeds == std::vector<std::uint64_t>{5, 7});
    CHECK(config.optimizers.size() == 2);
    CHECK(config.init_schemes.size() == 2);
    CHECK(config.batch_size == 16);
    REQUIRE(config.learning_rate.has_value());
    CHECK(*config.learning_rate == doctest::Approx(0.05));
    REQUIRE(config.rule.has_value());
    CHECK(config.rule->epoch_budget == 4);
    CHECK(config.threshold_pp == doctest::Approx(7.5));
    CHECK(config.output_dir == "/tmp/somewhere");
    CHECK(config.mnist_mirror == "http://mirror.example");
    CHECK(config.checksums.at("train_images_idx3_ubyte_gz") == "cafe01");
}

TEST_CASE("config: errors name the offending line or key") {
    CHECK_THROWS_WITH_AS(parse_config_text("[grid]\nwidgets = 3\n"),
                         doctest::Contains("grid.widgets"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("just some text\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("[data]\ndataset = imagenet\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("[grid]\ninit_seeds = \n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("[grid]\ninit_seeds = 5..2\n"), std::invalid_argument);
}

TEST_CASE("run_id: pure function of coordinates") {
    const ExperimentConfig config = tiny_config("unused");
    const std::string a =
        run_id_for(config, Family::MLP, 0.5, OptimizerKind::SGD, InitKind::Glorot, 1, 2);
    const std::string b =
        run_id_for(config, Family::MLP, 0.5, OptimizerKind::SGD, InitKind::Glorot, 1, 2);
    CHECK(a == b);
    CHECK(a.size() == 16);
    CHECK(a != run_id_for(config, Family::MLP, 0.5, OptimizerKind::SGD, InitKind::Glorot, 1, 3));
    CHECK(a != run_id_for(config, Family::MLP, 1.0, OptimizerKind::SGD, InitKind::Glorot, 1, 2));
    CHECK(a != run_id_for(config, Family::MLP, 0.5, OptimizerKind::Adam, InitKind::Glorot, 1, 2));

    ExperimentConfig other = config;
    other.threshold_pp = 10.0;
    CHECK(a != run_id_for(other, Family::MLP, 0.5, OptimizerKind::SGD, InitKind::Glorot, 1, 2));
    // output dir is not a coordinate
    ExperimentConfig moved = config;
    moved.output_dir = "elsewhere";
    CHECK(a == run_id_for(moved, Family::MLP, 0.5, OptimizerKind::SGD, InitKind::Glorot, 1, 2));
}

TEST_CASE("run_grid: cardinality, resume idempotence, parallel equivalence") {
    const fs::path dir_a = fresh_dir("grid_a");
    ExperimentConfig config = tiny_config(dir_a.string());
    // 2 sizes x 2 init_seeds x 1 data_seed
    const GridOutcome first = run_grid(config, 1);
    CHECK(first.records.size() == 4);
    CHECK(first.executed == 4);
    CHECK(first.errors.empty());
    const std::string runs_a = read_text(dir_a / "runs.csv");

    // re-invoking on a completed output dir trains nothing and reproduces bytes
    const GridOutcome second = run_grid(config, 1);
    CHECK(second.executed == 0);
    CHECK(second.records.size() == 4);
    CHECK(read_text(dir_a / "runs.csv") == runs_a);

    // parallel execution into a fresh dir produces identical bytes
    const fs::path dir_b = fresh_dir("grid_b");
    ExperimentConfig parallel_config = tiny_config(dir_b.string());
    const GridOutcome third = run_grid(parallel_config, 4);
    CHECK(third.records.size() == 4);
    CHECK(read_text(dir_b / "runs.csv") == runs_a);

    // stats.json equality too
    write_stats_json((dir_a / "stats.json").string(), first.records);
    write_stats_json((dir_b / "stats.json").string(), third.records);
    CHECK(read_text(dir_a / "stats.json") == read_text(dir_b / "stats.json"));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("run_grid: missing dataset directory fails cleanly with no partial records") {
    const fs::path dir = fresh_dir("grid_missing");
    ExperimentConfig config = tiny_config(dir.string());
    config.dataset = "mnist";
    config.data_dir = (dir / "no_such_data").string();
    const GridOutcome outcome = run_grid(config, 1);
    CHECK(outcome.records.empty());
    CHECK(outcome.errors.size() == 4);
    for (const auto& e : outcome.errors) {
        CHECK(e.message.find("missing dataset file") != std::string::npos);
    }
    CHECK(fs::exists(dir / "errors.csv"));
    // no record.json anywhere
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        CHECK(entry.path().filename() != "record.json");
    }
    fs::remove_all(dir);
}

TEST_CASE("load_run_records: round-trips the grid records") {
    const fs::path dir = fresh_dir("grid_load");
    ExperimentConfig config = tiny_config(dir.string());
    const GridOutcome outcome = run_grid(config, 1);
    const auto loaded = load_run_records(dir.string());
    REQUIRE(loaded.size() == outcome.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].run_id == outcome.records[i].run_id);
        CHECK(loaded[i].effective_density == outcome.records[i].effective_density);
        CHECK(loaded[i].unpruned_count == outcome.records[i].unpruned_count);
        CHECK(loaded[i].baseline_val_loss == outcome.records[i].baseline_val_loss);
    }
    CHECK_THROWS_WITH_AS(load_run_records((dir / "nowhere").string()),
                         doctest::Contains("runs.csv"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("stats.json: seed-matched null-hypothesis rows and the 1x identity") {
    const fs::path dir = fresh_dir("grid_stats");
    ExperimentConfig config = tiny_config(dir.string());
    config.sizes = {0.5, 1.0};
    config.synthetic_dim = 12;
    const GridOutcome outcome = run_grid(config, 2);
    REQUIRE(outcome.records.size() == 4);

    const auto groups = compute_group_stats(outcome.records);
    REQUIRE(groups.size() == 1);
    const GroupStats& gs = groups[0];
    REQUIRE(gs.sizes.size() == 2);
    for (const SizeStats& ss : gs.sizes) {
        REQUIRE(ss.has_null);
        if (ss.size == 1.0) {
            // feeding a 1x run its own counterpart reproduces the observed ED
            CHECK(ss.null_mean == ss.observed_mean);
            CHECK(ss.null_std == ss.observed_std);
            REQUIRE(ss.has_t);
            CHECK(ss.t_vs_null.statistic == doctest::Approx(0.0));
            CHECK(ss.t_vs_null.p == doctest::Approx(1.0));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("figures: sibling CSV regenerates the SVG byte-for-byte") {
    const fs::path dir = fresh_dir("grid_figs");
    ExperimentConfig config = tiny_config(dir.string());
    config.init_schemes = {InitKind::Glorot, InitKind::He};
    const GridOutcome outcome = run_grid(config, 2);
    REQUIRE(!outcome.records.empty());

    const auto files = emit_report(outcome.records, dir.string());
    int figures_checked = 0;
    for (const std::string& file : files) {
        if (file.size() < 4 || file.substr(file.size() - 4) != ".svg") {
            continue;
        }
        const std::string csv_path = file.substr(0, file.size() - 4) + ".csv";
        REQUIRE(fs::exists(csv_path));
        // recover kind and slug from the file name: fig_<kind>_<slug>.svg
        const std::string stem = fs::path(file).stem().string().substr(4);
        const auto underscore = stem.find('_');
        const FigureTable reread =
            read_figure_csv(csv_path, stem.substr(0, underscore), stem.substr(underscore + 1));
        CHECK(render_figure_svg(reread) == read_text(file));
        ++figures_checked;
    }
    CHECK(figures_checked == 4);
    fs::remove_all(dir);
}

TEST_CASE("figures: KDE sibling CSV places the modes near separated ED groups") {
    // two sizes with disjoint ED ranges; the per-size KDE maxima must sit
    // near the respective sample means
    std::vector<RunRecord> records;
    const double ed_small[] = {0.82, 0.86, 0.84};
    const double ed_large[] = {0.30, 0.34, 0.32};
    const fs::path dir = fresh_dir("kde_modes");
    fs::create_directories(dir / "runs");
    int seed = 0;
    for (const double size : {0.1, 1.0}) {
        for (int i = 0; i < 3; ++i) {
            RunRecord r;
            r.run_id = "fake" + std::to_string(seed);
            r.spec = default_spec(Family::MLP, size);
            r.dataset = "synthetic";
            r.optimizer = OptimizerKind::SGD;
            r.init = InitKind::Glorot;
            r.init_seed = static_cast<std::uint64_t>(seed++);
            r.data_seed = 0;
            r.effective_density = size == 0.1 ? ed_small[i] : ed_large[i];
            r.unpruned_count =
                std::llround(r.effective_density * count_prunable_weights(r.spec));
            // minimal trajectory file so build_figures can read it
            PruneTrajectory t;
            t.run_id = r.run_id;
            for (int k = 0; k <= 50; ++k) {
                TrajectoryPoint p;
                p.cycle = k;
                p.density = 1.0 - 0.02 * k;
                p.val_accuracy = p.density > r.effective_density ? 0.95 : 0.5;
                p.val_loss = 1.0;
                t.cycles.push_back(p);
            }
            const fs::path run_dir = dir / "runs" / r.run_id;
            fs::create_directories(run_dir);
            write_trajectory_csv((run_dir / "trajectory.csv").string(), t);
            r.trajectory_path = "runs/" + r.run_id + "/trajectory.csv";
            records.push_back(std::move(r));
        }
    }
    const auto figures = build_figures(records, dir.string());
    const FigureTable* kde_fig = nullptr;
    for (const auto& f : figures) {
        if (f.kind == "kde") {
            kde_fig = &f;
        }
    }
    REQUIRE(kde_fig != nullptr);
    // find the argmax x per size from the table itself
    std::map<std::string, std::pair<double, double>> best;  // size -> (density, x)
    for (const auto& row : kde_fig->rows) {
        const double x = std::stod(row[1]);
        const double d = std::stod(row[2]);
        auto& b = best[row[0]];
        if (d > b.first) {
            b = {d, x};
        }
    }
    CHECK(best.at("0.1").second == doctest::Approx(0.84).epsilon(0.05));
    CHECK(best.at("1").second == doctest::Approx(0.32).epsilon(0.08));
    fs::remove_all(dir);
}

TEST_CASE("figures: absolute bars expose pruned-big vs unpruned-small comparisons") {
    // 1x records with ED such that unpruned(1x) > arch_total(0.1x)
    std::vector<RunRecord> records;
    const fs::path dir = fresh_dir("abs_bars");
    fs::create_directories(dir / "runs");
    int n = 0;
    for (const double size : {0.1, 1.0}) {
        for (int i = 0; i < 2; ++i) {
            RunRecord r;
            r.run_id = "bar" + std::to_string(n++);
            r.spec = default_spec(Family::MLP, size);
            r.dataset = "synthetic";
            r.optimizer = OptimizerKind::SGD;
            r.init = InitKind::Glorot;
            r.init_seed = static_cast<std::uint64_t>(i);
            r.data_seed = 0;
            r.effective_density = 0.433;
            r.unpruned_count = std::llround(0.433 * count_prunable_weights(r.spec));
            PruneTrajectory t;
            t.run_id = r.run_id;
            for (int k = 0; k <= 50; ++k) {
                t.cycles.push_back({k, 1.0 - 0.02 * k, 0.9, 0.5, 0});
            }
            const fs::path run_dir = dir / "runs" / r.run_id;
            fs::create_directories(run_dir);
            write_trajectory_csv((run_dir / "trajectory.csv").string(), t);
            r.trajectory_path = "runs/" + r.run_id + "/trajectory.csv";
            records.push_back(std::move(r));
        }
    }
    const auto figures = build_figures(records, dir.string());
    const FigureTable* abs_fig = nullptr;
    for (const auto& f : figures) {
        if (f.kind == "absolute") {
            abs_fig = &f;
        }
    }
    REQUIRE(abs_fig != nullptr);
    double small_total = 0.0, big_unpruned = 0.0;
    for (const auto& row : abs_fig->rows) {
        if (row[0] == "0.1") {
            small_total = std::stod(row[1]);
        }
        if (row[0] == "1") {
            big_unpruned = std::stod(row[2]);
        }
    }
    CHECK(big_unpruned > small_total);  // 115,265 > 23,920
    fs::remove_all(dir);
}

TEST_CASE("figures: a single run draws a line with no deviation band") {
    const fs::path dir = fresh_dir("single_run");
    ExperimentConfig config = tiny_config(dir.string());
    config.sizes = {0.1};
    config.init_seeds = {0};
    const GridOutcome outcome = run_grid(config, 1);
    REQUIRE(outcome.records.size() == 1);
    const auto figures = build_figures(outcome.records, dir.string());
    for (const auto& figure : figures) {
        if (figure.kind != "trajectory") {
            continue;
        }
        const std::string svg = render_figure_svg(figure);
        CHECK(svg.find("<polyline") != std::string::npos);
        CHECK(svg.find("<polygon") == std::string::npos);  // degenerate std: no band
    }
    fs::remove_all(dir);
}

TEST_CASE("emit_report: empty input is an error") {
    CHECK_THROWS(emit_report({}, "/tmp"));
}

TEST_CASE("untar: extracts regular files from a ustar stream") {
    // hand-built archive: one file "dir/hello.bin" of 5 bytes
    std::vector<std::uint8_t> tar(512 * 3, 0);
    const std::string name = "dir/hello.bin";
    std::copy(name.begin(), name.end(), tar.begin());
    const std::string size_octal = "00000000005";
    std::copy(size_octal.begin(), size_octal.end(), tar.begin() + 124);
    tar[156] = '0';
    const std::string payload = "hello";
    std::copy(payload.begin(), payload.end(), tar.begin() + 512);

    const auto entries = untar(tar);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].first == "dir/hello.bin");
    CHECK(entries[0].second == std::vector<std::uint8_t>{'h', 'e', 'l', 'l', 'o'});
}

TEST_CASE("dataset_present: synthetic always, files checked otherwise") {
    ExperimentConfig config = tiny_config("unused");
    CHECK(dataset_present(config));
    config.dataset = "mnist";
    config.data_dir = (fs::temp_directory_path() / "densitometer_nodata").string();
    CHECK_FALSE(dataset_present(config));
}
