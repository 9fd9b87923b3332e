#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "densitometer/config.hpp"
#include "densitometer/run_record.hpp"

namespace densitometer {

struct RunError {
    std::string run_id;
    std::string message;
};

struct GridOutcome {
    std::vector<RunRecord> records;  // canonically sorted
    std::vector<RunError> errors;
    int executed = 0;  // cells trained in this invocation (resumed cells excluded)
};

// Stable run identifier: first 16 hex chars of SHA-256 over the canonical
// coordinate string of the cell.
std::string run_id_for(const ExperimentConfig& config, Family family, double size,
                       OptimizerKind optimizer, InitKind init, std::uint64_t init_seed,
                       std::uint64_t data_seed);

ModelSpec spec_for(const ExperimentConfig& config, Family family, double size);

// Execute every grid cell (build, train, checkpoint-select, prune, measure),
// skipping cells whose record.json already exists. Failures become RunError
// entries and the grid continues. Writes <output>/runs.csv (and errors.csv
// when anything failed).
GridOutcome run_grid(const ExperimentConfig& config, int threads = 1, std::ostream* log = nullptr);

void write_runs_csv(const std::string& path, const std::vector<RunRecord>& records);
void save_record_json(const std::string& path, const RunRecord& record);
RunRecord load_record_json(const std::string& path);

// Read runs.csv and the per-run record.json files under output_dir.
std::vector<RunRecord> load_run_records(const std::string& output_dir);

// Canonical ordering for runs.csv and all grouped reports.
void sort_records(std::vector<RunRecord>& records);

}  // namespace densitometer
