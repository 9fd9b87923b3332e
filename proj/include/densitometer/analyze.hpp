#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "densitometer/config.hpp"
#include "densitometer/run_record.hpp"

namespace densitometer {

struct AnalyzeSelection {
    bool overlap = true;
    bool tsne = true;
    bool selectivity = true;
};

// Mechanism probes over completed runs:
//  - overlap.csv: per run and layer, bottom-40% magnitude overlap between the
//    deterministically rebuilt init network and the trained checkpoint, in
//    both normalizations
//  - embedding.csv: t-SNE of validation correctness vectors, grouped by
//    (dataset, family, optimizer, data_seed)
//  - selectivity.csv: per ReLU unit, Hoyer sparsity over the validation set
//    and CCMAS class selectivity
// Returns the emitted file paths.
std::vector<std::string> run_analysis(const ExperimentConfig& config,
                                      const std::vector<RunRecord>& records,
                                      const AnalyzeSelection& what, std::ostream& log);

}  // namespace densitometer
