#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "densitometer/run_record.hpp"

namespace densitometer {

// p-values smaller than this are reported as "<1e-12" with the flag set
constexpr double kPValueFloor = 1e-12;

struct DensitySample {
    std::uint64_t init_seed = 0;
    std::uint64_t data_seed = 0;
    double density = 0.0;
};

// All effective densities observed for one (family, optimizer, size) cell.
struct DensityGroup {
    Family family = Family::MLP;
    OptimizerKind optimizer = OptimizerKind::SGD;
    double size = 1.0;
    std::vector<DensitySample> samples;

    std::vector<double> values() const {
        std::vector<double> v;
        v.reserve(samples.size());
        for (const auto& s : samples) {
            v.push_back(s.density);
        }
        return v;
    }
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n-1)
};

Summary summarize(std::span<const double> values);
Summary summarize(const DensityGroup& group);

struct TestResult {
    std::string kind;  // "anova-oneway" | "t-unpaired"
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p = 1.0;
    bool p_below_floor = false;

    std::string p_display() const;
};

// Classical one-way ANOVA: F = MSB/MSW with df (k-1, N-k); upper-tail p via
// the regularized incomplete beta function.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

// Student's equal-variance unpaired t-test, two-tailed.
TestResult t_test_unpaired(std::span<const double> a, std::span<const double> b);

// Counterfactual density for `target` if its absolute unpruned count equaled
// its seed-matched size-1 counterpart's, capped at 1.
double null_hypothesis_density(const RunRecord& target, const RunRecord& counterpart_1x);

// Gaussian-kernel mixture evaluated at the grid points. Empty bandwidth means
// Silverman's rule.
std::vector<double> kde(std::span<const double> samples, std::span<const double> grid,
                        std::optional<double> bandwidth = std::nullopt);

// 1.06 * sample std * n^(-1/5)
double silverman_bandwidth(std::span<const double> samples);

// I_x(a,b), continued-fraction evaluation, absolute error < 1e-10.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace densitometer
