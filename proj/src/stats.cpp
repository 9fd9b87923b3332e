#include "densitometer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace densitometer {

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

// continued fraction for the incomplete beta function, modified Lentz
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) {
        d = kFpMin;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) {
            d = kFpMin;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) {
            c = kFpMin;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) {
            d = kFpMin;
        }
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) {
            c = kFpMin;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            return h;
        }
    }
    throw std::runtime_error("regularized_incomplete_beta: continued fraction did not converge");
}

// two-tailed p for a t statistic with df degrees of freedom
double t_two_tailed_p(double t, double df) {
    if (!std::isfinite(t)) {
        return 0.0;
    }
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

// upper tail of the F distribution
double f_upper_tail_p(double f, double d1, double d2) {
    if (!std::isfinite(f)) {
        return 0.0;
    }
    if (f <= 0.0) {
        return 1.0;
    }
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

void apply_floor(TestResult& r) {
    if (r.p < kPValueFloor) {
        r.p = kPValueFloor;
        r.p_below_floor = true;
    }
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("regularized_incomplete_beta: a and b must be positive");
    }
    if (x < 0.0 || x > 1.0) {
        throw std::invalid_argument("regularized_incomplete_beta: x must be in [0,1]");
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (x == 1.0) {
        return 1.0;
    }
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

Summary summarize(std::span<const double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("summarize: need at least 2 samples for a standard deviation, got " +
                                    std::to_string(values.size()));
    }
    const double m = mean_of(values);
    double ss = 0.0;
    for (const double x : values) {
        const double d = x - m;
        ss += d * d;
    }
    return {m, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

Summary summarize(const DensityGroup& group) {
    for (std::size_t i = 0; i < group.samples.size(); ++i) {
        for (std::size_t j = i + 1; j < group.samples.size(); ++j) {
            if (group.samples[i].init_seed == group.samples[j].init_seed &&
                group.samples[i].data_seed == group.samples[j].data_seed) {
                throw std::invalid_argument("summarize: duplicate (init_seed, data_seed) pair in group");
            }
        }
    }
    return summarize(group.values());
}

std::string TestResult::p_display() const {
    if (p_below_floor) {
        return "<1e-12";
    }
    std::ostringstream os;
    os << p;
    return os.str();
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) {
        throw std::invalid_argument("anova_oneway: need at least 2 groups");
    }
    std::size_t total_n = 0;
    for (const auto& g : groups) {
        if (g.size() < 2) {
            throw std::invalid_argument("anova_oneway: every group needs at least 2 samples");
        }
        total_n += g.size();
    }
    const double k = static_cast<double>(groups.size());
    const double n = static_cast<double>(total_n);

    double grand_sum = 0.0;
    for (const auto& g : groups) {
        for (const double x : g) {
            grand_sum += x;
        }
    }
    const double grand_mean = grand_sum / n;

    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        const double m = mean_of(g);
        const double dm = m - grand_mean;
        ssb += static_cast<double>(g.size()) * dm * dm;
        for (const double x : g) {
            const double d = x - m;
            ssw += d * d;
        }
    }

    TestResult result;
    result.kind = "anova-oneway";
    result.df1 = k - 1.0;
    result.df2 = n - k;
    if (ssw == 0.0 && ssb == 0.0) {
        throw std::invalid_argument("anova_oneway: all samples identical, F undefined");
    }
    if (ssw == 0.0) {
        // zero within-group variance with nonzero between: off the F scale
        result.statistic = std::numeric_limits<double>::infinity();
        result.p = kPValueFloor;
        result.p_below_floor = true;
        return result;
    }
    const double msb = ssb / result.df1;
    const double msw = ssw / result.df2;
    result.statistic = msb / msw;
    result.p = f_upper_tail_p(result.statistic, result.df1, result.df2);
    apply_floor(result);
    return result;
}

TestResult t_test_unpaired(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::invalid_argument("t_test_unpaired: both samples need at least 2 values");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double ssa = 0.0, ssb = 0.0;
    for (const double x : a) {
        ssa += (x - ma) * (x - ma);
    }
    for (const double x : b) {
        ssb += (x - mb) * (x - mb);
    }
    TestResult result;
    result.kind = "t-unpaired";
    result.df1 = na + nb - 2.0;
    result.df2 = 0.0;
    const double pooled = (ssa + ssb) / result.df1;
    if (pooled == 0.0) {
        if (ma == mb) {
            result.statistic = 0.0;
            result.p = 1.0;
        } else {
            result.statistic = ma > mb ? std::numeric_limits<double>::infinity()
                                       : -std::numeric_limits<double>::infinity();
            result.p = kPValueFloor;
            result.p_below_floor = true;
        }
        return result;
    }
    result.statistic = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    result.p = t_two_tailed_p(result.statistic, result.df1);
    apply_floor(result);
    return result;
}

double null_hypothesis_density(const RunRecord& target, const RunRecord& counterpart_1x) {
    const auto mismatch = [&](const char* what) {
        throw std::invalid_argument(std::string("null_hypothesis_density: runs differ in ") + what);
    };
    if (target.spec.family != counterpart_1x.spec.family) {
        mismatch("family");
    }
    if (target.optimizer != counterpart_1x.optimizer) {
        mismatch("optimizer");
    }
    if (target.init != counterpart_1x.init) {
        mismatch("init scheme");
    }
    if (target.init_seed != counterpart_1x.init_seed) {
        mismatch("init_seed");
    }
    if (target.data_seed != counterpart_1x.data_seed) {
        mismatch("data_seed");
    }
    if (counterpart_1x.spec.size != 1.0) {
        throw std::invalid_argument("null_hypothesis_density: counterpart must have size 1");
    }
    const double proportion = static_cast<double>(counterpart_1x.unpruned_count) /
                              static_cast<double>(count_prunable_weights(target.spec));
    return std::min(1.0, proportion);
}

double silverman_bandwidth(std::span<const double> samples) {
    const Summary s = summarize(samples);
    // roundoff-only spread counts as zero variance
    if (s.stddev <= 1e-12 * std::max(1.0, std::abs(s.mean))) {
        throw std::invalid_argument(
            "silverman_bandwidth: zero variance; pass an explicit bandwidth instead");
    }
    return 1.06 * s.stddev * std::pow(static_cast<double>(samples.size()), -0.2);
}

std::vector<double> kde(std::span<const double> samples, std::span<const double> grid,
                        std::optional<double> bandwidth) {
    if (samples.empty()) {
        throw std::invalid_argument("kde: need at least one sample");
    }
    double h = 0.0;
    if (bandwidth.has_value()) {
        h = *bandwidth;
        if (!(h > 0.0)) {
            throw std::invalid_argument("kde: bandwidth must be positive");
        }
    } else {
        if (samples.size() < 2) {
            throw std::invalid_argument("kde: automatic bandwidth needs >= 2 samples; pass one explicitly");
        }
        h = silverman_bandwidth(samples);
    }
    constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
    std::vector<double> out;
    out.reserve(grid.size());
    const double norm = kInvSqrt2Pi / (h * static_cast<double>(samples.size()));
    for (const double x : grid) {
        double acc = 0.0;
        for (const double s : samples) {
            const double z = (x - s) / h;
            acc += std::exp(-0.5 * z * z);
        }
        out.push_back(acc * norm);
    }
    return out;
}

}  // namespace densitometer
