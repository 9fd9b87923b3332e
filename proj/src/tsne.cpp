#include "densitometer/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace densitometer {

std::vector<double> squared_distance_matrix(const std::vector<double>& rows, int n, int dim) {
    std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double* a = rows.data() + static_cast<std::size_t>(i) * dim;
            const double* b = rows.data() + static_cast<std::size_t>(j) * dim;
            double s = 0.0;
            for (int k = 0; k < dim; ++k) {
                const double diff = a[k] - b[k];
                s += diff * diff;
            }
            d[static_cast<std::size_t>(i) * n + j] = s;
            d[static_cast<std::size_t>(j) * n + i] = s;
        }
    }
    return d;
}

std::vector<double> gaussian_affinities(const std::vector<double>& squared_distances, int n,
                                        double perplexity, double tol) {
    if (n < 2) {
        throw std::invalid_argument("gaussian_affinities: need at least 2 points");
    }
    const double target_entropy = std::log(perplexity);
    std::vector<double> p(static_cast<std::size_t>(n) * n, 0.0);

    for (int i = 0; i < n; ++i) {
        double beta = 1.0;
        double beta_min = -std::numeric_limits<double>::infinity();
        double beta_max = std::numeric_limits<double>::infinity();
        const double* di = squared_distances.data() + static_cast<std::size_t>(i) * n;
        double* pi = p.data() + static_cast<std::size_t>(i) * n;

        for (int iter = 0; iter < 200; ++iter) {
            // row distribution and its Shannon entropy at the current beta
            double sum_p = 0.0;
            for (int j = 0; j < n; ++j) {
                pi[j] = j == i ? 0.0 : std::exp(-beta * di[j]);
                sum_p += pi[j];
            }
            double sum_dp = 0.0;
            for (int j = 0; j < n; ++j) {
                sum_dp += di[j] * pi[j];
            }
            // an underflowed row means beta overshot: entropy is effectively -inf
            const double entropy = sum_p > 0.0
                                       ? std::log(sum_p) + beta * sum_dp / sum_p
                                       : -std::numeric_limits<double>::infinity();
            const double diff = entropy - target_entropy;
            if (std::abs(diff) < tol) {
                break;
            }
            if (diff > 0.0) {
                beta_min = beta;
                beta = std::isinf(beta_max) ? beta * 2.0 : (beta + beta_max) / 2.0;
            } else {
                beta_max = beta;
                beta = std::isinf(beta_min) ? beta / 2.0 : (beta + beta_min) / 2.0;
            }
        }
        // verify convergence: recompute entropy at the final beta
        double sum_p = 0.0, sum_dp = 0.0;
        for (int j = 0; j < n; ++j) {
            const double v = j == i ? 0.0 : std::exp(-beta * di[j]);
            sum_p += v;
            sum_dp += di[j] * v;
        }
        if (sum_p == 0.0) {
            throw std::invalid_argument(
                "gaussian_affinities: degenerate distances at point " + std::to_string(i));
        }
        const double entropy = std::log(sum_p) + beta * sum_dp / sum_p;
        if (std::abs(entropy - target_entropy) >= tol) {
            throw std::invalid_argument(
                "gaussian_affinities: entropy target unreachable at point " + std::to_string(i) +
                " (need perplexity < N-1; duplicates can also cause this)");
        }
        for (int j = 0; j < n; ++j) {
            pi[j] = j == i ? 0.0 : std::exp(-beta * di[j]) / sum_p;
        }
    }
    return p;
}

namespace {

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q, int n) {
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            const std::size_t idx = static_cast<std::size_t>(i) * n + j;
            const double pij = std::max(p[idx], 1e-12);
            const double qij = std::max(q[idx], 1e-12);
            kl += pij * std::log(pij / qij);
        }
    }
    return kl;
}

// Student-t output affinities; returns the normalizer sum.
double output_affinities(const std::vector<double>& y, int n, std::vector<double>& w,
                         std::vector<double>& q) {
    double sum_w = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = y[2 * static_cast<std::size_t>(i)] - y[2 * static_cast<std::size_t>(j)];
            const double dy =
                y[2 * static_cast<std::size_t>(i) + 1] - y[2 * static_cast<std::size_t>(j) + 1];
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[static_cast<std::size_t>(i) * n + j] = v;
            w[static_cast<std::size_t>(j) * n + i] = v;
            sum_w += 2.0 * v;
        }
        w[static_cast<std::size_t>(i) * n + i] = 0.0;
    }
    for (std::size_t k = 0; k < q.size(); ++k) {
        q[k] = w[k] / sum_w;
    }
    return sum_w;
}

}  // namespace

TsneResult tsne(const std::vector<std::vector<double>>& vectors, const TsneOptions& options,
                RngStream& stream) {
    const int n = static_cast<int>(vectors.size());
    if (n < 4) {
        throw std::invalid_argument("tsne: need at least 4 points, got " + std::to_string(n));
    }
    if (static_cast<double>(n) - 1.0 < 3.0 * options.perplexity) {
        throw std::invalid_argument("tsne: perplexity " + std::to_string(options.perplexity) +
                                    " too large for " + std::to_string(n) + " points");
    }
    if (options.iterations <= options.exaggeration_iters) {
        throw std::invalid_argument("tsne: iterations must exceed the early-exaggeration phase");
    }
    const int dim = static_cast<int>(vectors[0].size());
    std::vector<double> rows(static_cast<std::size_t>(n) * dim);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(vectors[static_cast<std::size_t>(i)].size()) != dim) {
            throw std::invalid_argument("tsne: ragged input vectors");
        }
        std::copy(vectors[static_cast<std::size_t>(i)].begin(), vectors[static_cast<std::size_t>(i)].end(),
                  rows.begin() + static_cast<std::size_t>(i) * dim);
    }

    const std::vector<double> dist = squared_distance_matrix(rows, n, dim);
    if (*std::max_element(dist.begin(), dist.end()) == 0.0) {
        throw std::invalid_argument("tsne: all input vectors are identical");
    }

    // symmetrized joint distribution
    const std::vector<double> cond = gaussian_affinities(dist, n, options.perplexity, options.entropy_tol);
    std::vector<double> p(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t ij = static_cast<std::size_t>(i) * n + j;
            const std::size_t ji = static_cast<std::size_t>(j) * n + i;
            p[ij] = (cond[ij] + cond[ji]) / (2.0 * n);
        }
    }

    std::vector<double> y(static_cast<std::size_t>(n) * 2);
    for (auto& v : y) {
        v = stream.next_gauss() * 1e-4;
    }
    std::vector<double> velocity(y.size(), 0.0);
    std::vector<double> gains(y.size(), 1.0);
    std::vector<double> grad(y.size(), 0.0);
    std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> q(static_cast<std::size_t>(n) * n, 0.0);

    // exaggerate P during the early phase
    for (auto& v : p) {
        v *= options.early_exaggeration;
    }

    TsneResult result;
    for (int iter = 0; iter < options.iterations; ++iter) {
        if (iter == options.exaggeration_iters) {
            for (auto& v : p) {
                v /= options.early_exaggeration;
            }
            output_affinities(y, n, w, q);
            result.initial_kl = kl_divergence(p, q, n);
        }
        output_affinities(y, n, w, q);

        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) {
                    continue;
                }
                const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                const double mult = 4.0 * (p[ij] - q[ij]) * w[ij];
                grad[2 * static_cast<std::size_t>(i)] +=
                    mult * (y[2 * static_cast<std::size_t>(i)] - y[2 * static_cast<std::size_t>(j)]);
                grad[2 * static_cast<std::size_t>(i) + 1] +=
                    mult *
                    (y[2 * static_cast<std::size_t>(i) + 1] - y[2 * static_cast<std::size_t>(j) + 1]);
            }
        }

        const double momentum =
            iter < options.momentum_switch_iter ? options.initial_momentum : options.final_momentum;
        for (std::size_t k = 0; k < y.size(); ++k) {
            // adaptive gains, floored at 0.01
            gains[k] = (grad[k] > 0.0) != (velocity[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
            gains[k] = std::max(gains[k], 0.01);
            velocity[k] = momentum * velocity[k] - options.learning_rate * gains[k] * grad[k];
            y[k] += velocity[k];
        }
        // re-center the embedding
        double mean_x = 0.0, mean_y = 0.0;
        for (int i = 0; i < n; ++i) {
            mean_x += y[2 * static_cast<std::size_t>(i)];
            mean_y += y[2 * static_cast<std::size_t>(i) + 1];
        }
        mean_x /= n;
        mean_y /= n;
        for (int i = 0; i < n; ++i) {
            y[2 * static_cast<std::size_t>(i)] -= mean_x;
            y[2 * static_cast<std::size_t>(i) + 1] -= mean_y;
        }
    }

    output_affinities(y, n, w, q);
    result.final_kl = kl_divergence(p, q, n);
    result.embedding = std::move(y);
    return result;
}

}  // namespace densitometer
