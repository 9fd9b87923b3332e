#pragma once

#include <vector>

#include "densitometer/rng.hpp"

namespace densitometer {

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    double entropy_tol = 1e-5;
};

struct TsneResult {
    std::vector<double> embedding;  // N x 2, row-major
    double initial_kl = 0.0;        // measured when early exaggeration ends
    double final_kl = 0.0;
};

// Conditional Gaussian affinities P_{j|i} with per-point bandwidths found by
// binary search so each row's entropy is log(perplexity) within tol. Exposed
// separately so the entropy contract can be verified against the rows.
std::vector<double> gaussian_affinities(const std::vector<double>& squared_distances, int n,
                                        double perplexity, double tol = 1e-5);

// Pairwise squared Euclidean distances of N row vectors of length dim.
std::vector<double> squared_distance_matrix(const std::vector<double>& rows, int n, int dim);

// Exact t-SNE to 2 dimensions: symmetrized Gaussian input affinities,
// Student-t output kernel, KL minimized by momentum gradient descent with
// early exaggeration and adaptive per-coordinate gains.
TsneResult tsne(const std::vector<std::vector<double>>& vectors, const TsneOptions& options,
                RngStream& stream);

}  // namespace densitometer
