#ifndef MSC_BASELINE_HPP
#define MSC_BASELINE_HPP

#include <msc/types.hpp>

#include <cstdint>
#include <vector>

namespace msc {

struct BaselineConfig {
    int K = 10;
    int d = 2;        // target sparsity per signal
    int iters = 30;   // outer alternations
    std::uint64_t seed = 0;
};

// Greedy orthogonal matching pursuit with a full least-squares refit per
// step; at most d atoms, re-embedded into a length-K vector.
Vec omp_encode(const Vec& x, const Mat& D, int d);

struct BaselineResult {
    Dictionary dict;
    Mat coeffs;                         // K x n
    std::vector<double> objective;      // mean squared error per outer iteration
};

// OMP encoding alternated with per-atom least-squares updates. The squared
// error at fixed d never increases across outer iterations.
BaselineResult baseline_fit(const Dataset& data, const BaselineConfig& cfg);

}  // namespace msc

#endif
