#ifndef MSC_BENCH_HPP
#define MSC_BENCH_HPP

#include <msc/common.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace msc {

struct BenchRow {
    std::string method;
    int n = 0;
    int replicate = 0;
    double subspace_distance = 0;
    double wall_time_s = 0;
};

// Dictionary-recovery benchmark grids. gaussian-fig1 simulates the spatial
// Gaussian design and runs sp-msc / si-msc / ex-msc / omp-als; poisson-fig1
// simulates counts and runs ex-msc / omp-als (on log1p-transformed counts).
struct BenchConfig {
    std::string suite = "gaussian-fig1";
    int replicates = 1;
    std::vector<int> sizes = {100};
    std::uint64_t seed = 0;
    int threads = 1;  // parallelism across replicates; each fit is single-threaded

    int m = 40;
    int K = 10;   // 6 for poisson-fig1 unless overridden
    int d = 2;
    double snr = 2.0;
    double omega = 1.0 / 25.0;

    double tol = 1e-6;
    int max_iter = 120;
    int restarts = 2;  // per method; the best final likelihood / objective wins

    // Wall-clock values in the CSV are opt-in; the default 0 keeps identical
    // invocations byte-identical.
    bool timing = false;

    std::vector<std::string> methods;  // empty -> suite defaults
};

std::vector<std::string> bench_suite_methods(const std::string& suite);

std::vector<BenchRow> run_bench(const BenchConfig& cfg);

// CSV with header method,n,replicate,subspace_distance,wall_time_s.
void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

}  // namespace msc

#endif
