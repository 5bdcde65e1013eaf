#ifndef MSC_COMMON_HPP
#define MSC_COMMON_HPP

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace msc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Model family of a fit. gaussian_expfam runs continuous data through the
// exponential-family machinery with unit dispersion (benchmark comparator).
enum class Family { gaussian_simple, gaussian_spatial, poisson, binomial, gaussian_expfam };

enum class CorrKernel { exponential, gaussian, autoregressive };

inline bool is_gaussian(Family f) {
    return f == Family::gaussian_simple || f == Family::gaussian_spatial;
}
inline bool is_count_family(Family f) {
    return f == Family::poisson || f == Family::binomial;
}
inline bool is_expfam_fit(Family f) {
    return f == Family::poisson || f == Family::binomial || f == Family::gaussian_expfam;
}

const char* family_name(Family f);
Family family_from_name(const std::string& s);
const char* kernel_name(CorrKernel k);
CorrKernel kernel_from_name(const std::string& s);

// A linear-algebra failure (non-PD matrix, factorization breakdown).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A signal whose likelihood collapsed (all-zero responsibilities, -inf densities).
struct degenerate_signal_error : std::runtime_error {
    int signal;
    degenerate_signal_error(int signal_index, const std::string& what)
        : std::runtime_error(what), signal(signal_index) {}
};

using Rng = std::mt19937_64;

// Shortest round-trip decimal formatting; keeps file formats byte-stable.
inline std::string fmt_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw std::invalid_argument("bad number: " + std::string(s));
    return v;
}

// Runs fn(i) for i in [0, count). Each index writes only its own output slots,
// so results are identical for any thread count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace msc

#endif
