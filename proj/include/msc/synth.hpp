#ifndef MSC_SYNTH_HPP
#define MSC_SYNTH_HPP

#include <msc/types.hpp>

#include <cstdint>

namespace msc {

// Mixture generator layout: dictionary entries U[0,1] with normalized
// columns, one coefficient vector per component from U[coef_lo, coef_hi],
// components uniform over every support with 1 <= popcount <= d.
struct SimSpec {
    Family family = Family::gaussian_simple;
    int n = 100;
    int m = 100;
    int K = 30;
    int d = 2;
    double snr = 2.0;  // Gaussian families only
    CorrKernel kernel = CorrKernel::exponential;
    double omega = 1.0 / 25.0;  // spatial only
    double coef_lo = 1.0;
    double coef_hi = 10.0;
    std::uint64_t seed = 0;
    // Poisson: keep the literal U[1,10] coefficients even when the natural
    // parameter overflows the count scale (default rescales to max eta <= 8).
    bool raw_scale = false;
};

struct SimTruth {
    Dictionary dict;
    SupportSet supports;            // all J components
    Mat alpha;                      // K x J, per-component coefficients
    std::vector<int> assignment;    // component index per signal
    Vec sigma2;                     // per component (Gaussian families)
    double omega = 0;               // common spatial parameter
};

std::pair<Dataset, SimTruth> simulate_gaussian(const SimSpec& spec);
std::pair<Dataset, SimTruth> simulate_poisson(const SimSpec& spec);

// Normalized projection-Frobenius distance between column spans:
// ||P_a - P_b||_F / sqrt(2 max(K_a, K_b)), P from rank-revealing QR.
// 0 for equal spans, 1 for orthogonal spans of equal, full dimension.
double subspace_distance(const Mat& Da, const Mat& Db);

double mse(const Mat& a, const Mat& b);
// 10 log10(peak^2 / MSE); +inf when the inputs agree exactly.
double psnr(const Mat& a, const Mat& b, double peak);

// One draw of a mean-zero Gaussian field with covariance
// sigma2 * kernel(omega, distances) over the given locations.
Vec gaussian_field(const Mat& locations, CorrKernel kernel, double omega, double sigma2,
                   Rng& rng);

}  // namespace msc

#endif
