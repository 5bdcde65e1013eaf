#ifndef MSC_GAUSSIAN_HPP
#define MSC_GAUSSIAN_HPP

#include <msc/spatial.hpp>
#include <msc/types.hpp>

#include <optional>

namespace msc {

// log N(x | eta, sigma2 * I).
double log_density_gaussian_simple(const Vec& x, const Vec& eta, double sigma2);

// log N(x | eta, sigma2 * R) with R supplied through its factor; the
// log-determinant comes from the factor, never from an explicit inverse.
double log_density_gaussian(const Vec& x, const Vec& eta, const PrecisionFactor& Rfac,
                            double sigma2);

inline constexpr double kSigma2Floor = 1e-12;
inline constexpr double kRidge = 1e-8;

// sigma2 <- 1/m sum_j w_j ||x - eta_j||^2, floored at kSigma2Floor.
// etas holds component means as columns, w the responsibility row.
double update_sigma2_simple(const Vec& x, const Mat& etas, const Vec& w,
                            double floor_at = kSigma2Floor);

// Spatial variant with the R^{-1}-weighted quadratic form.
double update_sigma2_spatial(const Vec& x, const Mat& etas, const Vec& w,
                             const PrecisionFactor& Rfac, double floor_at = kSigma2Floor);

// Weighted least squares on the selected atoms, re-embedded into a length-K
// vector with exact zeros off support. Omega = nullptr means identity
// precision. Ridge jitter is applied when the Gram matrix loses rank.
Vec update_alpha_wls(const Vec& x, const Mat& D, const SupportMask& mask,
                     const PrecisionFactor* R_half = nullptr, double ridge = kRidge);

// Same solve from precomputed Gram pieces G = D' Omega D (K x K) and
// b = D' Omega x; this is the path the EM driver uses.
Vec wls_solve_masked(const Mat& G, const Vec& b, const SupportMask& mask, double ridge = kRidge);

// Block-coordinate-descent target for dictionary column k: the minimizer of
// the quadratic objective over d_k with everything else fixed, before
// renormalization. Returns nullopt when no component uses atom k.
// Rinv gives each signal's dense R^{-1} (nullptr -> identity); sigma2 scaling
// is taken from the state's per-signal noise.
std::optional<Vec> dictionary_column_target(int k, const Dataset& data, const MixtureState& st,
                                            const Mat& W, const std::vector<Mat>* Rinv,
                                            double ridge = kRidge);

// Replaces column k, renormalizes it to unit norm, and pushes the scale into
// every on-support coefficient so that all eta_ij are unchanged.
void set_column_normalized(MixtureState& st, int k, const Vec& column);

// Expected complete-data objective: sum_ij w_ij (log pi_j + log density).
// Rfacs gives per-signal correlation factors for the spatial family
// (nullptr -> simple model).
double q_function_gaussian(const Dataset& data, const MixtureState& st, const Mat& W,
                           const std::vector<PrecisionFactor>* Rfacs = nullptr);

}  // namespace msc

#endif
