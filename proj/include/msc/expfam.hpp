#ifndef MSC_EXPFAM_HPP
#define MSC_EXPFAM_HPP

#include <msc/types.hpp>

namespace msc {

// Exponential-family member with canonical link. gaussian_identity exists
// because the framework subsumes the unit-variance Gaussian; count data use
// poisson/binomial with dispersion fixed to 1.
enum class ExpFamily { poisson, binomial, gaussian_identity };

struct ExpFamilySpec {
    ExpFamily family = ExpFamily::poisson;
    int trials = 1;  // binomial only

    static ExpFamilySpec from(Family f, int trials);
};

// Natural parameters are clamped to this window before exponentiation;
// a model restriction, not an error.
inline constexpr double kEtaClamp = 30.0;

// Mean g(eta): exp, trials*logistic, or identity by family. Componentwise.
Vec inverse_link(const ExpFamilySpec& spec, const Vec& eta);

// Full log density including the base measure.
double log_density_expfam(const ExpFamilySpec& spec, const Vec& x, const Vec& eta);

// eta'x - A(eta): the part of the log density that depends on parameters.
// This is what the M-step slices ascend.
double expfam_kernel(const ExpFamilySpec& spec, const Vec& x, const Vec& eta);

// Variance function A''(eta) (== the IRLS weight and the link derivative for
// canonical links with unit dispersion).
Vec variance_function(const ExpFamilySpec& spec, const Vec& eta);

// One IRLS step from alpha_curr on the selected atoms, re-embedded to length
// K. The step is halved toward alpha_curr while it decreases the per-signal
// objective, so a single call never descends.
Vec irls_alpha_update(const ExpFamilySpec& spec, const Vec& x, const Mat& D,
                      const SupportMask& mask, const Vec& alpha_curr, double ridge = 1e-8);

// Score of the expected complete-data objective with respect to dictionary
// column k: sum over components containing atom k of w * c * (x - g(eta)).
// Returns nullopt when no component uses the atom.
std::optional<Vec> score_dictionary_column(int k, const Dataset& data, const MixtureState& st,
                                           const Mat& W);

// Objective slice affected by column k (used to accept/reject ascent steps).
double column_q_slice(int k, const Dataset& data, const MixtureState& st, const Mat& W);

inline constexpr double kBbFallbackStep = 1e-3;

// Barzilai-Borwein step; falls back to kBbFallbackStep when there is no
// usable curvature information (first iteration, vanishing or non-positive
// ratio, non-finite values).
double bb_step_size(const Vec& d_prev, const Vec& d_curr, const Vec& U_prev, const Vec& U_curr);

struct BBHistory {
    bool valid = false;
    Vec d_prev;
    Vec U_prev;
    // Adaptive fallback scale: a rejected step halves it, an accepted one
    // resets it. Without this, a rejected column never moves again (the zero
    // displacement forces the fallback, whose fixed size is what was just
    // rejected).
    double fallback = kBbFallbackStep;
};

// One gradient-ascent step on column k with a BB step size, rejected (column
// kept) if the objective slice would decrease. The accepted column is
// renormalized with the scale absorbed into the coefficients. Returns false
// when the atom is unused, true otherwise; *rejected reports a kept column.
bool gradient_update_column(int k, const Dataset& data, MixtureState& st, const Mat& W,
                            BBHistory& hist, bool* rejected);

}  // namespace msc

#endif
