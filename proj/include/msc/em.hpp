#ifndef MSC_EM_HPP
#define MSC_EM_HPP

#include <msc/expfam.hpp>
#include <msc/types.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace msc {

// Rejection-control threshold schedule: c0 for the warmup iterations, then
// geometric decay floored at c_min. c0 = 0 disables rejection control.
struct RcSchedule {
    double c0 = 0.9;
    int warmup = 3;
    double decay = 0.5;
    double c_min = 1e-3;
};

struct FitConfig {
    int K = 10;
    int d_max = 2;
    Family family = Family::gaussian_simple;
    CorrKernel kernel = CorrKernel::exponential;
    int trials = 1;  // binomial

    RcSchedule rc;
    double tol = 1e-6;  // relative log-likelihood change
    int max_iter = 200;
    std::uint64_t seed = 0;

    double ridge = 1e-8;
    double nugget = 1e-8;
    double sigma2_floor = 1e-12;
    // fit_msc additionally floors per-signal variances at this fraction of
    // the median initial residual variance; a signal whose variance estimate
    // collapses would otherwise capture dictionary columns through its
    // 1/sigma2 weight. The floor is fixed at initialization, so flooring
    // stays a boundary projection and EM ascent is unaffected.
    double sigma2_floor_rel = 0.1;
    double omega_lo = 0;  // 0 -> kernel default bounds
    double omega_hi = 0;

    int threads = 1;

    // Oracle mode: expand the full previous support set and never prune, so
    // small instances enumerate every d-sparse combination.
    bool exhaustive = false;

    // When false, all sparsity levels up to d_max are fitted and the d_max
    // model is returned; BIC values are still recorded per level. Benchmarks
    // compare fixed-sparsity fits this way.
    bool stop_on_bic_increase = true;

    std::string echo() const;  // canonical key=value line, round-trip stable
};

struct TraceRow {
    int d;
    int iter;  // 0 is the loglik of the initial state at this level
    double loglik;
};

struct FitDiagnostics {
    long newton_rejections = 0;
    long bb_rejections = 0;
    long atom_reinits = 0;
    std::vector<int> support_sizes_entering;  // |S(d)| entering EM, per level
    std::vector<int> support_sizes;           // |S(d)| after pruning, per level
    bool stopped_by_bic = false;
};

struct FitResult {
    MixtureState state;
    int chosen_d = 1;
    std::vector<double> bic_values;  // one per tried d
    std::vector<TraceRow> trace;
    std::vector<int> assignments;  // argmax_j w_ij per signal
    FitDiagnostics diag;
    std::string config_echo;
};

double threshold_schedule(int iter, const FitConfig& cfg);

double bic(double loglik, long long q, int n, int m);

// Posterior responsibilities, computed in log space with a max shift.
Mat e_step(const Dataset& data, const MixtureState& st, const FitConfig& cfg);

// Stochastic thresholding alone: entries above c kept, entries w <= c set to
// c with probability w/c and to 0 otherwise. Entrywise unbiased.
Mat rejection_control_raw(const Mat& W, double c, Rng& rng);

// Thresholding plus row renormalization; rows that zero out entirely are
// restored. c = 0 is the identity.
Mat rejection_control(const Mat& W, double c, Rng& rng);

// One full M-step: pi, then the family-specific parameter updates, then
// removal of vanished components and reinitialization of unused atoms.
// bb carries per-column step history across iterations (expfam only).
MixtureState m_step(const Dataset& data, const Mat& Wstar, const MixtureState& st,
                    const FitConfig& cfg, std::vector<BBHistory>* bb = nullptr,
                    FitDiagnostics* diag = nullptr);

double log_likelihood(const Dataset& data, const MixtureState& st, const FitConfig& cfg);

struct EmRun {
    MixtureState state;
    std::vector<double> trace;  // trace[0] is the initial log-likelihood
};

// EM at fixed sparsity until the relative log-likelihood change drops below
// tol or max_iter is hit. Under a stochastic schedule the best iterate is
// returned; with c = 0 throughout, the last.
EmRun run_em_fixed_d(const Dataset& data, const MixtureState& st0, const FitConfig& cfg, Rng& rng,
                     FitDiagnostics* diag = nullptr);

// The full sequential-sparsity fit: S(1) = {e_j}, EM, argmax pruning,
// expansion, BIC stop at the first increase.
FitResult fit_msc(const Dataset& data, const FitConfig& cfg);

// The initial level-1 state fit_msc starts from (exposed for oracle tests
// that must share the initialization). residual_scale, when given, receives
// the median per-signal one-atom residual variance.
MixtureState init_state_level1(const Dataset& data, const FitConfig& cfg, Rng& rng,
                               double* residual_scale = nullptr);

}  // namespace msc

#endif
