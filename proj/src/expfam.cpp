#include <msc/expfam.hpp>
#include <msc/gaussian.hpp>

#include <cmath>

namespace msc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double clamp_eta(double v) { return std::clamp(v, -kEtaClamp, kEtaClamp); }
}  // namespace

ExpFamilySpec ExpFamilySpec::from(Family f, int trials) {
    switch (f) {
        case Family::poisson: return {ExpFamily::poisson, 1};
        case Family::binomial: return {ExpFamily::binomial, trials};
        case Family::gaussian_expfam: return {ExpFamily::gaussian_identity, 1};
        default: throw std::invalid_argument("not an exponential-family fit");
    }
}

Vec inverse_link(const ExpFamilySpec& spec, const Vec& eta) {
    Vec mu(eta.size());
    switch (spec.family) {
        case ExpFamily::poisson:
            for (Eigen::Index l = 0; l < eta.size(); ++l) mu[l] = std::exp(clamp_eta(eta[l]));
            break;
        case ExpFamily::binomial:
            for (Eigen::Index l = 0; l < eta.size(); ++l) {
                double e = std::exp(clamp_eta(eta[l]));
                mu[l] = spec.trials * e / (1.0 + e);
            }
            break;
        case ExpFamily::gaussian_identity: mu = eta; break;
    }
    return mu;
}

Vec variance_function(const ExpFamilySpec& spec, const Vec& eta) {
    Vec v(eta.size());
    switch (spec.family) {
        case ExpFamily::poisson:
            for (Eigen::Index l = 0; l < eta.size(); ++l) v[l] = std::exp(clamp_eta(eta[l]));
            break;
        case ExpFamily::binomial:
            for (Eigen::Index l = 0; l < eta.size(); ++l) {
                double e = std::exp(clamp_eta(eta[l]));
                double p = e / (1.0 + e);
                v[l] = spec.trials * p * (1.0 - p);
            }
            break;
        case ExpFamily::gaussian_identity: v.setOnes(); break;
    }
    return v;
}

double expfam_kernel(const ExpFamilySpec& spec, const Vec& x, const Vec& eta) {
    double acc = 0;
    switch (spec.family) {
        case ExpFamily::poisson:
            for (Eigen::Index l = 0; l < x.size(); ++l) {
                double e = clamp_eta(eta[l]);
                acc += x[l] * e - std::exp(e);
            }
            break;
        case ExpFamily::binomial:
            for (Eigen::Index l = 0; l < x.size(); ++l) {
                double e = clamp_eta(eta[l]);
                acc += x[l] * e - spec.trials * softplus(e);
            }
            break;
        case ExpFamily::gaussian_identity:
            for (Eigen::Index l = 0; l < x.size(); ++l) acc += x[l] * eta[l] - 0.5 * eta[l] * eta[l];
            break;
    }
    return acc;
}

double log_density_expfam(const ExpFamilySpec& spec, const Vec& x, const Vec& eta) {
    if (x.size() != eta.size()) throw std::invalid_argument("log_density_expfam: size mismatch");
    double base = 0;
    switch (spec.family) {
        case ExpFamily::poisson:
            for (Eigen::Index l = 0; l < x.size(); ++l) {
                if (x[l] < 0) throw std::invalid_argument("poisson counts must be nonnegative");
                base -= std::lgamma(x[l] + 1.0);
            }
            break;
        case ExpFamily::binomial:
            for (Eigen::Index l = 0; l < x.size(); ++l) {
                if (x[l] < 0 || x[l] > spec.trials)
                    throw std::invalid_argument("binomial counts must lie in [0, trials]");
                base += std::lgamma(spec.trials + 1.0) - std::lgamma(x[l] + 1.0) -
                        std::lgamma(spec.trials - x[l] + 1.0);
            }
            break;
        case ExpFamily::gaussian_identity:
            base = -0.5 * (static_cast<double>(x.size()) * kLog2Pi + x.squaredNorm());
            break;
    }
    return base + expfam_kernel(spec, x, eta);
}

Vec irls_alpha_update(const ExpFamilySpec& spec, const Vec& x, const Mat& D,
                      const SupportMask& mask, const Vec& alpha_curr, double ridge) {
    if (mask.popcount() > D.rows())
        throw std::invalid_argument("irls_alpha_update: support wider than m");

    Vec eta = D * alpha_curr;
    for (Eigen::Index l = 0; l < eta.size(); ++l) eta[l] = clamp_eta(eta[l]);

    Vec wdiag = variance_function(spec, eta);
    for (Eigen::Index l = 0; l < wdiag.size(); ++l) wdiag[l] = std::max(wdiag[l], 1e-10);
    if (wdiag.maxCoeff() <= 1e-10 && spec.family != ExpFamily::gaussian_identity) {
        // all weights at the floor: the linearization carries no information
        throw degenerate_signal_error(-1, "irls: all-zero working weights");
    }

    Vec mu = inverse_link(spec, eta);
    Vec xstar = eta + (x - mu).cwiseQuotient(wdiag);  // B == W for canonical links

    Mat WD = wdiag.asDiagonal() * D;
    Mat G = D.transpose() * WD;
    Vec b = WD.transpose() * xstar;
    Vec cand = wls_solve_masked(G, b, mask, ridge);

    // Step-halving toward the current point: one damped Newton step never descends.
    const double q_old = expfam_kernel(spec, x, D * alpha_curr);
    for (int t = 0; t < 30; ++t) {
        if (expfam_kernel(spec, x, D * cand) >= q_old) return cand;
        cand = alpha_curr + 0.5 * (cand - alpha_curr);
    }
    return alpha_curr;
}

std::optional<Vec> score_dictionary_column(int k, const Dataset& data, const MixtureState& st,
                                           const Mat& W) {
    const ExpFamilySpec spec = ExpFamilySpec::from(st.family, st.trials);
    std::vector<int> used;
    for (int j = 0; j < st.J(); ++j)
        if (st.supports.masks[static_cast<std::size_t>(j)].test(k)) used.push_back(j);
    if (used.empty()) return std::nullopt;

    Vec score = Vec::Zero(data.m());
    for (int i = 0; i < data.n(); ++i)
        for (int j : used) {
            const double wij = W(i, j);
            if (wij <= 0) continue;
            const Vec& a = st.coeffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double c = a[k];
            if (std::abs(c) <= 1e-9 * a.cwiseAbs().maxCoeff()) continue;
            Vec eta = st.eta(i, j);
            score += wij * c * (data.X.col(i) - inverse_link(spec, eta));
        }
    return score;
}

double column_q_slice(int k, const Dataset& data, const MixtureState& st, const Mat& W) {
    const ExpFamilySpec spec = ExpFamilySpec::from(st.family, st.trials);
    double q = 0;
    for (int i = 0; i < data.n(); ++i)
        for (int j = 0; j < st.J(); ++j) {
            if (!st.supports.masks[static_cast<std::size_t>(j)].test(k)) continue;
            const double wij = W(i, j);
            if (wij <= 0) continue;
            q += wij * expfam_kernel(spec, data.X.col(i), st.eta(i, j));
        }
    return q;
}

double bb_step_size(const Vec& d_prev, const Vec& d_curr, const Vec& U_prev, const Vec& U_curr) {
    const Vec du = U_curr - U_prev;
    const double denom = du.squaredNorm();
    if (denom < 1e-20) return kBbFallbackStep;
    const double tau = (d_curr - d_prev).dot(du) / denom;
    if (!std::isfinite(tau) || tau <= 0) return kBbFallbackStep;
    return tau;
}

bool gradient_update_column(int k, const Dataset& data, MixtureState& st, const Mat& W,
                            BBHistory& hist, bool* rejected) {
    if (rejected) *rejected = false;
    auto score = score_dictionary_column(k, data, st, W);
    if (!score) return false;

    const Vec d_curr = st.dict.atoms.col(k);
    double tau = kBbFallbackStep;
    if (hist.valid) tau = bb_step_size(hist.d_prev, d_curr, hist.U_prev, *score);
    if (tau == kBbFallbackStep) tau = hist.fallback;
    hist.valid = true;
    hist.d_prev = d_curr;
    hist.U_prev = *score;

    const double q_before = column_q_slice(k, data, st, W);
    const Vec cand = d_curr + tau * (*score);

    st.dict.atoms.col(k) = cand;  // coefficients untouched: try the raw step
    const double q_after = column_q_slice(k, data, st, W);
    if (q_after < q_before || !(cand.norm() > 1e-300)) {
        st.dict.atoms.col(k) = d_curr;
        hist.fallback = std::max(tau / 2.0, 1e-14);
        if (rejected) *rejected = true;
        return true;
    }
    st.dict.atoms.col(k) = d_curr;
    set_column_normalized(st, k, cand);
    hist.fallback = kBbFallbackStep;
    return true;
}

}  // namespace msc
