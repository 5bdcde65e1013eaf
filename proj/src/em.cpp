#include <msc/em.hpp>
#include <msc/gaussian.hpp>
#include <msc/spatial.hpp>
#include <msc/support.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace msc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

KernelBounds bounds_from(const FitConfig& cfg) {
    KernelBounds b = default_omega_bounds(cfg.kernel);
    if (cfg.omega_lo > 0) b.lo = cfg.omega_lo;
    if (cfg.omega_hi > 0) b.hi = cfg.omega_hi;
    return b;
}

// Per-signal quadratic-form pieces for the Gaussian families. With the Gram
// pieces G = D' R^{-1} D, b = D' R^{-1} x and xx = x' R^{-1} x, the residual
// quadratic form of any component is xx - 2 a'b + a'G a because the
// coefficient vectors are exactly zero off support.
struct GaussCache {
    bool spatial = false;
    std::vector<double> omega;  // factorized at these values
    std::vector<PrecisionFactor> fac;
    std::vector<Mat> Rinv;
    std::vector<Mat> G;  // per signal (spatial); [0] shared for simple
    Mat B;               // K x n, column i = D' R^{-1} x_i
    Vec xx;              // n
    Vec logdet;          // n, log|R_i| (zero for simple)
};

class EmEngine {
  public:
    EmEngine(const Dataset& data, const FitConfig& cfg)
        : data_(data), cfg_(cfg), bounds_(bounds_from(cfg)) {
        if (cfg_.family == Family::gaussian_spatial) {
            if (!data.locations)
                throw std::invalid_argument("spatial family requires locations");
            dist_ = distance_matrix(*data.locations);
        }
        if (is_expfam_fit(cfg_.family)) {
            const ExpFamilySpec spec = ExpFamilySpec::from(cfg_.family, cfg_.trials);
            base_measure_.resize(data.n());
            Vec zero = Vec::Zero(data.m());
            for (int i = 0; i < data.n(); ++i)
                base_measure_[i] =
                    log_density_expfam(spec, data.X.col(i), zero) -
                    expfam_kernel(spec, data.X.col(i), zero);
        }
    }

    const Mat& dist() const { return dist_; }

    void refresh(const MixtureState& st) {
        if (!is_gaussian(cfg_.family)) return;
        const int n = data_.n();
        const bool spatial = cfg_.family == Family::gaussian_spatial;
        cache_.spatial = spatial;
        cache_.xx.resize(n);
        cache_.logdet.resize(n);
        cache_.B.resize(st.dict.K(), n);
        if (spatial) {
            if (static_cast<int>(cache_.fac.size()) != n) {
                cache_.fac.assign(n, PrecisionFactor::identity(1));
                cache_.Rinv.assign(n, Mat());
                cache_.omega.assign(n, -1.0);
            }
            cache_.G.assign(n, Mat());
            parallel_for(n, cfg_.threads, [&](std::size_t i) {
                if (cache_.omega[i] != st.noise[i].omega) {
                    Mat R = build_correlation_matrix(cfg_.kernel, st.noise[i].omega, dist_,
                                                     &bounds_);
                    cache_.fac[i] = PrecisionFactor::compute(R, cfg_.nugget);
                    cache_.Rinv[i] = cache_.fac[i].inverse();
                    cache_.omega[i] = st.noise[i].omega;
                }
                const Mat& Ri = cache_.Rinv[i];
                Mat RD = Ri * st.dict.atoms;
                cache_.G[i] = st.dict.atoms.transpose() * RD;
                cache_.B.col(i) = RD.transpose() * data_.X.col(i);
                cache_.xx[i] = data_.X.col(i).dot(Ri * data_.X.col(i));
                cache_.logdet[i] = cache_.fac[i].log_det();
            });
        } else {
            cache_.G.assign(1, st.dict.atoms.transpose() * st.dict.atoms);
            cache_.B = st.dict.atoms.transpose() * data_.X;
            for (int i = 0; i < n; ++i) cache_.xx[i] = data_.X.col(i).squaredNorm();
            cache_.logdet.setZero();
        }
    }

    double quad_form(const MixtureState& st, int i, int j) const {
        const Vec& a = st.coeffs[i][j];
        const Mat& G = cache_.spatial ? cache_.G[i] : cache_.G[0];
        const double ab = a.dot(cache_.B.col(i));
        const double aGa = a.dot(G * a);
        double q = cache_.xx[i] - 2.0 * ab + aGa;
        // The three terms cancel almost exactly for near-perfect fits, and the
        // tiny sigma2 those fits produce amplifies the rounding error; switch
        // to the explicit residual whenever cancellation dominates.
        const double scale = cache_.xx[i] + 2.0 * std::abs(ab) + std::abs(aGa);
        if (q < 1e-8 * scale) {
            Vec r = data_.X.col(i) - st.eta(i, j);
            q = cache_.spatial ? cache_.fac[i].quad_form(r) : r.squaredNorm();
        }
        return q;
    }

    // log pi_j + log f(x_i | theta_ij) for all j; expects refresh(st) for
    // Gaussian families.
    Vec log_terms(const MixtureState& st, int i) const {
        const int J = st.J();
        Vec t(J);
        if (is_gaussian(cfg_.family)) {
            const double s2 = st.noise[i].sigma2;
            const double m = data_.m();
            const double head =
                -0.5 * (m * 1.8378770664093454836 + m * std::log(s2) + cache_.logdet[i]);
            for (int j = 0; j < J; ++j) {
                if (st.weights[j] <= 0) {
                    t[j] = kNegInf;
                    continue;
                }
                double q = std::max(quad_form(st, i, j), 0.0);
                t[j] = std::log(st.weights[j]) + head - 0.5 * q / s2;
            }
        } else {
            const ExpFamilySpec spec = ExpFamilySpec::from(st.family, st.trials);
            for (int j = 0; j < J; ++j) {
                if (st.weights[j] <= 0) {
                    t[j] = kNegInf;
                    continue;
                }
                t[j] = std::log(st.weights[j]) + base_measure_[i] +
                       expfam_kernel(spec, data_.X.col(i), st.eta(i, j));
            }
        }
        return t;
    }

    Mat e_step(const MixtureState& st) const {
        const int n = data_.n();
        const int J = st.J();
        Mat W(n, J);
        std::vector<int> bad(n, 0);
        parallel_for(n, cfg_.threads, [&](std::size_t i) {
            Vec t = log_terms(st, static_cast<int>(i));
            double mx = t.maxCoeff();
            if (!std::isfinite(mx)) {
                bad[i] = 1;
                return;
            }
            double denom = 0;
            for (int j = 0; j < J; ++j) denom += std::exp(t[j] - mx);
            for (int j = 0; j < J; ++j)
                W(i, j) = std::isfinite(t[j]) ? std::exp(t[j] - mx) / denom : 0.0;
        });
        for (int i = 0; i < n; ++i)
            if (bad[i])
                throw degenerate_signal_error(
                    i, "e_step: signal " + std::to_string(i) + " has no finite density");
        return W;
    }

    double log_likelihood(const MixtureState& st) const {
        const int n = data_.n();
        Vec per(n);
        parallel_for(n, cfg_.threads, [&](std::size_t i) {
            Vec t = log_terms(st, static_cast<int>(i));
            double mx = t.maxCoeff();
            if (!std::isfinite(mx)) {
                per[i] = kNegInf;
                return;
            }
            double s = 0;
            for (int j = 0; j < st.J(); ++j) s += std::exp(t[j] - mx);
            per[i] = mx + std::log(s);
        });
        double total = 0;
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(per[i]))
                throw degenerate_signal_error(
                    i, "log_likelihood: signal " + std::to_string(i) + " has no finite density");
            total += per[i];
        }
        return total;
    }

    MixtureState m_step(const Mat& Wstar, const MixtureState& st, std::vector<BBHistory>* bb,
                        FitDiagnostics* diag, bool update_omega = true) {
        MixtureState out = st;
        const int n = data_.n();
        const int J = st.J();
        const int K = st.dict.K();

        out.weights = Wstar.colwise().mean().transpose();

        if (is_gaussian(cfg_.family)) {
            const bool spatial = cfg_.family == Family::gaussian_spatial;
            // sigma (and omega) from the current means, via the E-step cache.
            std::vector<int> rejected(n, 0);
            parallel_for(n, cfg_.threads, [&](std::size_t i) {
                double acc = 0, wsum = 0;
                for (int j = 0; j < J; ++j) {
                    double w = Wstar(i, j);
                    if (w <= 0) continue;
                    acc += w * std::max(quad_form(st, static_cast<int>(i), j), 0.0);
                    wsum += w;
                }
                if (wsum <= 0)
                    throw degenerate_signal_error(static_cast<int>(i),
                                                  "m_step: all-zero responsibility row");
                out.noise[i].sigma2 = std::max(acc / data_.m(), cfg_.sigma2_floor);
                if (spatial && update_omega) {
                    Mat etas(data_.m(), J);
                    for (int j = 0; j < J; ++j) etas.col(j) = st.eta(static_cast<int>(i), j);
                    // Trust region: early residuals are dominated by dictionary
                    // misfit, which is white and would send omega to the upper
                    // bound in one step, switching the whitening off for good.
                    KernelBounds tr{std::max(bounds_.lo, st.noise[i].omega / 1.1),
                                    std::min(bounds_.hi, st.noise[i].omega * 1.1)};
                    OmegaUpdate u = update_omega_newton(
                        st.noise[i].omega, data_.X.col(i), Wstar.row(i).transpose(), etas,
                        out.noise[i].sigma2, cfg_.kernel, dist_, cfg_.nugget, &tr);
                    out.noise[i].omega = u.omega;
                    rejected[i] = u.newton_rejected ? 1 : 0;
                }
            });
            if (diag && spatial)
                for (int i = 0; i < n; ++i) diag->newton_rejections += rejected[i];

            // refresh factors at the new omega, Gram pieces at the current D
            refresh(out);

            parallel_for(n, cfg_.threads, [&](std::size_t i) {
                const Mat& G = cache_.spatial ? cache_.G[i] : cache_.G[0];
                for (int j = 0; j < J; ++j)
                    out.coeffs[i][j] =
                        wls_solve_masked(G, cache_.B.col(i), out.supports.masks[j], cfg_.ridge);
            });

            for (int k = 0; k < K; ++k) {
                auto target = dictionary_column_target(k, data_, out, Wstar,
                                                       cache_.spatial ? &cache_.Rinv : nullptr,
                                                       cfg_.ridge);
                if (target) set_column_normalized(out, k, *target);
            }
        } else {
            const ExpFamilySpec spec = ExpFamilySpec::from(st.family, st.trials);
            parallel_for(n, cfg_.threads, [&](std::size_t i) {
                for (int j = 0; j < J; ++j)
                    out.coeffs[i][j] = irls_alpha_update(spec, data_.X.col(i), out.dict.atoms,
                                                         out.supports.masks[j], out.coeffs[i][j],
                                                         cfg_.ridge);
            });
            for (int k = 0; k < K; ++k) {
                bool rej = false;
                BBHistory dummy;
                BBHistory& h = bb ? (*bb)[k] : dummy;
                gradient_update_column(k, data_, out, Wstar, h, &rej);
                if (rej && diag) ++diag->bb_rejections;
            }
        }

        std::vector<int> kept = drop_vanished_components(out);
        reinit_dead_atoms(out, Wstar, kept, bb, diag);
        return out;
    }

  private:
    std::vector<int> drop_vanished_components(MixtureState& st) const {
        const int J = st.J();
        const double cut = 1e-10 / J;
        std::vector<int> keep;
        for (int j = 0; j < J; ++j)
            if (st.weights[j] >= cut) keep.push_back(j);
        if (static_cast<int>(keep.size()) == J)
            st.weights /= st.weights.sum();
        else
            subset_components(st, keep);
        return keep;
    }

    // Atoms selected by no surviving component are pointed at the signal the
    // current fit reconstructs worst, so the next expansion can use them.
    // kept maps surviving components back to their Wstar columns.
    void reinit_dead_atoms(MixtureState& st, const Mat& Wstar, const std::vector<int>& kept,
                           std::vector<BBHistory>* bb, FitDiagnostics* diag) const {
        const int K = st.dict.K();
        std::vector<char> used(K, 0);
        for (const auto& g : st.supports.masks)
            for (int k = 0; k < K; ++k)
                if (g.test(k)) used[k] = 1;
        std::vector<int> dead;
        for (int k = 0; k < K; ++k)
            if (!used[k]) dead.push_back(k);
        if (dead.empty()) return;

        const ExpFamilySpec spec = is_expfam_fit(st.family)
                                       ? ExpFamilySpec::from(st.family, st.trials)
                                       : ExpFamilySpec{};
        int worst = 0;
        double worst_err = -1;
        for (int i = 0; i < data_.n(); ++i) {
            Vec recon = Vec::Zero(data_.m());
            for (int j = 0; j < st.J(); ++j) {
                double w = Wstar(i, kept[j]);
                if (w <= 0) continue;
                Vec mean = is_expfam_fit(st.family) ? inverse_link(spec, st.eta(i, j))
                                                    : st.eta(i, j);
                recon += w * mean;
            }
            double err = (data_.X.col(i) - recon).squaredNorm();
            if (err > worst_err) {
                worst_err = err;
                worst = i;
            }
        }
        Vec col = is_count_family(st.family)
                      ? Vec(data_.X.col(worst).array().log1p().matrix())
                      : Vec(data_.X.col(worst));
        if (col.norm() < 1e-12) col = Vec::Unit(data_.m(), dead.front() % data_.m());
        col /= col.norm();
        for (int k : dead) {
            st.dict.atoms.col(k) = col;
            if (bb) (*bb)[k] = BBHistory{};
            if (diag) ++diag->atom_reinits;
        }
    }

  public:
    static void subset_components(MixtureState& st, const std::vector<int>& keep) {
        MixtureState out = st;
        out.supports.masks.clear();
        for (int j : keep) out.supports.masks.push_back(st.supports.masks[j]);
        out.weights.resize(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t a = 0; a < keep.size(); ++a) out.weights[a] = st.weights[keep[a]];
        double s = out.weights.sum();
        if (s <= 0) throw numeric_error("all mixture weights vanished");
        out.weights /= s;
        for (std::size_t i = 0; i < st.coeffs.size(); ++i) {
            std::vector<Vec> row;
            row.reserve(keep.size());
            for (int j : keep) row.push_back(st.coeffs[i][j]);
            out.coeffs[i] = std::move(row);
        }
        st = std::move(out);
    }

  private:
    const Dataset& data_;
    FitConfig cfg_;
    KernelBounds bounds_;
    Mat dist_;
    GaussCache cache_;
    Vec base_measure_;
};

// Coefficient for a single added atom against the parent residual: one
// weighted least-squares / IRLS coordinate step.
double seed_new_atom_coeff(const ExpFamilySpec* spec, const Vec& x, const Vec& atom,
                           const Vec& eta_parent) {
    if (!spec) {
        double denom = atom.squaredNorm();
        return denom > 0 ? atom.dot(x - eta_parent) / denom : 0.0;
    }
    Vec w = variance_function(*spec, eta_parent);
    for (Eigen::Index l = 0; l < w.size(); ++l) w[l] = std::max(w[l], 1e-10);
    Vec mu = inverse_link(*spec, eta_parent);
    double denom = atom.dot(w.asDiagonal() * atom);
    return denom > 0 ? atom.dot(x - mu) / denom : 0.0;
}

MixtureState expand_state(const Dataset& data, const MixtureState& parent, const FitConfig& cfg) {
    const int K = parent.dict.K();
    const int n = data.n();
    SupportSet expanded = expand_support_set(parent.supports);
    const int Jnew = expanded.size();

    // Replay the expansion to find, for each child, the first (parent, atom)
    // pair that produced it, and to split each parent's mass uniformly over
    // its distinct children.
    std::vector<int> first_parent(Jnew, -1), added_atom(Jnew, -1);
    Vec pi = Vec::Zero(Jnew);
    {
        std::map<SupportMask, int> index;
        for (int j = 0; j < Jnew; ++j) index.emplace(expanded.masks[j], j);
        for (int pj = 0; pj < parent.J(); ++pj) {
            const SupportMask& g = parent.supports.masks[pj];
            const double share = parent.weights[pj] / (K - g.popcount() + 1);
            std::vector<int> hit;
            for (int l = 0; l < K; ++l) {
                SupportMask child = g;
                child.set(l);
                int cj = index.at(child);
                if (first_parent[cj] < 0) {
                    first_parent[cj] = pj;
                    added_atom[cj] = g.test(l) ? -1 : l;
                }
                if (std::find(hit.begin(), hit.end(), cj) == hit.end()) {
                    hit.push_back(cj);
                    pi[cj] += share;
                }
            }
        }
    }

    MixtureState st = parent;
    st.supports = expanded;
    st.weights = pi / pi.sum();
    st.coeffs.assign(n, std::vector<Vec>(Jnew));

    const bool expfam = is_expfam_fit(cfg.family);
    const ExpFamilySpec spec = expfam ? ExpFamilySpec::from(cfg.family, cfg.trials)
                                      : ExpFamilySpec{};
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        for (int j = 0; j < Jnew; ++j) {
            const int pj = first_parent[j];
            Vec a = parent.coeffs[i][pj];
            const int l = added_atom[j];
            if (l >= 0) {
                Vec eta = parent.dict.atoms * a;
                a[l] = seed_new_atom_coeff(expfam ? &spec : nullptr, data.X.col(i),
                                           parent.dict.atoms.col(l), eta);
            }
            st.coeffs[i][j] = std::move(a);
        }
    });
    return st;
}

}  // namespace

std::string FitConfig::echo() const {
    std::ostringstream os;
    os << "family=" << family_name(family) << " kernel=" << kernel_name(kernel) << " K=" << K
       << " dmax=" << d_max << " trials=" << trials << " c0=" << fmt_double(rc.c0)
       << " warmup=" << rc.warmup << " decay=" << fmt_double(rc.decay)
       << " cmin=" << fmt_double(rc.c_min) << " tol=" << fmt_double(tol)
       << " max_iter=" << max_iter << " seed=" << seed << " ridge=" << fmt_double(ridge)
       << " nugget=" << fmt_double(nugget) << " floor=" << fmt_double(sigma2_floor)
       << " threads=" << threads << " exhaustive=" << (exhaustive ? 1 : 0);
    return os.str();
}

double threshold_schedule(int iter, const FitConfig& cfg) {
    if (iter < 0) throw std::invalid_argument("threshold_schedule: negative iteration");
    const RcSchedule& rc = cfg.rc;
    if (rc.c0 <= 0) return 0.0;  // rejection control disabled; the floor must not revive it
    if (iter < rc.warmup) return rc.c0;
    double c = rc.c0 * std::pow(rc.decay, iter - rc.warmup);
    return std::max(c, rc.c_min);
}

double bic(double loglik, long long q, int n, int m) {
    return -2.0 * loglik + static_cast<double>(q) * std::log(static_cast<double>(n) * m);
}

Mat e_step(const Dataset& data, const MixtureState& st, const FitConfig& cfg) {
    EmEngine eng(data, cfg);
    eng.refresh(st);
    return eng.e_step(st);
}

Mat rejection_control_raw(const Mat& W, double c, Rng& rng) {
    if (c < 0 || c > 1) throw std::invalid_argument("rejection_control: c must be in [0,1]");
    if (c == 0) return W;
    Mat out = W;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) {
            double w = W(i, j);
            if (w > c) continue;
            out(i, j) = w > 0 && unif(rng) < w / c ? c : 0.0;
        }
    return out;
}

Mat rejection_control(const Mat& W, double c, Rng& rng) {
    if (c == 0) return W;
    Mat out = rejection_control_raw(W, c, rng);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double rowsum = out.row(i).sum();
        if (rowsum <= 0)
            out.row(i) = W.row(i);  // keep the original row rather than losing the signal
        else
            out.row(i) /= rowsum;
    }
    return out;
}

MixtureState m_step(const Dataset& data, const Mat& Wstar, const MixtureState& st,
                    const FitConfig& cfg, std::vector<BBHistory>* bb, FitDiagnostics* diag) {
    EmEngine eng(data, cfg);
    eng.refresh(st);
    return eng.m_step(Wstar, st, bb, diag);
}

double log_likelihood(const Dataset& data, const MixtureState& st, const FitConfig& cfg) {
    EmEngine eng(data, cfg);
    eng.refresh(st);
    return eng.log_likelihood(st);
}

namespace {

EmRun run_em_fixed_d_engine(EmEngine& eng, const Dataset& data, const MixtureState& st0,
                            const FitConfig& cfg, Rng& rng, FitDiagnostics* diag) {
    MixtureState st = st0;
    std::vector<BBHistory> bb(st.dict.K());
    std::vector<BBHistory>* bbp = is_expfam_fit(cfg.family) ? &bb : nullptr;

    eng.refresh(st);
    std::vector<double> trace{eng.log_likelihood(st)};

    const bool stochastic = cfg.rc.c0 > 0;
    MixtureState best = st;
    double best_ll = trace[0];

    for (int t = 0; t < cfg.max_iter; ++t) {
        Mat W = eng.e_step(st);
        Mat Wstar = rejection_control(W, threshold_schedule(t, cfg), rng);
        // The spatial parameter sits out the first sweeps: dictionary-misfit
        // residuals early on look white and would drag omega off before the
        // means settle. Skipping a block keeps generalized-EM ascent intact.
        st = eng.m_step(Wstar, st, bbp, diag, t >= 6);
        eng.refresh(st);
        double ll = eng.log_likelihood(st);
        if (!std::isfinite(ll)) throw numeric_error("log-likelihood became non-finite");
        trace.push_back(ll);
        if (stochastic && ll > best_ll) {
            best_ll = ll;
            best = st;
        }
        double prev = trace[trace.size() - 2];
        double rel = std::abs(ll - prev) / std::max(std::abs(ll), 1e-300);
        if (rel < cfg.tol) break;
    }
    if (stochastic && best_ll > trace.back()) return {std::move(best), std::move(trace)};
    return {std::move(st), std::move(trace)};
}

}  // namespace

EmRun run_em_fixed_d(const Dataset& data, const MixtureState& st0, const FitConfig& cfg, Rng& rng,
                     FitDiagnostics* diag) {
    EmEngine eng(data, cfg);
    FitDiagnostics local;
    return run_em_fixed_d_engine(eng, data, st0, cfg, rng, diag ? diag : &local);
}

MixtureState init_state_level1(const Dataset& data, const FitConfig& cfg, Rng& rng,
                               double* residual_scale) {
    const int n = data.n();
    const int m = data.m();
    const int K = cfg.K;
    if (K < 1) throw std::invalid_argument("fit: K must be >= 1");

    MixtureState st;
    st.family = cfg.family;
    st.kernel = cfg.kernel;
    st.trials = cfg.trials;
    st.supports = init_support_set(K);
    st.weights = Vec::Constant(K, 1.0 / K);

    // Dictionary from K distinct signals, drawn by a seeded shuffle.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    const bool count_init = is_count_family(cfg.family);
    st.dict.atoms.resize(m, K);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    for (int k = 0; k < K; ++k) {
        Vec col = data.X.col(perm[k % n]);
        if (count_init) col = col.array().log1p().matrix();
        if (k >= n)
            for (int l = 0; l < m; ++l) col[l] += 1e-3 * jitter(rng);
        if (col.norm() < 1e-12) col = Vec::Unit(m, k % m);
        st.dict.atoms.col(k) = col / col.norm();
    }

    double omega0 = 0;
    if (cfg.family == Family::gaussian_spatial) {
        if (!data.locations) throw std::invalid_argument("spatial family requires locations");
        omega0 = default_omega(cfg.kernel, distance_matrix(*data.locations));
        KernelBounds b = bounds_from(cfg);
        omega0 = std::clamp(omega0, b.lo, b.hi);
    }

    const bool expfam = is_expfam_fit(cfg.family);
    const ExpFamilySpec spec = expfam ? ExpFamilySpec::from(cfg.family, cfg.trials)
                                      : ExpFamilySpec{};
    st.coeffs.assign(n, std::vector<Vec>(K));
    st.noise.assign(n, NoiseParams{});
    Vec best_res(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            Vec a = Vec::Zero(K);
            if (expfam) {
                a = irls_alpha_update(spec, data.X.col(i), st.dict.atoms, st.supports.masks[k], a,
                                      cfg.ridge);
            } else {
                a[k] = st.dict.atoms.col(k).dot(data.X.col(i));
                best = std::min(best,
                                (data.X.col(i) - a[k] * st.dict.atoms.col(k)).squaredNorm());
            }
            st.coeffs[i][k] = std::move(a);
        }
        best_res[i] = best;
        st.noise[i].omega = omega0;
        st.noise[i].dispersion = 1.0;
    });
    // Pooled starting variance: the signals the dictionary was drawn from fit
    // their own atom exactly, and a per-signal zero here would pin each
    // column to its founding signal through the 1/sigma2 weights.
    double pooled = expfam ? 1.0 : std::max(best_res.mean() / m, cfg.sigma2_floor);
    for (int i = 0; i < n; ++i) st.noise[i].sigma2 = expfam ? 1.0 : pooled;
    if (residual_scale) {
        std::vector<double> res(best_res.data(), best_res.data() + n);
        std::nth_element(res.begin(), res.begin() + n / 2, res.end());
        *residual_scale = expfam ? 1.0 : res[static_cast<std::size_t>(n) / 2] / m;
    }
    return st;
}

FitResult fit_msc(const Dataset& data, const FitConfig& cfg) {
    validate_dataset(data, cfg.family, cfg.trials);
    if (cfg.d_max < 1) throw std::invalid_argument("fit: d_max must be >= 1");
    if (cfg.rc.c0 < 0 || cfg.rc.c0 > 1)
        throw std::invalid_argument("fit: c0 must be in [0,1]");
    if (!(cfg.tol > 0)) throw std::invalid_argument("fit: tol must be positive");

    Rng rng(cfg.seed);
    FitResult result;
    result.config_echo = cfg.echo();

    // Effective variance floor for this fit; fixed up front so flooring stays
    // a boundary projection throughout.
    double scale = 0;
    MixtureState init;
    {
        Rng probe(cfg.seed);
        init = init_state_level1(data, cfg, probe, &scale);
        rng = probe;  // init consumed the same draws fit_msc would
    }
    FitConfig cfg_run = cfg;
    if (is_gaussian(cfg.family))
        cfg_run.sigma2_floor = std::max(cfg.sigma2_floor, cfg.sigma2_floor_rel * scale);
    for (auto& np : init.noise) np.sigma2 = std::max(np.sigma2, cfg_run.sigma2_floor);

    EmEngine eng(data, cfg_run);
    MixtureState parent;  // pruned state at level d-1
    double prev_bic = std::numeric_limits<double>::infinity();

    for (int d = 1; d <= cfg.d_max; ++d) {
        MixtureState st = d == 1 ? init : expand_state(data, parent, cfg_run);
        result.diag.support_sizes_entering.push_back(st.J());

        EmRun run = run_em_fixed_d_engine(eng, data, st, cfg_run, rng, &result.diag);
        for (std::size_t t = 0; t < run.trace.size(); ++t)
            result.trace.push_back({d, static_cast<int>(t), run.trace[t]});

        eng.refresh(run.state);
        MixtureState pruned = run.state;
        if (!cfg.exhaustive) {
            Mat W = eng.e_step(run.state);
            std::vector<int> keep = prune_indices(run.state.supports, W);
            EmEngine::subset_components(pruned, keep);
            pruned.supports.sparsity = run.state.supports.sparsity;
            eng.refresh(pruned);
        }
        result.diag.support_sizes.push_back(pruned.J());

        double ll = eng.log_likelihood(pruned);
        long long q = count_parameters(cfg.family, pruned.supports, data.n(), data.m(), cfg.K);
        double b = bic(ll, q, data.n(), data.m());
        result.bic_values.push_back(b);

        if (d > 1 && b > prev_bic) {
            result.diag.stopped_by_bic = true;
            if (cfg.stop_on_bic_increase) break;  // keep the d-1 model
        }
        prev_bic = std::min(prev_bic, b);
        parent = pruned;
        result.state = pruned;
        result.chosen_d = d;
    }

    eng.refresh(result.state);
    Mat W = eng.e_step(result.state);
    result.assignments.resize(data.n());
    for (int i = 0; i < data.n(); ++i) {
        int best = 0;
        for (int j = 1; j < result.state.J(); ++j)
            if (W(i, j) > W(i, best)) best = j;
        result.assignments[i] = best;
    }
    return result;
}

}  // namespace msc
