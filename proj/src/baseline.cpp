#include <msc/baseline.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace msc {

Vec omp_encode(const Vec& x, const Mat& D, int d) {
    const int K = static_cast<int>(D.cols());
    d = std::min<int>(d, std::min<int>(K, static_cast<int>(D.rows())));
    Vec alpha = Vec::Zero(K);
    Vec r = x;
    std::vector<int> sel;
    for (int step = 0; step < d; ++step) {
        int best = -1;
        double best_corr = 1e-12;
        for (int k = 0; k < K; ++k) {
            if (std::find(sel.begin(), sel.end(), k) != sel.end()) continue;
            double c = std::abs(D.col(k).dot(r));
            if (c > best_corr) {
                best_corr = c;
                best = k;
            }
        }
        if (best < 0) break;
        sel.push_back(best);
        Mat Ds(D.rows(), static_cast<Eigen::Index>(sel.size()));
        for (std::size_t a = 0; a < sel.size(); ++a) Ds.col(static_cast<Eigen::Index>(a)) = D.col(sel[a]);
        Mat G = Ds.transpose() * Ds;
        G.diagonal().array() += 1e-12;
        Vec sol = G.llt().solve(Ds.transpose() * x);
        r = x - Ds * sol;
        alpha.setZero();
        for (std::size_t a = 0; a < sel.size(); ++a) alpha[sel[a]] = sol[static_cast<Eigen::Index>(a)];
    }
    return alpha;
}

namespace {

double objective(const Dataset& data, const Mat& D, const Mat& A) {
    return (data.X - D * A).squaredNorm() / static_cast<double>(data.n());
}

Vec refit_on_support(const Vec& x, const Mat& D, const std::vector<int>& sel) {
    Vec alpha = Vec::Zero(D.cols());
    if (sel.empty()) return alpha;
    Mat Ds(D.rows(), static_cast<Eigen::Index>(sel.size()));
    for (std::size_t a = 0; a < sel.size(); ++a) Ds.col(static_cast<Eigen::Index>(a)) = D.col(sel[a]);
    Mat G = Ds.transpose() * Ds;
    G.diagonal().array() += 1e-12;
    Vec sol = G.llt().solve(Ds.transpose() * x);
    for (std::size_t a = 0; a < sel.size(); ++a) alpha[sel[a]] = sol[static_cast<Eigen::Index>(a)];
    return alpha;
}

std::vector<int> support_of(const Vec& alpha) {
    std::vector<int> sel;
    for (Eigen::Index k = 0; k < alpha.size(); ++k)
        if (alpha[k] != 0) sel.push_back(static_cast<int>(k));
    return sel;
}

}  // namespace

BaselineResult baseline_fit(const Dataset& data, const BaselineConfig& cfg) {
    const int n = data.n();
    const int m = data.m();
    const int K = cfg.K;
    if (cfg.d > m) throw std::invalid_argument("baseline_fit: d > m");
    Rng rng(cfg.seed);

    BaselineResult res;
    res.dict.atoms.resize(m, K);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < K; ++k) {
        Vec col = data.X.col(perm[k % n]);
        if (col.norm() < 1e-12) col = Vec::Unit(m, k % m);
        res.dict.atoms.col(k) = col / col.norm();
    }

    res.coeffs = Mat::Zero(K, n);
    for (int it = 0; it < cfg.iters; ++it) {
        // Encode; keep the refit of the previous support when OMP does worse,
        // which makes the objective trace monotone.
        for (int i = 0; i < n; ++i) {
            Vec fresh = omp_encode(data.X.col(i), res.dict.atoms, cfg.d);
            Vec prev = refit_on_support(data.X.col(i), res.dict.atoms, support_of(res.coeffs.col(i)));
            double ef = (data.X.col(i) - res.dict.atoms * fresh).squaredNorm();
            double ep = (data.X.col(i) - res.dict.atoms * prev).squaredNorm();
            res.coeffs.col(i) = ef <= ep ? fresh : prev;
        }

        // Per-atom least squares over the signals using it.
        Mat resid = data.X - res.dict.atoms * res.coeffs;
        for (int k = 0; k < K; ++k) {
            double denom = res.coeffs.row(k).squaredNorm();
            if (denom < 1e-20) {
                // dead atom: point it at the worst-reconstructed signal
                int worst = 0;
                double worst_err = -1;
                for (int i = 0; i < n; ++i) {
                    double e = resid.col(i).squaredNorm();
                    if (e > worst_err) {
                        worst_err = e;
                        worst = i;
                    }
                }
                Vec col = data.X.col(worst);
                if (col.norm() < 1e-12) col = Vec::Unit(m, k % m);
                res.dict.atoms.col(k) = col / col.norm();
                continue;
            }
            Vec numer = Vec::Zero(m);
            for (int i = 0; i < n; ++i) {
                double c = res.coeffs(k, i);
                if (c == 0) continue;
                numer += c * (resid.col(i) + c * res.dict.atoms.col(k));
            }
            Vec d_new = numer / denom;
            double norm = d_new.norm();
            if (norm < 1e-12) continue;
            res.dict.atoms.col(k) = d_new / norm;
            res.coeffs.row(k) *= norm;
            for (int i = 0; i < n; ++i)
                if (res.coeffs(k, i) != 0)
                    resid.col(i) = data.X.col(i) - res.dict.atoms * res.coeffs.col(i);
        }

        // Atoms that collapsed onto each other trap the fit in a duplicate
        // local minimum. Merging is lossless once they are numerically equal,
        // and the freed column restarts on the worst-reconstructed signal.
        for (int j = 0; j < K; ++j)
            for (int k = j + 1; k < K; ++k) {
                double coh = res.dict.atoms.col(j).dot(res.dict.atoms.col(k));
                if (std::abs(coh) <= 1.0 - 1e-10) continue;
                double sign = coh >= 0 ? 1.0 : -1.0;
                res.coeffs.row(j) += sign * res.coeffs.row(k);
                res.coeffs.row(k).setZero();
                resid = data.X - res.dict.atoms * res.coeffs;
                int worst = 0;
                double worst_err = -1;
                for (int i = 0; i < n; ++i) {
                    double e = resid.col(i).squaredNorm();
                    if (e > worst_err) {
                        worst_err = e;
                        worst = i;
                    }
                }
                Vec col = data.X.col(worst);
                if (col.norm() < 1e-12) col = Vec::Unit(m, k % m);
                res.dict.atoms.col(k) = col / col.norm();
            }

        res.objective.push_back(objective(data, res.dict.atoms, res.coeffs));
    }
    return res;
}

}  // namespace msc
