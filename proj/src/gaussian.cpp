#include <msc/gaussian.hpp>

#include <cmath>

namespace msc {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

// Cholesky with one ridge retry; the Gram matrices here are tiny (<= d x d).
Eigen::LLT<Mat> chol_with_ridge(Mat G, double ridge) {
    Eigen::LLT<Mat> llt(G);
    double mind = llt.info() == Eigen::Success ? llt.matrixLLT().diagonal().minCoeff() : 0.0;
    if (llt.info() != Eigen::Success || mind * mind < 1e-14 * G.diagonal().maxCoeff()) {
        G.diagonal().array() += ridge;
        llt.compute(G);
        if (llt.info() != Eigen::Success)
            throw numeric_error("gram matrix not positive definite after ridge");
    }
    return llt;
}
}  // namespace

double log_density_gaussian_simple(const Vec& x, const Vec& eta, double sigma2) {
    if (x.size() != eta.size()) throw std::invalid_argument("log_density: dimension mismatch");
    if (sigma2 <= 0) throw numeric_error("log_density: non-positive variance");
    const double m = static_cast<double>(x.size());
    const double quad = (x - eta).squaredNorm() / sigma2;
    return -0.5 * (m * kLog2Pi + m * std::log(sigma2) + quad);
}

double log_density_gaussian(const Vec& x, const Vec& eta, const PrecisionFactor& Rfac,
                            double sigma2) {
    if (x.size() != eta.size() || Rfac.dim() != x.size())
        throw std::invalid_argument("log_density: dimension mismatch");
    if (sigma2 <= 0) throw numeric_error("log_density: non-positive variance");
    const double m = static_cast<double>(x.size());
    const double quad = Rfac.quad_form(x - eta) / sigma2;
    return -0.5 * (m * kLog2Pi + m * std::log(sigma2) + Rfac.log_det() + quad);
}

double update_sigma2_simple(const Vec& x, const Mat& etas, const Vec& w, double floor_at) {
    if (w.size() != etas.cols()) throw std::invalid_argument("update_sigma2: w size mismatch");
    if (w.maxCoeff() <= 0)
        throw degenerate_signal_error(-1, "update_sigma2: all-zero responsibility row");
    double acc = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w[j] > 0) acc += w[j] * (x - etas.col(j)).squaredNorm();
    return std::max(acc / static_cast<double>(x.size()), floor_at);
}

double update_sigma2_spatial(const Vec& x, const Mat& etas, const Vec& w,
                             const PrecisionFactor& Rfac, double floor_at) {
    if (w.size() != etas.cols()) throw std::invalid_argument("update_sigma2: w size mismatch");
    if (w.maxCoeff() <= 0)
        throw degenerate_signal_error(-1, "update_sigma2: all-zero responsibility row");
    double acc = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w[j] > 0) acc += w[j] * Rfac.quad_form(x - etas.col(j));
    return std::max(acc / static_cast<double>(x.size()), floor_at);
}

Vec wls_solve_masked(const Mat& G, const Vec& b, const SupportMask& mask, double ridge) {
    const auto idx = mask.active();
    const int d = static_cast<int>(idx.size());
    Mat Gs(d, d);
    Vec bs(d);
    for (int a = 0; a < d; ++a) {
        bs[a] = b[idx[static_cast<std::size_t>(a)]];
        for (int c = 0; c < d; ++c)
            Gs(a, c) = G(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
    }
    Vec sol = chol_with_ridge(Gs, ridge).solve(bs);
    Vec out = Vec::Zero(G.rows());
    for (int a = 0; a < d; ++a) out[idx[static_cast<std::size_t>(a)]] = sol[a];
    return out;
}

Vec update_alpha_wls(const Vec& x, const Mat& D, const SupportMask& mask,
                     const PrecisionFactor* R_half, double ridge) {
    if (mask.popcount() > D.rows())
        throw std::invalid_argument("update_alpha_wls: support wider than m");
    Mat G;
    Vec b;
    if (R_half) {
        Mat RD = R_half->solve(D);
        G = D.transpose() * RD;
        b = RD.transpose() * x;
    } else {
        G = D.transpose() * D;
        b = D.transpose() * x;
    }
    return wls_solve_masked(G, b, mask, ridge);
}

std::optional<Vec> dictionary_column_target(int k, const Dataset& data, const MixtureState& st,
                                            const Mat& W, const std::vector<Mat>* Rinv,
                                            double ridge) {
    const int n = data.n();
    const int m = data.m();
    const int J = st.J();
    const bool spatial = Rinv != nullptr;

    // Components whose mask selects atom k.
    std::vector<int> used;
    for (int j = 0; j < J; ++j)
        if (st.supports.masks[static_cast<std::size_t>(j)].test(k)) used.push_back(j);
    if (used.empty()) return std::nullopt;

    double denom = 0;
    Vec rhs = Vec::Zero(m);
    Mat M;
    if (spatial) M = Mat::Zero(m, m);

    for (int i = 0; i < n; ++i) {
        double s_i = 0;
        Vec v_i = Vec::Zero(m);
        for (int j : used) {
            const double wij = W(i, j);
            if (wij <= 0) continue;
            const Vec& a = st.coeffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double c = a[k];
            // coefficients at rounding level act as exact zeros: dividing by
            // their squared mass would replace the column with noise
            if (std::abs(c) <= 1e-9 * a.cwiseAbs().maxCoeff()) continue;
            Vec eta = st.eta(i, j);
            // x - sum_{l != k} c_l d_l  ==  x - eta + c * d_k
            v_i += wij * c * (data.X.col(i) - eta + c * st.dict.atoms.col(k));
            s_i += wij * c * c;
        }
        if (s_i == 0) continue;
        const double inv_s2 = 1.0 / st.noise[static_cast<std::size_t>(i)].sigma2;
        if (spatial) {
            M += s_i * inv_s2 * (*Rinv)[static_cast<std::size_t>(i)];
            rhs += inv_s2 * ((*Rinv)[static_cast<std::size_t>(i)] * v_i);
        } else {
            denom += s_i * inv_s2;
            rhs += inv_s2 * v_i;
        }
    }

    if (spatial) {
        if (M.diagonal().maxCoeff() <= 0) return std::nullopt;
        return Vec(chol_with_ridge(M, ridge).solve(rhs));
    }
    if (denom <= 0) return std::nullopt;
    return Vec(rhs / denom);
}

void set_column_normalized(MixtureState& st, int k, const Vec& column) {
    const double s = column.norm();
    if (!(s > 1e-300)) throw numeric_error("dictionary column collapsed to zero");
    st.dict.atoms.col(k) = column / s;
    for (auto& per_signal : st.coeffs)
        for (int j = 0; j < st.J(); ++j)
            if (st.supports.masks[static_cast<std::size_t>(j)].test(k))
                per_signal[static_cast<std::size_t>(j)][k] *= s;
}

double q_function_gaussian(const Dataset& data, const MixtureState& st, const Mat& W,
                           const std::vector<PrecisionFactor>* Rfacs) {
    double q = 0;
    for (int i = 0; i < data.n(); ++i) {
        const double s2 = st.noise[static_cast<std::size_t>(i)].sigma2;
        for (int j = 0; j < st.J(); ++j) {
            const double wij = W(i, j);
            if (wij <= 0) continue;
            Vec eta = st.eta(i, j);
            double ld = Rfacs
                            ? log_density_gaussian(data.X.col(i), eta,
                                                   (*Rfacs)[static_cast<std::size_t>(i)], s2)
                            : log_density_gaussian_simple(data.X.col(i), eta, s2);
            q += wij * (std::log(st.weights[j]) + ld);
        }
    }
    return q;
}

}  // namespace msc
