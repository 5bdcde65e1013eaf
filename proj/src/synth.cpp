#include <msc/spatial.hpp>
#include <msc/support.hpp>
#include <msc/synth.hpp>

#include <Eigen/QR>

#include <cmath>

namespace msc {

namespace {

// All masks with 1 <= popcount <= d, ordered by popcount then lexicographically
// by atom indices.
SupportSet all_supports(int K, int d) {
    SupportSet s;
    s.sparsity = d;
    s.masks = init_support_set(K).masks;
    std::vector<std::vector<int>> level;
    for (int k = 0; k < K; ++k) level.push_back({k});
    for (int size = 2; size <= d; ++size) {
        std::vector<std::vector<int>> next;
        for (const auto& combo : level)
            for (int k = combo.back() + 1; k < K; ++k) {
                auto ext = combo;
                ext.push_back(k);
                next.push_back(ext);
                SupportMask g(K);
                for (int a : ext) g.set(a);
                s.masks.push_back(g);
            }
        level = std::move(next);
    }
    return s;
}

struct GeneratorCore {
    Dictionary dict;
    SupportSet supports;
    Mat alpha;  // K x J
    Mat means;  // m x J, eta_j = D (alpha_j o gamma_j)
};

GeneratorCore generator_core(const SimSpec& spec, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> ucoef(spec.coef_lo, spec.coef_hi);

    GeneratorCore core;
    core.dict.atoms.resize(spec.m, spec.K);
    for (int k = 0; k < spec.K; ++k)
        for (int l = 0; l < spec.m; ++l) core.dict.atoms(l, k) = u01(rng);
    core.dict.normalize_columns();

    core.supports = all_supports(spec.K, spec.d);
    const int J = core.supports.size();
    core.alpha.resize(spec.K, J);
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < spec.K; ++k) core.alpha(k, j) = ucoef(rng);

    core.means.resize(spec.m, J);
    for (int j = 0; j < J; ++j) {
        Vec masked = Vec::Zero(spec.K);
        for (int k : core.supports.masks[j].active()) masked[k] = core.alpha(k, j);
        core.means.col(j) = core.dict.atoms * masked;
    }
    return core;
}

}  // namespace

Vec gaussian_field(const Mat& locations, CorrKernel kernel, double omega, double sigma2,
                   Rng& rng) {
    Mat R = build_correlation_matrix(kernel, omega, distance_matrix(locations));
    R.diagonal().array() += 1e-8;
    Eigen::LLT<Mat> llt(R);
    if (llt.info() != Eigen::Success)
        throw numeric_error("gaussian_field: covariance not positive definite");
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec z(locations.rows());
    for (Eigen::Index l = 0; l < z.size(); ++l) z[l] = gauss(rng);
    Vec field = llt.matrixL() * z;
    return std::sqrt(sigma2) * field;
}

std::pair<Dataset, SimTruth> simulate_gaussian(const SimSpec& spec) {
    if (spec.n < 1 || spec.m < 1 || spec.K < 1 || spec.d < 1 || spec.snr <= 0)
        throw std::invalid_argument("simulate_gaussian: bad spec");
    const bool spatial = spec.family == Family::gaussian_spatial;
    Rng rng(spec.seed);
    GeneratorCore core = generator_core(spec, rng);
    const int J = core.supports.size();

    SimTruth truth;
    truth.dict = core.dict;
    truth.supports = core.supports;
    truth.alpha = core.alpha;
    truth.omega = spatial ? spec.omega : 0.0;
    truth.sigma2.resize(J);
    // SNR is the per-coordinate signal-to-noise power ratio of the component
    // mean; the noise variance follows from it.
    for (int j = 0; j < J; ++j)
        truth.sigma2[j] = core.means.col(j).squaredNorm() / (spec.m * spec.snr);

    Dataset data;
    data.X.resize(spec.m, spec.n);

    Mat locations;
    Eigen::LLT<Mat> llt;
    if (spatial) {
        std::uniform_real_distribution<double> uloc(0.0, 100.0);
        locations.resize(spec.m, 2);
        for (int l = 0; l < spec.m; ++l) {
            locations(l, 0) = uloc(rng);
            locations(l, 1) = uloc(rng);
        }
        Mat R = build_correlation_matrix(spec.kernel, spec.omega, distance_matrix(locations));
        R.diagonal().array() += 1e-8;
        llt.compute(R);
        if (llt.info() != Eigen::Success)
            throw numeric_error("simulate_gaussian: correlation not positive definite");
        data.locations = locations;
    }

    std::uniform_int_distribution<int> pick(0, J - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    truth.assignment.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        int j = pick(rng);
        truth.assignment[i] = j;
        Vec z(spec.m);
        for (int l = 0; l < spec.m; ++l) z[l] = gauss(rng);
        Vec noise = spatial ? Vec(llt.matrixL() * z) : z;
        data.X.col(i) = core.means.col(j) + std::sqrt(truth.sigma2[j]) * noise;
    }
    return {std::move(data), std::move(truth)};
}

std::pair<Dataset, SimTruth> simulate_poisson(const SimSpec& spec) {
    if (spec.n < 1 || spec.m < 1 || spec.K < 1 || spec.d < 1)
        throw std::invalid_argument("simulate_poisson: bad spec");
    Rng rng(spec.seed);
    GeneratorCore core = generator_core(spec, rng);
    const int J = core.supports.size();

    // U[1,10] coefficients through the log link can overflow the count scale;
    // rescale so max eta <= 8 unless the literal recipe was requested.
    if (!spec.raw_scale) {
        double mx = core.means.maxCoeff();
        if (mx > 8.0) {
            core.alpha *= 8.0 / mx;
            core.means *= 8.0 / mx;
        }
    }

    SimTruth truth;
    truth.dict = core.dict;
    truth.supports = core.supports;
    truth.alpha = core.alpha;

    Dataset data;
    data.X.resize(spec.m, spec.n);
    std::uniform_int_distribution<int> pick(0, J - 1);
    truth.assignment.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        int j = pick(rng);
        truth.assignment[i] = j;
        for (int l = 0; l < spec.m; ++l) {
            double rate = std::exp(std::min(core.means(l, j), 30.0));
            std::poisson_distribution<long> pois(rate);
            data.X(l, i) = static_cast<double>(pois(rng));
        }
    }
    return {std::move(data), std::move(truth)};
}

namespace {
Mat orth_basis(const Mat& D) {
    Eigen::ColPivHouseholderQR<Mat> qr(D);
    qr.setThreshold(1e-10);
    const Eigen::Index r = qr.rank();
    if (r == 0) throw std::invalid_argument("subspace_distance: zero dictionary");
    Mat Q = qr.householderQ() * Mat::Identity(D.rows(), r);
    return Q;
}
}  // namespace

double subspace_distance(const Mat& Da, const Mat& Db) {
    if (Da.rows() != Db.rows()) throw std::invalid_argument("subspace_distance: row mismatch");
    Mat Qa = orth_basis(Da), Qb = orth_basis(Db);
    Mat Pa = Qa * Qa.transpose(), Pb = Qb * Qb.transpose();
    double denom = std::sqrt(2.0 * std::max(Da.cols(), Db.cols()));
    return (Pa - Pb).norm() / denom;
}

double mse(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("mse: shape mismatch");
    return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double psnr(const Mat& a, const Mat& b, double peak) {
    double e = mse(a, b);
    if (e == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

}  // namespace msc
