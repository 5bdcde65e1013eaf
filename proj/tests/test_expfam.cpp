#include <doctest.h>

#include <msc/expfam.hpp>
#include <msc/gaussian.hpp>

#include "helpers.hpp"

#include <cmath>

using namespace msc;
using namespace msc_test;

namespace {

// Independent GLM fit: damped Newton with analytic gradient and Hessian on
// the selected atoms (oracle for the IRLS iteration).
Vec glm_newton_oracle(const ExpFamilySpec& spec, const Vec& x, const Mat& D,
                      const SupportMask& mask) {
    const auto idx = mask.active();
    Mat Ds(D.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a)
        Ds.col(static_cast<Eigen::Index>(a)) = D.col(idx[a]);
    Vec as = Vec::Zero(static_cast<Eigen::Index>(idx.size()));
    for (int it = 0; it < 200; ++it) {
        Vec eta = Ds * as;
        Vec grad = Ds.transpose() * (x - inverse_link(spec, eta));
        Mat H = Ds.transpose() * variance_function(spec, eta).asDiagonal() * Ds;
        H.diagonal().array() += 1e-12;
        Vec step = H.llt().solve(grad);
        double f0 = expfam_kernel(spec, x, Ds * as);
        double scale = 1.0;
        Vec cand = as + step;
        for (int h = 0; h < 40 && expfam_kernel(spec, x, Ds * cand) < f0; ++h) {
            scale *= 0.5;
            cand = as + scale * step;
        }
        if ((cand - as).norm() < 1e-12) break;
        as = cand;
        if (grad.norm() < 1e-11) break;
    }
    Vec out = Vec::Zero(D.cols());
    for (std::size_t a = 0; a < idx.size(); ++a) out[idx[a]] = as[static_cast<Eigen::Index>(a)];
    return out;
}

double q_slice_oracle(const ExpFamilySpec& spec, const Dataset& data, const MixtureState& st,
                      const Mat& W) {
    double q = 0;
    for (int i = 0; i < data.n(); ++i)
        for (int j = 0; j < st.J(); ++j)
            if (W(i, j) > 0) q += W(i, j) * expfam_kernel(spec, data.X.col(i), st.eta(i, j));
    return q;
}

}  // namespace

TEST_CASE("inverse_link anchors and clamping") {
    ExpFamilySpec pois{ExpFamily::poisson, 1};
    Vec eta(1);
    eta << 0.0;
    CHECK(inverse_link(pois, eta)[0] == doctest::Approx(1.0).epsilon(1e-14));

    ExpFamilySpec bin{ExpFamily::binomial, 1};
    CHECK(inverse_link(bin, eta)[0] == doctest::Approx(0.5).epsilon(1e-14));

    eta << 30.5;  // clamped to exp(30)
    CHECK(inverse_link(pois, eta)[0] == doctest::Approx(std::exp(30.0)).epsilon(1e-12));

    // componentwise monotone increasing
    Vec grid(7);
    grid << -40, -3, -1, 0, 1, 3, 40;
    for (ExpFamilySpec spec : {pois, ExpFamilySpec{ExpFamily::binomial, 5}}) {
        Vec mu = inverse_link(spec, grid);
        for (int l = 1; l < 7; ++l) CHECK(mu[l] >= mu[l - 1]);
    }
}

TEST_CASE("log_density_expfam anchors") {
    ExpFamilySpec pois{ExpFamily::poisson, 1};
    Vec x(1), eta(1);
    x << 0.0;
    eta << 0.0;
    CHECK(log_density_expfam(pois, x, eta) == doctest::Approx(-1.0).epsilon(1e-14));

    x << 2.0;
    CHECK(log_density_expfam(pois, x, eta) ==
          doctest::Approx(-1.0 - std::log(2.0)).epsilon(1e-14));

    ExpFamilySpec bin2{ExpFamily::binomial, 2};
    Vec xb(1);
    xb << 1.0;
    CHECK(log_density_expfam(bin2, xb, eta) == doctest::Approx(std::log(0.5)).epsilon(1e-14));

    Vec neg(1);
    neg << -1.0;
    CHECK_THROWS_AS(log_density_expfam(pois, neg, eta), std::invalid_argument);

    // finite for arbitrarily large natural parameters
    Vec big(1);
    big << 1e6;
    x << 3.0;
    CHECK(std::isfinite(log_density_expfam(pois, x, big)));
    big << -1e6;
    CHECK(std::isfinite(log_density_expfam(pois, x, big)));
}

TEST_CASE("irls_alpha_update: fixed points and hand arithmetic") {
    const int m = 4;
    ExpFamilySpec pois{ExpFamily::poisson, 1};
    Mat D(m, 1);
    D.col(0) = Vec::Constant(m, 1.0 / std::sqrt(double(m)));
    SupportMask mask = SupportMask::from_string("1");

    Vec a0 = Vec::Zero(1);
    a0[0] = 1.3;
    Vec x = inverse_link(pois, D * a0);  // x = g(eta) exactly
    Vec a1 = irls_alpha_update(pois, x, D, mask, a0);
    CHECK((a1 - a0).norm() < 1e-10);

    // m=1, D=[1], eta=0, x=1: working response 0 + (1-1)/1 = 0 -> alpha 0
    Mat D1 = Mat::Ones(1, 1);
    Vec x1(1), z1 = Vec::Zero(1);
    x1 << 1.0;
    Vec a = irls_alpha_update(pois, x1, D1, SupportMask::from_string("1"), z1);
    CHECK(a[0] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("iterated IRLS reaches the GLM optimum (oracle at 1e-4)") {
    Rng rng(113);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 6;
        Mat D = random_unit_dictionary(m, 3, rng);
        SupportMask mask = SupportMask::from_string("110");
        MixtureState gen;  // only used to sample counts at a known eta
        ExpFamilySpec pois{ExpFamily::poisson, 1};
        std::uniform_real_distribution<double> unif(0.2, 1.5);
        Vec a_true = Vec::Zero(3);
        a_true[0] = unif(rng);
        a_true[1] = unif(rng);
        Vec rate = inverse_link(pois, D * a_true);
        Vec x(m);
        for (int l = 0; l < m; ++l) {
            std::poisson_distribution<long> pd(rate[l]);
            x[l] = static_cast<double>(pd(rng));
        }
        (void)gen;

        Vec a = Vec::Zero(3);
        for (int it = 0; it < 400; ++it) {
            Vec next = irls_alpha_update(pois, x, D, mask, a);
            if ((next - a).norm() < 1e-12) {
                a = next;
                break;
            }
            a = next;
        }
        Vec want = glm_newton_oracle(pois, x, D, mask);
        CHECK((a - want).norm() < 1e-4 * std::max(1.0, want.norm()));
        CHECK(a[2] == 0.0);

        // the converged point is a fixed point of one more step
        Vec again = irls_alpha_update(pois, x, D, mask, a);
        CHECK((again - a).norm() < 1e-10);
    }
}

TEST_CASE("one Gaussian-identity IRLS step reproduces the identity-precision WLS") {
    Rng rng(127);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat D = random_unit_dictionary(5, 3, rng);
    SupportMask mask = SupportMask::from_string("101");
    Vec x(5), a0 = Vec::Zero(3);
    for (int l = 0; l < 5; ++l) x[l] = gauss(rng);
    ExpFamilySpec g{ExpFamily::gaussian_identity, 1};
    Vec irls = irls_alpha_update(g, x, D, mask, a0);
    Vec wls = update_alpha_wls(x, D, mask, nullptr);
    CHECK((irls - wls).norm() < 1e-12);
}

TEST_CASE("score_dictionary_column: vanishing at fit, canonical form, FD oracle") {
    Rng rng(131);
    ExpFamilySpec pois{ExpFamily::poisson, 1};

    // single signal, single component, c = 1: score is x - exp(eta)
    MixtureState st;
    st.family = Family::poisson;
    st.dict.atoms = random_unit_dictionary(4, 2, rng);
    st.supports.sparsity = 1;
    st.supports.masks = {SupportMask::from_string("10")};
    st.weights = Vec::Ones(1);
    Vec a = Vec::Zero(2);
    a[0] = 1.0;
    st.coeffs = {{a}};
    st.noise = {NoiseParams{}};
    Dataset data;
    data.X.resize(4, 1);
    data.X.col(0) << 1, 0, 3, 2;
    Mat W = Mat::Ones(1, 1);

    auto U = score_dictionary_column(0, data, st, W);
    REQUIRE(U.has_value());
    Vec expect = data.X.col(0) - inverse_link(pois, st.eta(0, 0));
    CHECK((*U - expect).norm() < 1e-12);

    // perfect fit: score vanishes
    Dataset fitdata;
    fitdata.X = inverse_link(pois, st.eta(0, 0));
    auto U0 = score_dictionary_column(0, fitdata, st, W);
    CHECK(U0->norm() < 1e-12);

    CHECK_FALSE(score_dictionary_column(1, data, st, W).has_value());
}

TEST_CASE("score matches central finite differences of Q at 1e-6 relative") {
    Rng rng(137);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 3, m = 4 + static_cast<int>(rng() % 7), K = 2 + static_cast<int>(rng() % 3);
        MixtureState st = random_state(Family::poisson, n, m, K, 2, rng);
        for (auto& row : st.coeffs)
            for (auto& aa : row) aa *= 0.5;  // keep rates moderate
        Dataset data = random_poisson_dataset(st, n, rng);
        Mat W(n, st.J());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < st.J(); ++j) W(i, j) = unif(rng);
            W.row(i) /= W.row(i).sum();
        }
        ExpFamilySpec spec{ExpFamily::poisson, 1};

        for (int k = 0; k < K; ++k) {
            auto U = score_dictionary_column(k, data, st, W);
            bool used = false;
            for (const auto& g : st.supports.masks) used |= g.test(k);
            REQUIRE(U.has_value() == used);
            if (!used) continue;

            Vec fd(m);
            const double h = 1e-5;
            for (int l = 0; l < m; ++l) {
                MixtureState plus = st, minus = st;
                plus.dict.atoms(l, k) += h;
                minus.dict.atoms(l, k) -= h;
                fd[l] = (q_slice_oracle(spec, data, plus, W) -
                         q_slice_oracle(spec, data, minus, W)) /
                        (2 * h);
            }
            CHECK((*U - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
        }
    }
}

TEST_CASE("bb_step_size arithmetic and guards") {
    Vec d0(2), d1(2), u0(2), u1(2);
    d0 << 0, 0;
    d1 << 1, 0;
    u0 << 0, 0;
    u1 << 2, 0;
    CHECK(bb_step_size(d0, d1, u0, u1) == doctest::Approx(0.5).epsilon(1e-14));

    CHECK(bb_step_size(d0, d1, u1, u1) == kBbFallbackStep);  // vanishing curvature

    u0 << 0, 0;
    u1 << 1, -1;
    d1 << 1, 1;  // numerator (1,1).(1,-1) = 0 -> non-positive guard
    CHECK(bb_step_size(d0, d1, u0, u1) == kBbFallbackStep);
}

TEST_CASE("gradient_update_column: zero score keeps the column; slices never decrease") {
    Rng rng(139);
    ExpFamilySpec spec{ExpFamily::poisson, 1};

    // zero score: perfect fit leaves the unit column unchanged
    MixtureState st;
    st.family = Family::poisson;
    st.dict.atoms = random_unit_dictionary(4, 1, rng);
    st.supports.sparsity = 1;
    st.supports.masks = {SupportMask::from_string("1")};
    st.weights = Vec::Ones(1);
    Vec a = Vec::Zero(1);
    a[0] = 0.8;
    st.coeffs = {{a}};
    st.noise = {NoiseParams{}};
    Dataset data;
    data.X = inverse_link(spec, st.eta(0, 0));
    Mat W = Mat::Ones(1, 1);
    BBHistory hist;
    Vec before = st.dict.atoms.col(0);
    bool rejected = false;
    CHECK(gradient_update_column(0, data, st, W, hist, &rejected));
    CHECK((st.dict.atoms.col(0) - before).norm() < 1e-12);

    // Q slice is non-decreasing across random instances
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3, m = 5, K = 3;
        MixtureState s = random_state(Family::poisson, n, m, K, 2, rng);
        for (auto& row : s.coeffs)
            for (auto& aa : row) aa *= 0.5;
        Dataset d = random_poisson_dataset(s, n, rng);
        Mat Wr(n, s.J());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < s.J(); ++j) Wr(i, j) = unif(rng);
            Wr.row(i) /= Wr.row(i).sum();
        }
        for (int k = 0; k < K; ++k) {
            double q0 = column_q_slice(k, d, s, Wr);
            BBHistory h;
            bool rej = false;
            if (!gradient_update_column(k, d, s, Wr, h, &rej)) continue;
            double q1 = column_q_slice(k, d, s, Wr);
            CHECK(q1 >= q0 - 1e-10 * std::max(1.0, std::abs(q0)));
        }
    }
}
