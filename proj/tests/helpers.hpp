#ifndef MSC_TEST_HELPERS_HPP
#define MSC_TEST_HELPERS_HPP

#include <msc/em.hpp>
#include <msc/spatial.hpp>
#include <msc/support.hpp>
#include <msc/types.hpp>

#include <random>
#include <set>

namespace msc_test {

using namespace msc;

inline Mat random_locations(int m, Rng& rng, double extent = 20.0) {
    std::uniform_real_distribution<double> u(0.0, extent);
    Mat loc(m, 2);
    for (int l = 0; l < m; ++l) {
        loc(l, 0) = u(rng);
        loc(l, 1) = u(rng);
    }
    return loc;
}

inline Mat random_unit_dictionary(int m, int K, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat D(m, K);
    for (int k = 0; k < K; ++k) {
        for (int l = 0; l < m; ++l) D(l, k) = gauss(rng);
        D.col(k) /= D.col(k).norm();
    }
    return D;
}

// A structurally valid random mixture state over random d-sparse supports,
// with coefficients exactly zero off support.
inline MixtureState random_state(Family family, int n, int m, int K, int d, Rng& rng,
                                 CorrKernel kernel = CorrKernel::exponential) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    MixtureState st;
    st.family = family;
    st.kernel = kernel;
    st.dict.atoms = random_unit_dictionary(m, K, rng);

    int J = std::min(K, 2 + static_cast<int>(rng() % 3));  // K singletons exist at d = 1
    st.supports.sparsity = d;
    std::set<SupportMask> seen;
    while (st.supports.size() < J) {
        SupportMask g(K);
        int pop = 1 + static_cast<int>(rng() % d);
        while (g.popcount() < pop) g.set(static_cast<int>(rng() % K));
        if (seen.insert(g).second) st.supports.masks.push_back(g);
    }
    J = st.supports.size();

    st.weights.resize(J);
    for (int j = 0; j < J; ++j) st.weights[j] = 0.2 + unif(rng);
    st.weights /= st.weights.sum();

    st.coeffs.assign(n, std::vector<Vec>(J));
    st.noise.assign(n, NoiseParams{});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < J; ++j) {
            Vec a = Vec::Zero(K);
            for (int k : st.supports.masks[j].active()) a[k] = 0.5 + unif(rng);
            st.coeffs[i][j] = a;
        }
        st.noise[i].sigma2 = 0.3 + unif(rng);
        st.noise[i].omega = 0.1 + 0.3 * unif(rng);
    }
    return st;
}

// Random dataset loosely consistent with a state (mixture draw + noise).
inline Dataset random_dataset_for(const MixtureState& st, int n, Rng& rng,
                                  const Mat* locations = nullptr) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset data;
    const int m = st.dict.m();
    data.X.resize(m, n);
    for (int i = 0; i < n; ++i) {
        int j = static_cast<int>(rng() % st.J());
        Vec eta = st.eta(i, j);
        for (int l = 0; l < m; ++l)
            data.X(l, i) = eta[l] + std::sqrt(st.noise[i].sigma2) * gauss(rng);
    }
    if (locations) data.locations = *locations;
    return data;
}

inline Dataset random_poisson_dataset(const MixtureState& st, int n, Rng& rng) {
    Dataset data;
    const int m = st.dict.m();
    data.X.resize(m, n);
    for (int i = 0; i < n; ++i) {
        int j = static_cast<int>(rng() % st.J());
        Vec eta = st.eta(i, j);
        for (int l = 0; l < m; ++l) {
            double rate = std::exp(std::min(eta[l], 20.0));
            std::poisson_distribution<long> pois(rate);
            data.X(l, i) = static_cast<double>(pois(rng));
        }
    }
    return data;
}

}  // namespace msc_test

#endif
