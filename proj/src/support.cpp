#include <msc/support.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>

namespace msc {

const char* family_name(Family f) {
    switch (f) {
        case Family::gaussian_simple: return "gaussian";
        case Family::gaussian_spatial: return "spatial";
        case Family::poisson: return "poisson";
        case Family::binomial: return "binomial";
        case Family::gaussian_expfam: return "ex-gaussian";
    }
    return "?";
}

Family family_from_name(const std::string& s) {
    if (s == "gaussian") return Family::gaussian_simple;
    if (s == "spatial") return Family::gaussian_spatial;
    if (s == "poisson") return Family::poisson;
    if (s == "binomial") return Family::binomial;
    if (s == "ex-gaussian") return Family::gaussian_expfam;
    throw std::invalid_argument("unknown family: " + s);
}

const char* kernel_name(CorrKernel k) {
    switch (k) {
        case CorrKernel::exponential: return "exp";
        case CorrKernel::gaussian: return "gauss";
        case CorrKernel::autoregressive: return "ar";
    }
    return "?";
}

CorrKernel kernel_from_name(const std::string& s) {
    if (s == "exp" || s == "exponential") return CorrKernel::exponential;
    if (s == "gauss" || s == "gaussian") return CorrKernel::gaussian;
    if (s == "ar" || s == "autoregressive") return CorrKernel::autoregressive;
    throw std::invalid_argument("unknown kernel: " + s);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::size_t nw = std::min<std::size_t>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    std::exception_ptr err;
    std::mutex err_mu;
    for (std::size_t w = 0; w < nw; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < count; i += nw) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

Dataset make_dataset(const std::vector<Signal>& signals) {
    if (signals.empty()) throw std::invalid_argument("dataset needs at least one signal");
    const auto m = signals.front().values.size();
    Dataset d;
    d.X.resize(m, static_cast<Eigen::Index>(signals.size()));
    for (std::size_t i = 0; i < signals.size(); ++i) {
        if (signals[i].values.size() != m)
            throw std::invalid_argument("signals disagree on dimension m");
        if (signals[i].locations.has_value() != signals.front().locations.has_value())
            throw std::invalid_argument("signals disagree on location presence");
        d.X.col(static_cast<Eigen::Index>(i)) = signals[i].values;
    }
    if (signals.front().locations) {
        d.locations = *signals.front().locations;
        if (d.locations->rows() != m)
            throw std::invalid_argument("locations row count != m");
    }
    return d;
}

void validate_dataset(const Dataset& data, Family family, int trials) {
    if (data.n() < 1 || data.m() < 1) throw std::invalid_argument("empty dataset");
    if (data.locations && data.locations->rows() != data.m())
        throw std::invalid_argument("locations row count != m");
    if (family == Family::gaussian_spatial && !data.locations)
        throw std::invalid_argument("spatial family requires locations");
    if (is_count_family(family)) {
        for (int i = 0; i < data.n(); ++i)
            for (int l = 0; l < data.m(); ++l) {
                double v = data.X(l, i);
                if (v < 0 || v != std::floor(v))
                    throw std::invalid_argument("count data must be nonnegative integers");
                if (family == Family::binomial && v > trials)
                    throw std::invalid_argument("binomial count exceeds trials");
            }
    }
}

Vec Dictionary::normalize_columns() {
    Vec norms(K());
    for (int k = 0; k < K(); ++k) {
        double s = atoms.col(k).norm();
        norms[k] = s;
        if (s > 0) atoms.col(k) /= s;
    }
    return norms;
}

bool Dictionary::columns_unit_norm(double tol) const {
    for (int k = 0; k < K(); ++k)
        if (std::abs(atoms.col(k).norm() - 1.0) > tol) return false;
    return true;
}

SupportMask SupportMask::singleton(int K, int k) {
    SupportMask g(K);
    g.set(k);
    return g;
}

SupportMask SupportMask::from_string(const std::string& s) {
    SupportMask g(static_cast<int>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '1')
            g.set(static_cast<int>(k));
        else if (s[k] != '0')
            throw std::invalid_argument("support mask string must be 0/1");
    }
    return g;
}

int SupportMask::popcount() const {
    return static_cast<int>(std::accumulate(bits_.begin(), bits_.end(), 0));
}

std::vector<int> SupportMask::active() const {
    std::vector<int> idx;
    for (int k = 0; k < size(); ++k)
        if (bits_[k]) idx.push_back(k);
    return idx;
}

std::string SupportMask::to_string() const {
    std::string s(bits_.size(), '0');
    for (int k = 0; k < size(); ++k)
        if (bits_[k]) s[static_cast<std::size_t>(k)] = '1';
    return s;
}

bool SupportSet::contains(const SupportMask& g) const {
    return std::find(masks.begin(), masks.end(), g) != masks.end();
}

long long SupportSet::total_popcount() const {
    long long t = 0;
    for (const auto& g : masks) t += g.popcount();
    return t;
}

SupportSet init_support_set(int K) {
    if (K < 1) throw std::invalid_argument("init_support_set: K must be >= 1");
    SupportSet s;
    s.sparsity = 1;
    s.masks.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) s.masks.push_back(SupportMask::singleton(K, k));
    return s;
}

SupportSet expand_support_set(const SupportSet& prev) {
    if (prev.masks.empty()) throw std::invalid_argument("expand_support_set: empty set");
    const int K = prev.masks.front().size();
    SupportSet out;
    out.sparsity = prev.sparsity + 1;
    std::set<SupportMask> seen;
    for (const auto& g : prev.masks) {
        for (int l = 0; l < K; ++l) {
            SupportMask child = g;
            child.set(l);  // g + e_l o (1 - g); l already active leaves g unchanged
            if (seen.insert(child).second) out.masks.push_back(child);
        }
    }
    return out;
}

std::vector<int> prune_indices(const SupportSet& S, const Mat& W) {
    if (W.rows() == 0 || W.cols() == 0) throw std::invalid_argument("prune: empty W");
    if (W.cols() != S.size()) throw std::invalid_argument("prune: W columns != |S|");
    std::vector<char> keep(static_cast<std::size_t>(S.size()), 0);
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < W.cols(); ++j)
            if (W(i, j) > W(i, best)) best = static_cast<int>(j);  // tie keeps lower index
        keep[static_cast<std::size_t>(best)] = 1;
    }
    std::vector<int> idx;
    for (int j = 0; j < S.size(); ++j)
        if (keep[static_cast<std::size_t>(j)]) idx.push_back(j);
    return idx;
}

SupportSet prune_support_set(const SupportSet& S, const Mat& W) {
    SupportSet out;
    out.sparsity = S.sparsity;
    for (int j : prune_indices(S, W)) out.masks.push_back(S.masks[static_cast<std::size_t>(j)]);
    return out;
}

long long count_parameters(Family family, const SupportSet& S, int n, int m, int K) {
    if (S.masks.empty()) throw std::invalid_argument("count_parameters: empty support set");
    const long long mk = static_cast<long long>(m) * K;
    const long long support = static_cast<long long>(n) * S.total_popcount();
    switch (family) {
        case Family::gaussian_simple: return mk + 2LL * n + support;
        case Family::gaussian_spatial: return mk + 3LL * n + support;
        case Family::poisson:
        case Family::binomial:
        case Family::gaussian_expfam: return mk + n + support;
    }
    throw std::invalid_argument("count_parameters: unknown family");
}

void validate_state(const MixtureState& st, double tol) {
    const int J = st.J();
    if (J != st.weights.size()) throw std::invalid_argument("state: weights size != J");
    if (std::abs(st.weights.sum() - 1.0) > tol) throw std::invalid_argument("state: weights off simplex");
    if (st.weights.minCoeff() < 0) throw std::invalid_argument("state: negative weight");
    for (const auto& per_signal : st.coeffs) {
        if (static_cast<int>(per_signal.size()) != J)
            throw std::invalid_argument("state: coeffs per signal != J");
        for (int j = 0; j < J; ++j)
            for (int k = 0; k < st.dict.K(); ++k)
                if (!st.supports.masks[static_cast<std::size_t>(j)].test(k) &&
                    per_signal[static_cast<std::size_t>(j)][k] != 0.0)
                    throw std::invalid_argument("state: nonzero coefficient off support");
    }
}

bool rows_stochastic(const Mat& W, double tol) {
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        if (std::abs(W.row(i).sum() - 1.0) > tol) return false;
        if (W.row(i).minCoeff() < -tol || W.row(i).maxCoeff() > 1 + tol) return false;
    }
    return true;
}

}  // namespace msc
