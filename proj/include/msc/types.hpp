#ifndef MSC_TYPES_HPP
#define MSC_TYPES_HPP

#include <msc/common.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msc {

// One observed signal: m values, optionally measured at m points in R^p.
struct Signal {
    Vec values;
    std::optional<Mat> locations;  // m x p, p = 1 temporal / 2 spatial
};

// n signals of common dimension m sharing one location grid (when present).
// Signals are the columns of X.
struct Dataset {
    Mat X;                         // m x n
    std::optional<Mat> locations;  // m x p

    int m() const { return static_cast<int>(X.rows()); }
    int n() const { return static_cast<int>(X.cols()); }

    Signal signal(int i) const { return Signal{X.col(i), locations}; }
};

Dataset make_dataset(const std::vector<Signal>& signals);

// Throws std::invalid_argument when the data are unusable for the family
// (non-integer/negative counts, counts above trials, missing locations).
void validate_dataset(const Dataset& data, Family family, int trials = 1);

// m x K matrix of unit-norm atoms.
struct Dictionary {
    Mat atoms;

    int m() const { return static_cast<int>(atoms.rows()); }
    int K() const { return static_cast<int>(atoms.cols()); }

    // Rescales every column to unit norm; returns the norms that were divided out.
    Vec normalize_columns();
    bool columns_unit_norm(double tol = 1e-9) const;
};

// Binary atom-selection mask gamma for one mixture component.
class SupportMask {
  public:
    SupportMask() = default;
    explicit SupportMask(int K) : bits_(K, 0) {}
    static SupportMask singleton(int K, int k);
    static SupportMask from_string(const std::string& s);

    int size() const { return static_cast<int>(bits_.size()); }
    bool test(int k) const { return bits_[k] != 0; }
    void set(int k) { bits_[k] = 1; }
    int popcount() const;
    std::vector<int> active() const;  // ascending atom indices
    std::string to_string() const;

    bool operator==(const SupportMask& o) const { return bits_ == o.bits_; }
    bool operator<(const SupportMask& o) const { return bits_ < o.bits_; }

  private:
    std::vector<std::uint8_t> bits_;
};

// Ordered, duplicate-free candidate supports at sparsity level d.
// Component order is insertion order; that order is what makes the
// argmax tie-breaking in pruning deterministic.
struct SupportSet {
    std::vector<SupportMask> masks;
    int sparsity = 0;  // current d

    int size() const { return static_cast<int>(masks.size()); }
    bool contains(const SupportMask& g) const;
    long long total_popcount() const;
};

// Per-signal noise parameters; which fields are meaningful depends on the family.
struct NoiseParams {
    double sigma2 = 1.0;      // Gaussian families
    double omega = 0.0;       // spatial Gaussian
    double dispersion = 1.0;  // exponential family, fixed to 1 for Poisson/binomial
};

// Full parameter collection theta of a d-sparse mixture fit.
// coeffs[i][j] is the length-K coefficient vector alpha_ij, exactly zero
// wherever supports.masks[j] is zero.
struct MixtureState {
    Family family = Family::gaussian_simple;
    CorrKernel kernel = CorrKernel::exponential;
    int trials = 1;  // binomial only

    Dictionary dict;
    SupportSet supports;
    Vec weights;                           // J, on the simplex
    std::vector<std::vector<Vec>> coeffs;  // n x J vectors of length K
    std::vector<NoiseParams> noise;        // n

    int J() const { return supports.size(); }
    int n() const { return static_cast<int>(noise.size()); }

    // Mean predictor eta_ij = D (alpha_ij o gamma_j).
    Vec eta(int i, int j) const { return dict.atoms * coeffs[i][j]; }
};

// Checks the structural invariants (simplex weights, zeros off support).
void validate_state(const MixtureState& st, double tol = 1e-12);

// n x J posterior component weights; rows sum to 1 before rejection control.
using ResponsibilityMatrix = Mat;

bool rows_stochastic(const Mat& W, double tol = 1e-10);

}  // namespace msc

#endif
