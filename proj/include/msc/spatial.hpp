#ifndef MSC_SPATIAL_HPP
#define MSC_SPATIAL_HPP

#include <msc/types.hpp>

#include <Eigen/Cholesky>

#include <functional>

namespace msc {

// Pairwise Euclidean distances between the m rows of locations (m x p).
Mat distance_matrix(const Mat& locations);

struct KernelBounds {
    double lo;
    double hi;
};

// Keeps R(omega) positive definite and numerically sane.
KernelBounds default_omega_bounds(CorrKernel kernel);

// Starting omega: effective range at the median distance for the distance
// kernels, 2 for the autocorrelated one.
double default_omega(CorrKernel kernel, const Mat& dist);

// R with unit diagonal; entries exp(-w*D), exp(-w*D^2) or w^(-D) by family.
// The stabilizing nugget is applied at factorization time, not here.
Mat build_correlation_matrix(CorrKernel kernel, double omega, const Mat& dist,
                             const KernelBounds* bounds = nullptr);

// Cholesky factor of R + nugget*I with a cached log-determinant.
// On factorization failure the nugget escalates x10 up to 1e-4 before
// a numeric_error is thrown.
class PrecisionFactor {
  public:
    static PrecisionFactor compute(const Mat& R, double nugget = 1e-8);
    static PrecisionFactor identity(int m);

    Vec solve(const Vec& v) const { return llt_.solve(v); }
    Mat solve(const Mat& M) const { return llt_.solve(M); }
    double quad_form(const Vec& r) const { return r.dot(llt_.solve(r)); }
    double log_det() const { return logdet_; }
    Mat inverse() const;
    double nugget_used() const { return nugget_; }
    int dim() const { return static_cast<int>(llt_.matrixLLT().rows()); }

  private:
    Eigen::LLT<Mat> llt_;
    double logdet_ = 0;
    double nugget_ = 0;
};

struct Ascent1DResult {
    double x;
    double value;
    bool newton_accepted;
};

// Maximizes f on [lo, hi] starting from x0: one safeguarded Newton step with
// central finite-difference derivatives (relative step fd_rel), then
// backtracking halving (<= 30), then golden-section as the last resort.
// Never returns a point with f below f(x0) - 1e-12.
Ascent1DResult newton_ascend_1d(const std::function<double(double)>& f, double x0, double lo,
                                double hi, double fd_rel = 1e-5);

struct OmegaUpdate {
    double omega;
    bool newton_rejected;
};

// One spatial-parameter update for a single signal: ascends the per-signal
// slice of the expected complete-data objective
//   Q(w) = -1/2 [ sum_j w_j (x-eta_j)' R(w)^{-1} (x-eta_j) / sigma2 + log|R(w)| ].
// etas holds the component means as columns; w is the responsibility row.
OmegaUpdate update_omega_newton(double omega_t, const Vec& x, const Vec& w, const Mat& etas,
                                double sigma2, CorrKernel kernel, const Mat& dist,
                                double nugget = 1e-8, const KernelBounds* bounds = nullptr);

}  // namespace msc

#endif
