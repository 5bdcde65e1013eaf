#include <msc/spatial.hpp>

#include <algorithm>
#include <cmath>

namespace msc {

Mat distance_matrix(const Mat& locations) {
    const Eigen::Index m = locations.rows();
    Mat D(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        D(a, a) = 0.0;
        for (Eigen::Index b = a + 1; b < m; ++b) {
            double d = (locations.row(a) - locations.row(b)).norm();
            D(a, b) = d;
            D(b, a) = d;
        }
    }
    return D;
}

KernelBounds default_omega_bounds(CorrKernel kernel) {
    if (kernel == CorrKernel::autoregressive) return {1.0 + 1e-6, 1e3};
    return {1e-4, 1e3};
}

double default_omega(CorrKernel kernel, const Mat& dist) {
    if (kernel == CorrKernel::autoregressive) return 2.0;
    std::vector<double> off;
    off.reserve(static_cast<std::size_t>(dist.rows() * (dist.rows() - 1) / 2));
    for (Eigen::Index a = 0; a < dist.rows(); ++a)
        for (Eigen::Index b = a + 1; b < dist.cols(); ++b) off.push_back(dist(a, b));
    if (off.empty()) return 1.0;
    std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
    double med = off[off.size() / 2];
    if (med <= 0) med = 1.0;
    double w = kernel == CorrKernel::gaussian ? 3.0 / (med * med) : 3.0 / med;
    KernelBounds b = default_omega_bounds(kernel);
    return std::clamp(w, b.lo, b.hi);
}

Mat build_correlation_matrix(CorrKernel kernel, double omega, const Mat& dist,
                             const KernelBounds* bounds) {
    KernelBounds b = bounds ? *bounds : default_omega_bounds(kernel);
    if (omega < b.lo || omega > b.hi)
        throw std::invalid_argument("build_correlation_matrix: omega out of bounds");
    const Eigen::Index m = dist.rows();
    Mat R(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        R(a, a) = 1.0;
        for (Eigen::Index c = a + 1; c < m; ++c) {
            double d = dist(a, c);
            double v;
            switch (kernel) {
                case CorrKernel::exponential: v = std::exp(-omega * d); break;
                case CorrKernel::gaussian: v = std::exp(-omega * d * d); break;
                case CorrKernel::autoregressive: v = std::pow(omega, -d); break;
                default: v = 0; break;
            }
            R(a, c) = v;
            R(c, a) = v;
        }
    }
    return R;
}

PrecisionFactor PrecisionFactor::compute(const Mat& R, double nugget) {
    if (R.rows() != R.cols()) throw std::invalid_argument("PrecisionFactor: non-square matrix");
    PrecisionFactor f;
    double nu = nugget;
    for (; nu <= 1e-4 + 1e-16; nu *= 10.0) {
        Mat A = R;
        A.diagonal().array() += nu;
        f.llt_.compute(A);
        if (f.llt_.info() == Eigen::Success) {
            f.nugget_ = nu;
            f.logdet_ = 2.0 * f.llt_.matrixLLT().diagonal().array().log().sum();
            if (std::isfinite(f.logdet_)) return f;
        }
        if (nu == 0) nu = 1e-9;  // so the escalation loop can move
    }
    throw numeric_error("correlation matrix not positive definite after nugget escalation");
}

PrecisionFactor PrecisionFactor::identity(int m) {
    PrecisionFactor f;
    f.llt_.compute(Mat::Identity(m, m));
    f.logdet_ = 0;
    f.nugget_ = 0;
    return f;
}

Mat PrecisionFactor::inverse() const {
    const Eigen::Index m = llt_.matrixLLT().rows();
    return llt_.solve(Mat::Identity(m, m));
}

namespace {

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          int iters = 80) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int t = 0; t < iters && (b - a) > 1e-10 * (hi - lo); ++t) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return f1 > f2 ? x1 : x2;
}

}  // namespace

Ascent1DResult newton_ascend_1d(const std::function<double(double)>& f, double x0, double lo,
                                double hi, double fd_rel) {
    x0 = std::clamp(x0, lo, hi);
    const double q0 = f(x0);

    // Gradient at the requested relative step; curvature from a wider stencil,
    // where the second difference is still exact for quadratics but far less
    // prone to cancellation.
    double h = fd_rel * std::abs(x0);
    if (h < 1e-12) h = 1e-12;
    if (x0 - h < lo || x0 + h > hi) h = std::min(h, 0.5 * std::min(x0 - lo, hi - x0));
    double hc = 100.0 * h;
    if (x0 - hc < lo || x0 + hc > hi) hc = std::min(hc, 0.5 * std::min(x0 - lo, hi - x0));

    double step = 0;
    bool have_newton = false;
    if (h > 0 && hc > 0) {
        double qp = f(x0 + h), qm = f(x0 - h);
        double grad = (qp - qm) / (2 * h);
        double qpc = f(x0 + hc), qmc = f(x0 - hc);
        double curv = (qpc - 2 * q0 + qmc) / (hc * hc);
        if (std::isfinite(grad) && std::isfinite(curv) && curv < 0) {
            step = -grad / curv;
            have_newton = std::isfinite(step) && step != 0;
        } else if (std::isfinite(grad) && grad != 0) {
            // Not locally concave: walk uphill at a bounded scale.
            step = (grad > 0 ? 1.0 : -1.0) * 0.1 * (hi - lo);
        }
    }

    if (have_newton) {
        double xn = std::clamp(x0 + step, lo, hi);
        double qn = f(xn);
        if (xn != x0 && qn >= q0) return {xn, qn, true};
    }

    // Backtracking halving along the proposed direction.
    double s = step;
    for (int t = 0; t < 30 && s != 0; ++t, s *= 0.5) {
        double xc = std::clamp(x0 + s, lo, hi);
        if (xc == x0) continue;
        double qc = f(xc);
        if (qc >= q0) return {xc, qc, false};
    }

    double xg = golden_section_max(f, lo, hi);
    double qg = f(xg);
    if (qg >= q0 - 1e-12) return {xg, qg, false};
    return {x0, q0, false};
}

OmegaUpdate update_omega_newton(double omega_t, const Vec& x, const Vec& w, const Mat& etas,
                                double sigma2, CorrKernel kernel, const Mat& dist, double nugget,
                                const KernelBounds* bounds) {
    if (sigma2 <= 0) throw std::invalid_argument("update_omega_newton: sigma2 must be positive");
    KernelBounds b = bounds ? *bounds : default_omega_bounds(kernel);

    // Residual columns for components with nonzero responsibility.
    std::vector<Eigen::Index> act;
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w[j] > 0) act.push_back(j);
    Mat res(x.size(), static_cast<Eigen::Index>(act.size()));
    Vec wa(static_cast<Eigen::Index>(act.size()));
    for (std::size_t a = 0; a < act.size(); ++a) {
        res.col(static_cast<Eigen::Index>(a)) = x - etas.col(act[a]);
        wa[static_cast<Eigen::Index>(a)] = w[act[a]];
    }

    auto slice = [&](double omega) -> double {
        Mat R = build_correlation_matrix(kernel, omega, dist, &b);
        PrecisionFactor fac = PrecisionFactor::compute(R, nugget);
        double quad = 0;
        if (res.cols() > 0) {
            Mat solved = fac.solve(res);
            for (Eigen::Index a = 0; a < res.cols(); ++a)
                quad += wa[a] * res.col(a).dot(solved.col(a));
        }
        return -0.5 * (quad / sigma2 + fac.log_det());
    };

    Ascent1DResult r = newton_ascend_1d(slice, omega_t, b.lo, b.hi);
    return {r.x, !r.newton_accepted};
}

}  // namespace msc
