#include <msc/baseline.hpp>
#include <msc/patch.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msc {

std::vector<int> patch_positions(int side, int patch, int stride) {
    if (patch > side) throw std::invalid_argument("patch larger than image side");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    std::vector<int> pos;
    for (int p = 0; p + patch < side; p += stride) pos.push_back(p);
    pos.push_back(side - patch);
    return pos;
}

Dataset patches_to_dataset(const Mat& img, int patch, int stride) {
    const auto rows = patch_positions(static_cast<int>(img.rows()), patch, stride);
    const auto cols = patch_positions(static_cast<int>(img.cols()), patch, stride);
    const int m = patch * patch;

    Dataset data;
    data.X.resize(m, static_cast<Eigen::Index>(rows.size() * cols.size()));
    int i = 0;
    for (int pr : rows)
        for (int pc : cols) {
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c)
                    data.X(r * patch + c, i) = img(pr + r, pc + c);
            ++i;
        }

    Mat loc(m, 2);  // patch-local pixel coordinates, row-major to match vectorization
    for (int r = 0; r < patch; ++r)
        for (int c = 0; c < patch; ++c) {
            loc(r * patch + c, 0) = r;
            loc(r * patch + c, 1) = c;
        }
    data.locations = loc;
    return data;
}

Mat reconstruct_from_patches(const Mat& patch_columns, int height, int width, int patch,
                             int stride) {
    const auto rows = patch_positions(height, patch, stride);
    const auto cols = patch_positions(width, patch, stride);
    if (patch_columns.cols() != static_cast<Eigen::Index>(rows.size() * cols.size()))
        throw std::invalid_argument("reconstruct_from_patches: patch count mismatch");
    Mat acc = Mat::Zero(height, width);
    Mat cover = Mat::Zero(height, width);
    int i = 0;
    for (int pr : rows)
        for (int pc : cols) {
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c) {
                    acc(pr + r, pc + c) += patch_columns(r * patch + c, i);
                    cover(pr + r, pc + c) += 1.0;
                }
            ++i;
        }
    return acc.array() / cover.array();
}

Mat denoise_image(const Mat& noisy, const DenoiseConfig& cfg) {
    Dataset data = patches_to_dataset(noisy, cfg.patch, cfg.stride);

    FitConfig fc;
    fc.family = Family::gaussian_spatial;
    fc.kernel = cfg.kernel;
    fc.K = cfg.K;
    fc.d_max = cfg.d_max;
    fc.tol = cfg.tol;
    fc.max_iter = cfg.max_iter;
    fc.seed = cfg.seed;
    fc.threads = cfg.threads;
    fc.rc.c0 = cfg.c0;
    fc.rc.c_min = cfg.c_min;

    FitResult fit = fit_msc(data, fc);
    Mat W = e_step(data, fit.state, fc);

    Mat recon(data.m(), data.n());
    for (int i = 0; i < data.n(); ++i) {
        if (cfg.hard) {
            int best = 0;
            for (int j = 1; j < fit.state.J(); ++j)
                if (W(i, j) > W(i, best)) best = j;
            recon.col(i) = fit.state.eta(i, best);
        } else {
            Vec mix = Vec::Zero(data.m());
            for (int j = 0; j < fit.state.J(); ++j)
                if (W(i, j) > 0) mix += W(i, j) * fit.state.eta(i, j);
            recon.col(i) = mix;
        }
    }

    Mat out = reconstruct_from_patches(recon, static_cast<int>(noisy.rows()),
                                       static_cast<int>(noisy.cols()), cfg.patch, cfg.stride);
    return out.array().round().max(0.0).min(255.0);
}

Mat denoise_image_baseline(const Mat& noisy, int patch, int stride, int K, int d, int iters,
                           std::uint64_t seed) {
    Dataset data = patches_to_dataset(noisy, patch, stride);
    BaselineConfig bc{K, d, iters, seed};
    BaselineResult res = baseline_fit(data, bc);
    Mat recon = res.dict.atoms * res.coeffs;
    Mat out = reconstruct_from_patches(recon, static_cast<int>(noisy.rows()),
                                       static_cast<int>(noisy.cols()), patch, stride);
    return out.array().round().max(0.0).min(255.0);
}

}  // namespace msc
