#ifndef MSC_PATCH_HPP
#define MSC_PATCH_HPP

#include <msc/em.hpp>
#include <msc/types.hpp>

#include <vector>

namespace msc {

// Upper-left offsets of the patches along one image side: a stride grid plus
// the clamped final position, so coverage always reaches the border.
std::vector<int> patch_positions(int side, int patch, int stride);

// Every patch x patch block at the stride grid, vectorized row-major into
// columns; locations are the patch-local pixel coordinates, shared by all
// patches.
Dataset patches_to_dataset(const Mat& img, int patch, int stride);

// Overlap-averaged recomposition; patches are columns in grid row-major
// order matching patches_to_dataset.
Mat reconstruct_from_patches(const Mat& patch_columns, int height, int width, int patch,
                             int stride);

struct DenoiseConfig {
    int patch = 12;
    int stride = 3;
    int K = 16;
    int d_max = 2;
    CorrKernel kernel = CorrKernel::exponential;
    double tol = 1e-5;
    int max_iter = 60;
    std::uint64_t seed = 0;
    bool hard = false;  // argmax component instead of the posterior mean
    int threads = 1;
    double c0 = 0.9;
    double c_min = 1e-3;
};

// Spatial-model denoising: fit the patch dataset, rebuild each patch from the
// responsibility-weighted component means, recompose, clamp to [0,255].
Mat denoise_image(const Mat& noisy, const DenoiseConfig& cfg);

// Baseline comparator with the same patch pipeline: OMP-ALS encode/decode.
Mat denoise_image_baseline(const Mat& noisy, int patch, int stride, int K, int d, int iters,
                           std::uint64_t seed);

}  // namespace msc

#endif
