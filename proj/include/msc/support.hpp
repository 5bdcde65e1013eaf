#ifndef MSC_SUPPORT_HPP
#define MSC_SUPPORT_HPP

#include <msc/types.hpp>

namespace msc {

// S(1) = {e_1, ..., e_K}, d = 1.
SupportSet init_support_set(int K);

// S(d) = union over gamma in prev and atoms l of gamma + e_l o (1 - gamma),
// deduplicated in insertion order. Includes every gamma itself.
SupportSet expand_support_set(const SupportSet& prev);

// Indices (into S.masks) of the masks that are some row's argmax in W,
// deduplicated, in original component order. Ties pick the lowest index.
std::vector<int> prune_indices(const SupportSet& S, const Mat& W);

SupportSet prune_support_set(const SupportSet& S, const Mat& W);

// q(d): parameter count entering the BIC penalty.
long long count_parameters(Family family, const SupportSet& S, int n, int m, int K);

}  // namespace msc

#endif
