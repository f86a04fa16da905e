#pragma once

#include <vector>

#include "s3search/rng.hpp"

namespace s3s::resampling {

// Normalized exponential-tilt weights w_i ∝ exp(lambda * s_i), computed in
// log space with max subtraction. When lambda * range overflows the
// exponential, mass collapses onto the argmax set.
std::vector<double> tilt_weights(const std::vector<double>& scores, double lambda);

// Effective sample size 1 / sum w_i^2 of already-normalized weights.
double ess(const std::vector<double>& weights);

// Srinivasan sampling process: dependent rounding of expected offspring
// counts xi (sum = N) into integer counts n with n_i in {floor, ceil},
// E[n_i] = xi_i, and sum n_i = N exactly.
std::vector<int> ssp_round(const std::vector<double>& xi, Rng& rng);

// Offspring counts -> flat list of parent indices, ascending.
std::vector<int> materialize(const std::vector<int>& counts);

}  // namespace s3s::resampling
