#pragma once

#include <vector>

#include "gradinv/models.hpp"
#include "gradinv/rng.hpp"

namespace gradinv {

struct RVEstimate {
    double value = 0.0;
    int M = 0;
    int N = 0;
    double stderr_value = 0.0;
    bool orthonormal = true;  // false when M exceeded the parameter count
};

// Random projection directions over parameter space: M Gaussian draws,
// Gram-Schmidt orthonormalized when M <= dim, otherwise unit-sphere
// normalized only.
std::vector<Tensor> rv_directions(int64_t dim, int M, Rng& rng, bool* orthonormal);

// Estimates E_v E_x || d/dx (v' dL/dW) || over the first N dataset points
// and M directions, with the standard error over the N*M terms.
RVEstimate estimate_rv(const AttackedModel& model, const std::vector<Tensor>& dataset, const std::vector<int>& labels,
                       int M, int N, Rng& rng);

// Max over the dataset of the Frobenius norm of the mixed derivative
// d/dx d/dW of the client loss, in closed form. Only linear-1 with
// half-squared-error admits this; anything else throws.
double exact_rv_bilinear(const AttackedModel& model, const std::vector<Tensor>& dataset);

}  // namespace gradinv
