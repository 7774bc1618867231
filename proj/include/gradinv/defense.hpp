#pragma once

#include "gradinv/models.hpp"
#include "gradinv/rng.hpp"

namespace gradinv {

// Adds i.i.d. N(0, variance) to every entry. Pure: the input is not mutated.
LeakedGradient perturb_gaussian(const LeakedGradient& g, double variance, Rng& rng);

// Adds i.i.d. Laplace(0, b) with b = sqrt(variance / 2), so the per-entry
// variance equals the Gaussian sweep's at the same grid point.
LeakedGradient perturb_laplacian(const LeakedGradient& g, double variance, Rng& rng);

}  // namespace gradinv
