#include "gradinv/defense.hpp"

#include <cmath>

namespace gradinv {

LeakedGradient perturb_gaussian(const LeakedGradient& g, double variance, Rng& rng) {
    if (variance < 0.0) throw ShapeError("perturb_gaussian: negative variance");
    LeakedGradient out = g;
    out.kind = NoiseKind::kGaussian;
    out.variance = variance;
    if (variance == 0.0) return out;
    double sd = std::sqrt(variance);
    for (int64_t i = 0; i < out.values.numel(); ++i) out.values[i] += sd * rng.gaussian();
    return out;
}

LeakedGradient perturb_laplacian(const LeakedGradient& g, double variance, Rng& rng) {
    if (variance < 0.0) throw ShapeError("perturb_laplacian: negative variance");
    LeakedGradient out = g;
    out.kind = NoiseKind::kLaplacian;
    out.variance = variance;
    if (variance == 0.0) return out;
    double b = std::sqrt(variance / 2.0);
    for (int64_t i = 0; i < out.values.numel(); ++i) out.values[i] += rng.laplace(b);
    return out;
}

}  // namespace gradinv
