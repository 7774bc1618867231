#pragma once

#include <cstdint>
#include <vector>

#include "gradinv/tensor.hpp"

namespace gradinv {

// Procedural grayscale shapes (rectangles, crosses, blobs) on a side x side
// grid, values in [0, 1], flattened row-major. Deterministic in seed.
std::vector<Tensor> make_shapes_dataset(int count, int side, uint64_t seed);

Tensor dataset_mean(const std::vector<Tensor>& data);
double dataset_avg_variance(const std::vector<Tensor>& data);

}  // namespace gradinv
