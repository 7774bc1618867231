#pragma once

#include <cstdint>

#include "gradinv/tensor.hpp"

namespace gradinv {

// xoshiro256++ seeded through splitmix64. Gaussian variates use the classic
// Box-Muller transform, z0 = sqrt(-2 ln u1) * cos(2 pi u2) with the sin twin
// cached, so a stream is bit-reproducible for a given seed on any IEEE-754
// platform with the same libm. Laplace variates use inverse-CDF sampling.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();       // [0, 1)
    double uniform_open();  // (0, 1]
    double gaussian();      // N(0, 1)
    double laplace(double scale_b);
    Tensor gaussian_tensor(std::vector<int64_t> shape, double stddev = 1.0);

    // Independent child stream; deterministic in (seed, salt).
    Rng fork(uint64_t salt) const;
    uint64_t seed() const { return seed_; }

  private:
    uint64_t seed_ = 0;
    uint64_t s_[4] = {};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gradinv
