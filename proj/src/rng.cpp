#include "gradinv/rng.hpp"

#include <cmath>

namespace gradinv {

namespace {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
    uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
    uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() { return 1.0 - uniform(); }

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform_open();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double z0 = r * std::cos(kTwoPi * u2);
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return z0;
}

double Rng::laplace(double scale_b) {
    // u ~ U(-1/2, 1/2); x = -b * sgn(u) * ln(1 - 2|u|)
    double u = uniform() - 0.5;
    double sg = u < 0.0 ? -1.0 : 1.0;
    return -scale_b * sg * std::log(1.0 - 2.0 * std::fabs(u));
}

Tensor Rng::gaussian_tensor(std::vector<int64_t> shape, double stddev) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * gaussian();
    return t;
}

Rng Rng::fork(uint64_t salt) const {
    uint64_t sm = seed_ ^ (0xd1b54a32d192ed03ULL * (salt + 1));
    return Rng(splitmix64(sm));
}

}  // namespace gradinv
