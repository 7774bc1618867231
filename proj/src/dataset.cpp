#include "gradinv/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "gradinv/rng.hpp"

namespace gradinv {

namespace {

void draw_rectangle(Tensor& img, int side, Rng& rng) {
    int r0 = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(side - 2));
    int c0 = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(side - 2));
    int h = 2 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(side - r0 - 1));
    int w = 2 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(side - c0 - 1));
    double fg = 0.6 + 0.4 * rng.uniform();
    for (int r = r0; r < std::min(side, r0 + h); ++r)
        for (int c = c0; c < std::min(side, c0 + w); ++c) img[r * side + c] = fg;
}

void draw_cross(Tensor& img, int side, Rng& rng) {
    int cr = 1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(side - 2));
    int cc = 1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(side - 2));
    double fg = 0.6 + 0.4 * rng.uniform();
    for (int c = 0; c < side; ++c) img[cr * side + c] = fg;
    for (int r = 0; r < side; ++r) img[r * side + cc] = fg;
}

void draw_blob(Tensor& img, int side, Rng& rng) {
    double cr = rng.uniform() * (side - 1);
    double cc = rng.uniform() * (side - 1);
    double rad = 1.0 + 2.0 * rng.uniform();
    double amp = 0.7 + 0.3 * rng.uniform();
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
            img[r * side + c] += amp * std::exp(-d2 / (2.0 * rad * rad));
        }
    }
    for (int64_t i = 0; i < img.numel(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
}

}  // namespace

std::vector<Tensor> make_shapes_dataset(int count, int side, uint64_t seed) {
    if (count <= 0 || side < 4) throw ShapeError("make_shapes_dataset: need count > 0 and side >= 4");
    Rng rng(seed);
    std::vector<Tensor> data;
    data.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Tensor img({static_cast<int64_t>(side) * side});
        double bg = 0.05 * rng.uniform();
        for (int64_t j = 0; j < img.numel(); ++j) img[j] = bg;
        switch (i % 3) {
            case 0: draw_rectangle(img, side, rng); break;
            case 1: draw_cross(img, side, rng); break;
            default: draw_blob(img, side, rng); break;
        }
        data.push_back(std::move(img));
    }
    return data;
}

Tensor dataset_mean(const std::vector<Tensor>& data) {
    if (data.empty()) throw ShapeError("dataset_mean: empty dataset");
    Tensor m = Tensor::zeros(data[0].shape());
    for (const auto& d : data) axpy(m, 1.0, d);
    return scale(m, 1.0 / static_cast<double>(data.size()));
}

double dataset_avg_variance(const std::vector<Tensor>& data) {
    Tensor m = dataset_mean(data);
    double acc = 0.0;
    for (const auto& d : data) {
        Tensor diff = sub(d, m);
        acc += dot(diff, diff);
    }
    return acc / (static_cast<double>(data.size()) * static_cast<double>(m.numel()));
}

}  // namespace gradinv
