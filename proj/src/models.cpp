#include "gradinv/models.hpp"

#include <cmath>
#include <memory>

namespace gradinv {

using ad::Value;

const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::kNone: return "none";
        case NoiseKind::kGaussian: return "gaussian";
        case NoiseKind::kLaplacian: return "laplacian";
    }
    return "?";
}

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "none") return NoiseKind::kNone;
    if (name == "gaussian") return NoiseKind::kGaussian;
    if (name == "laplacian") return NoiseKind::kLaplacian;
    throw ShapeError("unknown noise kind '" + name + "'");
}

namespace {

// Hidden widths per architecture; the input layer width is spec.input_dim.
std::vector<int64_t> hidden_widths(const std::string& name) {
    if (name == "linear-1") return {};
    if (name == "mlp-2") return {32};
    if (name == "mlp-3") return {32, 16};
    if (name == "mlp-4") return {64, 32, 16};
    if (name == "cnn-tiny") return {};
    throw ShapeError("unknown architecture spec '" + name + "'");
}

constexpr int64_t kConvChannels = 4;
constexpr int64_t kConvKernel = 3;

int64_t cnn_side(int64_t input_dim) {
    auto side = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(input_dim))));
    if (side * side != input_dim) {
        throw ShapeError("cnn-tiny requires a square input, got dim " + std::to_string(input_dim));
    }
    return side;
}

// im2col index map for a 3x3 same-padding convolution over a side x side
// grid, laid out [kernel_pos, pixel] so the patch matrix multiplies as
// W[channels, 9] x cols[9, side*side]. Out-of-bounds taps are -1 (zero).
std::shared_ptr<const std::vector<int64_t>> im2col_indices(int64_t side) {
    auto idx = std::make_shared<std::vector<int64_t>>();
    idx->reserve(static_cast<size_t>(kConvKernel * kConvKernel * side * side));
    for (int64_t dr = 0; dr < kConvKernel; ++dr) {
        for (int64_t dc = 0; dc < kConvKernel; ++dc) {
            for (int64_t r = 0; r < side; ++r) {
                for (int64_t c = 0; c < side; ++c) {
                    int64_t rr = r + dr - 1, cc = c + dc - 1;
                    bool in = rr >= 0 && rr < side && cc >= 0 && cc < side;
                    idx->push_back(in ? rr * side + cc : -1);
                }
            }
        }
    }
    return idx;
}

}  // namespace

AttackedModel AttackedModel::build(const ArchSpec& spec, uint64_t seed, ClientLoss loss, int label) {
    if (spec.input_dim <= 0 || spec.classes <= 0) throw ShapeError("architecture spec needs positive dimensions");
    AttackedModel m;
    m.spec_ = spec;
    m.loss_ = loss;
    m.label_ = label;
    Rng rng(seed);
    auto add_dense = [&](int64_t out, int64_t in, const std::string& base) {
        double std_w = 1.0 / std::sqrt(static_cast<double>(in));
        m.param_names_.push_back(base + ".w");
        m.params_.push_back(rng.gaussian_tensor({out, in}, std_w));
        if (spec.bias) {
            m.param_names_.push_back(base + ".b");
            m.params_.push_back(rng.gaussian_tensor({out}, std_w));
        }
    };
    if (spec.name == "cnn-tiny") {
        int64_t side = cnn_side(spec.input_dim);
        double std_conv = 1.0 / std::sqrt(static_cast<double>(kConvKernel * kConvKernel));
        m.param_names_.push_back("conv.w");
        m.params_.push_back(rng.gaussian_tensor({kConvChannels, kConvKernel * kConvKernel}, std_conv));
        if (spec.bias) {
            m.param_names_.push_back("conv.b");
            m.params_.push_back(rng.gaussian_tensor({kConvChannels}, std_conv));
        }
        add_dense(spec.classes, kConvChannels * side * side, "fc");
    } else {
        std::vector<int64_t> widths{spec.input_dim};
        for (int64_t h : hidden_widths(spec.name)) widths.push_back(h);
        widths.push_back(spec.classes);
        for (size_t l = 0; l + 1 < widths.size(); ++l) {
            add_dense(widths[l + 1], widths[l], "layer" + std::to_string(l));
        }
    }
    return m;
}

int64_t AttackedModel::param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
}

std::string AttackedModel::id() const {
    return spec_.name + "/n" + std::to_string(spec_.input_dim) + "/c" + std::to_string(spec_.classes);
}

std::vector<Value> AttackedModel::param_leaves() const {
    std::vector<Value> leaves;
    leaves.reserve(params_.size());
    for (const auto& p : params_) leaves.push_back(ad::leaf(p));
    return leaves;
}

Value AttackedModel::forward(const Value& x, const std::vector<Value>& params) const {
    if (x.tensor().rank() != 1 || x.numel() != spec_.input_dim) {
        throw ShapeError(id() + ": input must have shape [" + std::to_string(spec_.input_dim) + "], got " +
                         shape_str(x.shape()));
    }
    size_t pi = 0;
    auto next = [&]() -> const Value& { return params[pi++]; };
    if (spec_.name == "cnn-tiny") {
        int64_t side = cnn_side(spec_.input_dim);
        Value cols = reshape(gather(x, im2col_indices(side)), {kConvKernel * kConvKernel, side * side});
        Value conv = matmul(next(), cols);  // [channels, pixels]
        if (spec_.bias) conv = ad::add(conv, transpose(expand_rows(next(), side * side)));
        Value h = reshape(relu(conv), {kConvChannels * side * side});
        Value logits = matmul(next(), h);
        if (spec_.bias) logits = ad::add(logits, next());
        return logits;
    }
    Value h = x;
    size_t layers = hidden_widths(spec_.name).size() + 1;
    for (size_t l = 0; l < layers; ++l) {
        h = matmul(next(), h);
        if (spec_.bias) h = ad::add(h, next());
        if (l + 1 < layers) h = relu(h);
    }
    return h;
}

Value AttackedModel::client_loss(const Value& x, const std::vector<Value>& params, int label) const {
    Value logits = forward(x, params);
    if (loss_ == ClientLoss::kSoftmaxCrossEntropy) {
        return softmax_cross_entropy(logits, label);
    }
    Tensor target = hse_target_.defined() ? hse_target_ : onehot(label, spec_.classes);
    if (target.numel() != logits.numel()) {
        throw ShapeError("half-squared-error target length " + std::to_string(target.numel()) +
                         " does not match output " + std::to_string(logits.numel()));
    }
    Value diff = ad::sub(logits, ad::constant(target));
    return scalar_mul(sum(square(diff)), 0.5);
}

Value AttackedModel::client_gradient_value(const Value& x, int label) const {
    std::vector<Value> leaves = param_leaves();
    Value loss = client_loss(x, leaves, label);
    std::vector<Value> grads = ad::backward(loss, leaves, /*create_graph=*/true);
    std::vector<Value> flat;
    flat.reserve(grads.size());
    for (auto& g : grads) flat.push_back(g.tensor().rank() == 1 ? g : reshape(g, {g.numel()}));
    return concat(flat);
}

LeakedGradient AttackedModel::client_gradient(const Tensor& x, int label) const {
    Value g = client_gradient_value(ad::leaf(x), label);
    return LeakedGradient{g.tensor(), id(), NoiseKind::kNone, 0.0, 1};
}

LeakedGradient AttackedModel::batch_gradient(const std::vector<Tensor>& xs, const std::vector<int>& ys) const {
    if (xs.empty()) throw ShapeError("batch_gradient: empty batch");
    if (xs.size() != ys.size()) throw ShapeError("batch_gradient: inputs and labels differ in length");
    Tensor acc;
    for (size_t i = 0; i < xs.size(); ++i) {
        LeakedGradient g = client_gradient(xs[i], ys[i]);
        if (i == 0) {
            acc = g.values;
        } else {
            axpy(acc, 1.0, g.values);
        }
    }
    LeakedGradient out{scale(acc, 1.0 / static_cast<double>(xs.size())), id(), NoiseKind::kNone, 0.0,
                       static_cast<int>(xs.size())};
    return out;
}

Value projected_gradient(const AttackedModel& m, const Value& x, int label, const Tensor& v) {
    if (v.numel() != m.param_count()) {
        throw ShapeError("projected_gradient: direction length " + std::to_string(v.numel()) +
                         " does not match parameter count " + std::to_string(m.param_count()));
    }
    Value g = m.client_gradient_value(x, label);
    return dot_v(ad::constant(v), g);
}

}  // namespace gradinv
