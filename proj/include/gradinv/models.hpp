#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradinv/autodiff.hpp"
#include "gradinv/rng.hpp"
#include "gradinv/tensor.hpp"

namespace gradinv {

enum class ClientLoss { kSoftmaxCrossEntropy, kHalfSquaredError };
enum class NoiseKind { kNone, kGaussian, kLaplacian };

const char* noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(const std::string& name);

struct ArchSpec {
    std::string name;  // linear-1 | mlp-2 | mlp-3 | mlp-4 | cnn-tiny
    int64_t input_dim = 64;
    int64_t classes = 4;
    bool bias = true;
};

// Flattened client gradient in the model's fixed parameter order
// (layer-major, weights before biases, row-major within each tensor).
struct LeakedGradient {
    Tensor values;
    std::string model_id;
    NoiseKind kind = NoiseKind::kNone;
    double variance = 0.0;
    int batch_size = 1;
};

// A fixed-weight client model F(x; W) together with its scalar client loss.
// Immutable after construction except through mutable_params(), which tests
// use to pin closed-form weights.
class AttackedModel {
  public:
    static AttackedModel build(const ArchSpec& spec, uint64_t seed,
                               ClientLoss loss = ClientLoss::kSoftmaxCrossEntropy, int label = 0);

    const ArchSpec& spec() const { return spec_; }
    int64_t input_dim() const { return spec_.input_dim; }
    int64_t param_count() const;
    const std::vector<Tensor>& params() const { return params_; }
    std::vector<Tensor>& mutable_params() { return params_; }
    const std::vector<std::string>& param_names() const { return param_names_; }
    std::string id() const;
    ClientLoss loss_kind() const { return loss_; }
    int label() const { return label_; }
    void set_label(int y) { label_ = y; }
    // Overrides the half-squared-error target (defaults to onehot(label)).
    void set_hse_target(Tensor y) { hse_target_ = std::move(y); }
    Tensor hse_target_or_default() const {
        return hse_target_.defined() ? hse_target_ : onehot(label_, spec_.classes);
    }

    ad::Value forward(const ad::Value& x, const std::vector<ad::Value>& params) const;
    ad::Value client_loss(const ad::Value& x, const std::vector<ad::Value>& params, int label) const;

    // Flattened d(client loss)/dW as a graph value; differentiable w.r.t. x
    // when x is connected to a larger graph.
    ad::Value client_gradient_value(const ad::Value& x, int label) const;

    LeakedGradient client_gradient(const Tensor& x, int label) const;
    LeakedGradient client_gradient(const Tensor& x) const { return client_gradient(x, label_); }
    LeakedGradient batch_gradient(const std::vector<Tensor>& xs, const std::vector<int>& ys) const;

    std::vector<ad::Value> param_leaves() const;

  private:
    ArchSpec spec_;
    ClientLoss loss_ = ClientLoss::kSoftmaxCrossEntropy;
    int label_ = 0;
    Tensor hse_target_;
    std::vector<std::string> param_names_;
    std::vector<Tensor> params_;
};

// v' * dL/dW as a differentiable scalar; a further backward over x gives
// the input sensitivity of one gradient direction.
ad::Value projected_gradient(const AttackedModel& m, const ad::Value& x, int label, const Tensor& v);

}  // namespace gradinv
