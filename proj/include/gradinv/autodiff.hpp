#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "gradinv/tensor.hpp"

namespace gradinv::ad {

enum class Op : uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kScalarMul,
    kMatMul,
    kTranspose,
    kRelu,
    kReluMask,
    kSigmoid,
    kExp,
    kLog,
    kSqrt,
    kRecip,
    kSum,
    kExpand,
    kSumRows,
    kExpandRows,
    kReshape,
    kConcat,
    kSlice,
    kEmbed,
    kGather,
    kScatterAdd,
};

const char* op_name(Op op);

struct Node;
using NodePtr = std::shared_ptr<Node>;
using IndexVec = std::shared_ptr<const std::vector<int64_t>>;

// Handle to a node of the computation graph. Building an op value computes
// and caches its tensor immediately, so evaluate() is a cache lookup.
class Value {
  public:
    Value() = default;
    explicit Value(NodePtr n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const Tensor& tensor() const;
    const std::vector<int64_t>& shape() const;
    int64_t numel() const;
    double item() const;  // requires numel() == 1
    const NodePtr& node() const { return node_; }

  private:
    NodePtr node_;
};

struct Node : std::enable_shared_from_this<Node> {
    Op op = Op::kLeaf;
    std::vector<Value> parents;
    Tensor value;
    double scalar = 0.0;              // kScalarMul coefficient
    std::vector<int64_t> arg;         // kReshape/kExpand target shape; kExpandRows {rows};
                                      // kSlice/kEmbed {offset, len, total}
    IndexVec indices;                 // kGather / kScatterAdd (entry -1 = padded zero)

    // Scratch used by one backward() pass at a time, cleared on exit.
    Value adjoint;
    bool visited = false;
};

Value leaf(Tensor t);
inline Value constant(Tensor t) { return leaf(std::move(t)); }
Value scalar_value(double v);
Value detach(const Value& v);

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // elementwise, equal shapes
Value scalar_mul(const Value& a, double c);
Value neg(const Value& a);
Value matmul(const Value& a, const Value& b);  // [m,k]x[k,n]->[m,n] or [m,k]x[k]->[m]
Value transpose(const Value& a);               // rank-2
Value relu(const Value& a);
Value relu_mask(const Value& a);  // 1[x>0]; derivative treated as zero
Value sigmoid(const Value& a);
Value silu(const Value& a);
Value exp_v(const Value& a);
Value log_v(const Value& a);
Value sqrt_v(const Value& a);
Value recip(const Value& a);
Value square(const Value& a);
Value sum(const Value& a);  // -> [1]
Value mean(const Value& a);
Value l2_norm_v(const Value& a);
Value dot_v(const Value& a, const Value& b);
Value expand(const Value& s, std::vector<int64_t> shape);  // [1] -> shape
Value sum_rows(const Value& a);                            // [m,k] -> [k]
Value expand_rows(const Value& v, int64_t rows);           // [k] -> [rows,k]
Value reshape(const Value& a, std::vector<int64_t> shape);
Value concat(const std::vector<Value>& parts);           // rank-1 parts
Value slice(const Value& a, int64_t offset, int64_t len);  // rank-1
Value embed(const Value& a, int64_t offset, int64_t total);
Value gather(const Value& a, IndexVec idx);
Value scatter_add(const Value& a, IndexVec idx, int64_t size);
Value softmax_cross_entropy(const Value& logits, int label);

const Tensor& evaluate(const Value& root);

// d(root)/d(wrt) for a scalar root. A wrt node with no path to the root
// yields an exactly-zero tensor. With create_graph the returned values stay
// connected to the graph and support a further backward pass; without it
// they are detached leaves.
std::vector<Value> backward(const Value& scalar_root, const std::vector<Value>& wrt, bool create_graph = false);

// Max relative error between the backward gradient of f and central finite
// differences at `point`. f must build a scalar. eps must lie in (0, 1e-2].
double grad_check(const std::function<Value(const Value&)>& f, const Tensor& point, double eps);

}  // namespace gradinv::ad
