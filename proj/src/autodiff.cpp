#include "gradinv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace gradinv::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kScalarMul: return "scalar_mul";
        case Op::kMatMul: return "matmul";
        case Op::kTranspose: return "transpose";
        case Op::kRelu: return "relu";
        case Op::kReluMask: return "relu_mask";
        case Op::kSigmoid: return "sigmoid";
        case Op::kExp: return "exp";
        case Op::kLog: return "log";
        case Op::kSqrt: return "sqrt";
        case Op::kRecip: return "recip";
        case Op::kSum: return "sum";
        case Op::kExpand: return "expand";
        case Op::kSumRows: return "sum_rows";
        case Op::kExpandRows: return "expand_rows";
        case Op::kReshape: return "reshape";
        case Op::kConcat: return "concat";
        case Op::kSlice: return "slice";
        case Op::kEmbed: return "embed";
        case Op::kGather: return "gather";
        case Op::kScatterAdd: return "scatter_add";
    }
    return "?";
}

const Tensor& Value::tensor() const {
    if (!node_) throw ShapeError("use of undefined graph value");
    return node_->value;
}

const std::vector<int64_t>& Value::shape() const { return tensor().shape(); }
int64_t Value::numel() const { return tensor().numel(); }

double Value::item() const {
    const Tensor& t = tensor();
    if (t.numel() != 1) throw ShapeError("item() on non-scalar value of shape " + shape_str(t.shape()));
    return t[0];
}

namespace {

[[noreturn]] void op_shape_error(Op op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

Value make(Op op, std::vector<Value> parents, Tensor value, double scalar = 0.0, std::vector<int64_t> arg = {},
           IndexVec indices = nullptr) {
    value.check_finite(op_name(op));
    auto n = std::make_shared<Node>();
    n->op = op;
    n->parents = std::move(parents);
    n->value = std::move(value);
    n->scalar = scalar;
    n->arg = std::move(arg);
    n->indices = std::move(indices);
    return Value(std::move(n));
}

Tensor matmul_tensor(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2) throw ShapeError("matmul: left operand must be rank-2, got " + shape_str(a.shape()));
    int64_t m = a.shape()[0], k = a.shape()[1];
    if (b.rank() == 1) {
        if (b.shape()[0] != k) op_shape_error(Op::kMatMul, a, b);
        Tensor r({m});
        for (int64_t i = 0; i < m; ++i) {
            double s = 0.0;
            const double* row = a.data() + i * k;
            for (int64_t j = 0; j < k; ++j) s += row[j] * b[j];
            r[i] = s;
        }
        return r;
    }
    if (b.rank() != 2 || b.shape()[0] != k) op_shape_error(Op::kMatMul, a, b);
    int64_t n = b.shape()[1];
    Tensor r({m, n});
    // i-k-j order keeps the inner loop contiguous in both r and b.
    for (int64_t i = 0; i < m; ++i) {
        double* out = r.data() + i * n;
        const double* row = a.data() + i * k;
        for (int64_t kk = 0; kk < k; ++kk) {
            double av = row[kk];
            if (av == 0.0) continue;
            const double* brow = b.data() + kk * n;
            for (int64_t j = 0; j < n; ++j) out[j] += av * brow[j];
        }
    }
    return r;
}

}  // namespace

Value leaf(Tensor t) { return make(Op::kLeaf, {}, std::move(t)); }
Value scalar_value(double v) { return leaf(Tensor::scalar(v)); }
Value detach(const Value& v) { return leaf(v.tensor()); }

Value add(const Value& a, const Value& b) {
    if (!a.tensor().same_shape(b.tensor())) op_shape_error(Op::kAdd, a.tensor(), b.tensor());
    return make(Op::kAdd, {a, b}, gradinv::add(a.tensor(), b.tensor()));
}

Value sub(const Value& a, const Value& b) {
    if (!a.tensor().same_shape(b.tensor())) op_shape_error(Op::kSub, a.tensor(), b.tensor());
    return make(Op::kSub, {a, b}, gradinv::sub(a.tensor(), b.tensor()));
}

Value mul(const Value& a, const Value& b) {
    if (!a.tensor().same_shape(b.tensor())) op_shape_error(Op::kMul, a.tensor(), b.tensor());
    return make(Op::kMul, {a, b}, gradinv::mul(a.tensor(), b.tensor()));
}

Value scalar_mul(const Value& a, double c) { return make(Op::kScalarMul, {a}, scale(a.tensor(), c), c); }

Value neg(const Value& a) { return scalar_mul(a, -1.0); }

Value matmul(const Value& a, const Value& b) { return make(Op::kMatMul, {a, b}, matmul_tensor(a.tensor(), b.tensor())); }

Value transpose(const Value& a) {
    const Tensor& t = a.tensor();
    if (t.rank() != 2) throw ShapeError("transpose: rank-2 required, got " + shape_str(t.shape()));
    int64_t m = t.shape()[0], n = t.shape()[1];
    Tensor r({n, m});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) r[j * m + i] = t[i * n + j];
    return make(Op::kTranspose, {a}, std::move(r));
}

Value relu(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) r[i] = r[i] > 0.0 ? r[i] : 0.0;
    return make(Op::kRelu, {a}, std::move(r));
}

Value relu_mask(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) r[i] = r[i] > 0.0 ? 1.0 : 0.0;
    return make(Op::kReluMask, {a}, std::move(r));
}

Value sigmoid(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) {
        double x = r[i];
        r[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return make(Op::kSigmoid, {a}, std::move(r));
}

Value silu(const Value& a) { return mul(a, sigmoid(a)); }

Value exp_v(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) r[i] = std::exp(r[i]);
    return make(Op::kExp, {a}, std::move(r));
}

Value log_v(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) r[i] = std::log(r[i]);
    return make(Op::kLog, {a}, std::move(r));
}

Value sqrt_v(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) r[i] = std::sqrt(r[i]);
    return make(Op::kSqrt, {a}, std::move(r));
}

Value recip(const Value& a) {
    Tensor r = a.tensor();
    for (int64_t i = 0; i < r.numel(); ++i) r[i] = 1.0 / r[i];
    return make(Op::kRecip, {a}, std::move(r));
}

Value square(const Value& a) { return mul(a, a); }

Value sum(const Value& a) {
    double s = 0.0;
    const Tensor& t = a.tensor();
    for (int64_t i = 0; i < t.numel(); ++i) s += t[i];
    return make(Op::kSum, {a}, Tensor::scalar(s));
}

Value mean(const Value& a) { return scalar_mul(sum(a), 1.0 / static_cast<double>(a.numel())); }

Value l2_norm_v(const Value& a) { return sqrt_v(sum(mul(a, a))); }

Value dot_v(const Value& a, const Value& b) { return sum(mul(a, b)); }

Value expand(const Value& s, std::vector<int64_t> shape) {
    if (s.numel() != 1) throw ShapeError("expand: scalar source required, got " + shape_str(s.shape()));
    Tensor r = Tensor::full(shape, s.tensor()[0]);
    return make(Op::kExpand, {s}, std::move(r), 0.0, std::move(shape));
}

Value sum_rows(const Value& a) {
    const Tensor& t = a.tensor();
    if (t.rank() != 2) throw ShapeError("sum_rows: rank-2 required, got " + shape_str(t.shape()));
    int64_t m = t.shape()[0], k = t.shape()[1];
    Tensor r({k});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < k; ++j) r[j] += t[i * k + j];
    return make(Op::kSumRows, {a}, std::move(r));
}

Value expand_rows(const Value& v, int64_t rows) {
    const Tensor& t = v.tensor();
    if (t.rank() != 1) throw ShapeError("expand_rows: rank-1 required, got " + shape_str(t.shape()));
    int64_t k = t.shape()[0];
    Tensor r({rows, k});
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < k; ++j) r[i * k + j] = t[j];
    return make(Op::kExpandRows, {v}, std::move(r), 0.0, {rows});
}

Value reshape(const Value& a, std::vector<int64_t> shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    Tensor r(shape, a.tensor().raw());
    return make(Op::kReshape, {a}, std::move(r), 0.0, std::move(shape));
}

Value concat(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::vector<double> data;
    for (const auto& p : parts) {
        if (p.tensor().rank() != 1) throw ShapeError("concat: rank-1 operands required, got " + shape_str(p.shape()));
        const auto& raw = p.tensor().raw();
        data.insert(data.end(), raw.begin(), raw.end());
    }
    int64_t n = static_cast<int64_t>(data.size());
    return make(Op::kConcat, parts, Tensor({n}, std::move(data)));
}

Value slice(const Value& a, int64_t offset, int64_t len) {
    const Tensor& t = a.tensor();
    if (t.rank() != 1) throw ShapeError("slice: rank-1 required, got " + shape_str(t.shape()));
    if (offset < 0 || len <= 0 || offset + len > t.numel()) {
        throw ShapeError("slice: range [" + std::to_string(offset) + "," + std::to_string(offset + len) +
                         ") out of bounds for " + shape_str(t.shape()));
    }
    Tensor r({len});
    for (int64_t i = 0; i < len; ++i) r[i] = t[offset + i];
    return make(Op::kSlice, {a}, std::move(r), 0.0, {offset, len, t.numel()});
}

Value embed(const Value& a, int64_t offset, int64_t total) {
    const Tensor& t = a.tensor();
    if (t.rank() != 1) throw ShapeError("embed: rank-1 required, got " + shape_str(t.shape()));
    if (offset < 0 || offset + t.numel() > total) throw ShapeError("embed: segment out of bounds");
    Tensor r({total});
    for (int64_t i = 0; i < t.numel(); ++i) r[offset + i] = t[i];
    return make(Op::kEmbed, {a}, std::move(r), 0.0, {offset, t.numel(), total});
}

Value gather(const Value& a, IndexVec idx) {
    const Tensor& t = a.tensor();
    if (t.rank() != 1) throw ShapeError("gather: rank-1 required, got " + shape_str(t.shape()));
    Tensor r({static_cast<int64_t>(idx->size())});
    for (size_t i = 0; i < idx->size(); ++i) {
        int64_t j = (*idx)[i];
        if (j >= t.numel()) throw ShapeError("gather: index out of range");
        r[static_cast<int64_t>(i)] = j < 0 ? 0.0 : t[j];
    }
    return make(Op::kGather, {a}, std::move(r), 0.0, {}, std::move(idx));
}

Value scatter_add(const Value& a, IndexVec idx, int64_t size) {
    const Tensor& t = a.tensor();
    if (t.rank() != 1 || t.numel() != static_cast<int64_t>(idx->size())) {
        throw ShapeError("scatter_add: source length must match index length");
    }
    Tensor r({size});
    for (size_t i = 0; i < idx->size(); ++i) {
        int64_t j = (*idx)[i];
        if (j >= size) throw ShapeError("scatter_add: index out of range");
        if (j >= 0) r[j] += t[static_cast<int64_t>(i)];
    }
    return make(Op::kScatterAdd, {a}, std::move(r), 0.0, {}, std::move(idx));
}

Value softmax_cross_entropy(const Value& logits, int label) {
    const Tensor& t = logits.tensor();
    if (t.rank() != 1) throw ShapeError("softmax_cross_entropy: rank-1 logits required");
    if (label < 0 || label >= t.numel()) throw ShapeError("softmax_cross_entropy: label out of range");
    // Constant max-shift: exact for the value and all derivatives.
    Tensor shift = Tensor::full({t.numel()}, *std::max_element(t.raw().begin(), t.raw().end()));
    Value z = sub(logits, constant(std::move(shift)));
    Value lse = log_v(sum(exp_v(z)));
    return sub(lse, slice(z, label, 1));
}

const Tensor& evaluate(const Value& root) { return root.tensor(); }

namespace {

// Reverse-topological node list (root last in postorder, so iterate backward).
std::vector<Node*> topo_from(Node* root) {
    std::vector<Node*> topo;
    std::vector<std::pair<Node*, size_t>> stack;
    root->visited = true;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i].node().get();
            ++i;
            if (!p->visited) {
                p->visited = true;
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(n);
            stack.pop_back();
        }
    }
    return topo;
}

void accumulate(const Value& parent, const Value& contrib) {
    Node* p = parent.node().get();
    p->adjoint = p->adjoint.defined() ? add(p->adjoint, contrib) : contrib;
}

// Emit vector-Jacobian contributions of `n` into its parents' adjoint slots.
// Every rule is expressed through the primitive ops above, so the emitted
// subgraph is itself differentiable (double backward).
void emit_vjps(Node* n) {
    const Value& g = n->adjoint;
    Value self(n->shared_from_this());
    switch (n->op) {
        case Op::kLeaf:
            break;
        case Op::kAdd:
            accumulate(n->parents[0], g);
            accumulate(n->parents[1], g);
            break;
        case Op::kSub:
            accumulate(n->parents[0], g);
            accumulate(n->parents[1], neg(g));
            break;
        case Op::kMul:
            accumulate(n->parents[0], mul(g, n->parents[1]));
            accumulate(n->parents[1], mul(g, n->parents[0]));
            break;
        case Op::kScalarMul:
            accumulate(n->parents[0], scalar_mul(g, n->scalar));
            break;
        case Op::kMatMul: {
            const Value& a = n->parents[0];
            const Value& b = n->parents[1];
            if (b.tensor().rank() == 2) {
                accumulate(a, matmul(g, transpose(b)));
                accumulate(b, matmul(transpose(a), g));
            } else {
                int64_t m = a.shape()[0], k = a.shape()[1];
                accumulate(a, matmul(reshape(g, {m, 1}), reshape(b, {1, k})));
                accumulate(b, matmul(transpose(a), g));
            }
            break;
        }
        case Op::kTranspose:
            accumulate(n->parents[0], transpose(g));
            break;
        case Op::kRelu:
            accumulate(n->parents[0], mul(g, relu_mask(n->parents[0])));
            break;
        case Op::kReluMask:
            break;  // piecewise-constant: zero derivative
        case Op::kSigmoid: {
            Value one = constant(Tensor::ones(n->value.shape()));
            accumulate(n->parents[0], mul(g, mul(self, sub(one, self))));
            break;
        }
        case Op::kExp:
            accumulate(n->parents[0], mul(g, self));
            break;
        case Op::kLog:
            accumulate(n->parents[0], mul(g, recip(n->parents[0])));
            break;
        case Op::kSqrt:
            accumulate(n->parents[0], scalar_mul(mul(g, recip(self)), 0.5));
            break;
        case Op::kRecip:
            accumulate(n->parents[0], neg(mul(g, mul(self, self))));
            break;
        case Op::kSum:
            accumulate(n->parents[0], expand(g, n->parents[0].shape()));
            break;
        case Op::kExpand:
            accumulate(n->parents[0], sum(g));
            break;
        case Op::kSumRows:
            accumulate(n->parents[0], expand_rows(g, n->parents[0].shape()[0]));
            break;
        case Op::kExpandRows:
            accumulate(n->parents[0], sum_rows(g));
            break;
        case Op::kReshape:
            accumulate(n->parents[0], reshape(g, n->parents[0].shape()));
            break;
        case Op::kConcat: {
            int64_t offset = 0;
            for (const auto& p : n->parents) {
                accumulate(p, slice(g, offset, p.numel()));
                offset += p.numel();
            }
            break;
        }
        case Op::kSlice:
            accumulate(n->parents[0], embed(g, n->arg[0], n->arg[2]));
            break;
        case Op::kEmbed:
            accumulate(n->parents[0], slice(g, n->arg[0], n->arg[1]));
            break;
        case Op::kGather:
            accumulate(n->parents[0], scatter_add(g, n->indices, n->parents[0].numel()));
            break;
        case Op::kScatterAdd:
            accumulate(n->parents[0], gather(g, n->indices));
            break;
    }
}

}  // namespace

std::vector<Value> backward(const Value& scalar_root, const std::vector<Value>& wrt, bool create_graph) {
    if (!scalar_root.defined()) throw ShapeError("backward: undefined root");
    if (scalar_root.numel() != 1) {
        throw ShapeError("backward: root must be scalar, got shape " + shape_str(scalar_root.shape()));
    }
    Node* root = scalar_root.node().get();
    std::vector<Node*> topo = topo_from(root);
    root->adjoint = constant(Tensor::ones(scalar_root.shape()));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->adjoint.defined()) emit_vjps(n);
    }
    std::vector<Value> grads;
    grads.reserve(wrt.size());
    for (const auto& w : wrt) {
        Node* wn = w.node().get();
        if (wn->visited && wn->adjoint.defined()) {
            grads.push_back(create_graph ? wn->adjoint : detach(wn->adjoint));
        } else {
            grads.push_back(leaf(Tensor::zeros(w.shape())));
        }
    }
    // Clear scratch; also breaks the node<->adjoint ownership cycle.
    for (Node* n : topo) {
        n->adjoint = Value();
        n->visited = false;
    }
    return grads;
}

double grad_check(const std::function<Value(const Value&)>& f, const Tensor& point, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) throw ShapeError("grad_check: eps must lie in (0, 1e-2]");
    Value x = leaf(point);
    Value y = f(x);
    if (y.numel() != 1) throw ShapeError("grad_check: f must build a scalar, got shape " + shape_str(y.shape()));
    Tensor g = backward(y, {x}, false)[0].tensor();
    double worst = 0.0;
    for (int64_t i = 0; i < point.numel(); ++i) {
        Tensor hi = point, lo = point;
        hi[i] += eps;
        lo[i] -= eps;
        double fd = (f(leaf(hi)).item() - f(leaf(lo)).item()) / (2.0 * eps);
        double denom = std::max({std::fabs(fd), std::fabs(g[i]), 1e-6});
        worst = std::max(worst, std::fabs(g[i] - fd) / denom);
    }
    return worst;
}

}  // namespace gradinv::ad
