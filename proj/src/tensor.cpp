#include "gradinv/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace gradinv {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }
Tensor Tensor::zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::ones(std::vector<int64_t> shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

double& Tensor::at(int64_t r, int64_t c) {
    if (rank() != 2) throw ShapeError("2-d access on tensor of shape " + shape_str(shape_));
    return data_[static_cast<size_t>(r * shape_[1] + c)];
}

double Tensor::at(int64_t r, int64_t c) const { return const_cast<Tensor*>(this)->at(r, c); }

void Tensor::check_finite(const char* context) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value in ") + context + " (shape " + shape_str(shape_) + ")");
        }
    }
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i) r[i] += b[i];
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i) r[i] -= b[i];
    return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i) r[i] *= b[i];
    return r;
}

Tensor scale(const Tensor& a, double c) {
    Tensor r = a;
    for (int64_t i = 0; i < r.numel(); ++i) r[i] *= c;
    return r;
}

void axpy(Tensor& y, double a, const Tensor& x) {
    require_same_shape(y, x, "axpy");
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += a * x[i];
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

Tensor onehot(int index, int64_t size) {
    if (index < 0 || index >= size) throw ShapeError("onehot index " + std::to_string(index) + " out of range");
    Tensor t({size});
    t[index] = 1.0;
    return t;
}

void write_tensor_text(std::ostream& os, const Tensor& t) {
    os << "tensor " << t.rank();
    for (int64_t d : t.shape()) os << ' ' << d;
    os << '\n';
    char buf[64];
    for (int64_t i = 0; i < t.numel(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t[i]);
        os << buf << ((i + 1) % 8 == 0 || i + 1 == t.numel() ? '\n' : ' ');
    }
}

Tensor read_tensor_text(std::istream& is) {
    std::string tag;
    if (!(is >> tag) || tag != "tensor") throw IoError("expected 'tensor' header, got '" + tag + "'");
    int rank = 0;
    if (!(is >> rank) || rank < 0 || rank > 8) throw IoError("bad tensor rank");
    std::vector<int64_t> shape(static_cast<size_t>(rank));
    for (auto& d : shape) {
        if (!(is >> d) || d <= 0) throw IoError("bad tensor dimension");
    }
    int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) {
        if (!(is >> v)) throw IoError("truncated tensor data");
    }
    return Tensor(std::move(shape), std::move(data));
}

std::string tensor_to_string(const Tensor& t) {
    std::ostringstream os;
    write_tensor_text(os, t);
    return os.str();
}

Tensor tensor_from_string(const std::string& s) {
    std::istringstream is(s);
    return read_tensor_text(is);
}

}  // namespace gradinv
