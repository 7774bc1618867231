#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradinv {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

// Dense row-major tensor of 64-bit floats. Committed values are always
// finite; operations that would introduce NaN/Inf throw NumericError.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);  // zero-filled
    Tensor(std::vector<int64_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor ones(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double v);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool defined() const { return !shape_.empty() || !data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& at(int64_t r, int64_t c);
    double at(int64_t r, int64_t c) const;

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    // Throws NumericError naming `context` if any entry is NaN/Inf.
    void check_finite(const char* context) const;

  private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

// Graph-free numeric helpers for hot paths (samplers, Monte-Carlo checks).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
void axpy(Tensor& y, double a, const Tensor& x);  // y += a*x
double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
Tensor onehot(int index, int64_t size);

// Text format: header line "tensor <rank> <d1> ... <dk>", then the values
// row-major, whitespace-separated, 17 significant digits.
void write_tensor_text(std::ostream& os, const Tensor& t);
Tensor read_tensor_text(std::istream& is);
std::string tensor_to_string(const Tensor& t);
Tensor tensor_from_string(const std::string& s);

}  // namespace gradinv
