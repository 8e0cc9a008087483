#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cola/errors.hpp"

namespace cola {

// Storage precision. Uniform per run; ops reject mixed-dtype operands.
enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

inline const char* dtype_name(Dtype dt) { return dt == Dtype::F32 ? "f32" : "f64"; }
Dtype dtype_from_name(const std::string& name);

// Dense row-major tensor. Value semantics; immutable by convention once it
// has been handed to a tape or another execution context.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, Dtype dt = Dtype::F64);

    static Tensor zeros(std::vector<std::size_t> shape, Dtype dt = Dtype::F64);
    static Tensor full(std::vector<std::size_t> shape, double v, Dtype dt = Dtype::F64);
    // Row-major values; v.size() must equal product(shape).
    static Tensor from_values(std::vector<std::size_t> shape, std::span<const double> v,
                              Dtype dt = Dtype::F64);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return numel_; }
    bool empty() const { return numel_ == 0; }
    std::size_t rows() const;
    std::size_t cols() const;
    Dtype dtype() const { return dtype_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    // Element access through double, independent of storage precision.
    double at(std::size_t i) const;
    void set(std::size_t i, double v);

    std::span<float> f32();
    std::span<const float> f32() const;
    std::span<double> f64();
    std::span<const double> f64() const;

    // Raw storage bytes (for hashing and serialization).
    std::span<const std::byte> bytes() const;
    std::span<std::byte> bytes();

    Tensor to(Dtype dt) const;
    Tensor clone() const { return *this; }

    // Rows [r0, r1) of a 2-D tensor.
    Tensor slice_rows(std::size_t r0, std::size_t r1) const;
    // Selected rows of a 2-D tensor, in index order.
    Tensor take_rows(std::span<const std::int64_t> idx) const;

    bool all_finite() const;
    // Throws NumericError naming `what` if any element is NaN/Inf.
    void check_finite(const char* what) const;

    double abs_max() const;
    double sum() const;

    // Gradient slot marker: meaningful when the tensor is registered as a
    // tape leaf.
    bool requires_grad = false;

private:
    std::vector<std::size_t> shape_;
    std::size_t numel_ = 0;
    Dtype dtype_ = Dtype::F64;
    std::vector<float> data32_;
    std::vector<double> data64_;
};

// Max over elements of |a-b| / max(|a|, |b|, floor).
double max_rel_err(const Tensor& a, const Tensor& b, double floor = 1e-12);
double max_abs_err(const Tensor& a, const Tensor& b);

} // namespace cola
