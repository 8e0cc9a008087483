#include "cola/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace cola {

Dtype dtype_from_name(const std::string& name) {
    if (name == "f32" || name == "float32") return Dtype::F32;
    if (name == "f64" || name == "float64") return Dtype::F64;
    throw ConfigError("unknown precision '" + name + "' (expected f32 or f64)");
}

static std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("zero extent in tensor shape");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, Dtype dt)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)), dtype_(dt) {
    if (dtype_ == Dtype::F32)
        data32_.assign(numel_, 0.0f);
    else
        data64_.assign(numel_, 0.0);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, Dtype dt) { return Tensor(std::move(shape), dt); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v, Dtype dt) {
    Tensor t(std::move(shape), dt);
    for (std::size_t i = 0; i < t.size(); ++i) t.set(i, v);
    return t;
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::span<const double> v, Dtype dt) {
    Tensor t(std::move(shape), dt);
    if (v.size() != t.size())
        throw ShapeError("from_values: " + std::to_string(v.size()) + " values for shape " + t.shape_str());
    for (std::size_t i = 0; i < t.size(); ++i) t.set(i, v[i]);
    return t;
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw ShapeError("rows(): tensor is not 2-D: " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw ShapeError("cols(): tensor is not 2-D: " + shape_str());
    return shape_[1];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << ']';
    return os.str();
}

double Tensor::at(std::size_t i) const {
    return dtype_ == Dtype::F32 ? static_cast<double>(data32_[i]) : data64_[i];
}

void Tensor::set(std::size_t i, double v) {
    if (dtype_ == Dtype::F32)
        data32_[i] = static_cast<float>(v);
    else
        data64_[i] = v;
}

std::span<float> Tensor::f32() {
    if (dtype_ != Dtype::F32) throw NumericError("f32() on f64 tensor");
    return data32_;
}
std::span<const float> Tensor::f32() const {
    if (dtype_ != Dtype::F32) throw NumericError("f32() on f64 tensor");
    return data32_;
}
std::span<double> Tensor::f64() {
    if (dtype_ != Dtype::F64) throw NumericError("f64() on f32 tensor");
    return data64_;
}
std::span<const double> Tensor::f64() const {
    if (dtype_ != Dtype::F64) throw NumericError("f64() on f32 tensor");
    return data64_;
}

std::span<const std::byte> Tensor::bytes() const {
    if (dtype_ == Dtype::F32)
        return {reinterpret_cast<const std::byte*>(data32_.data()), data32_.size() * sizeof(float)};
    return {reinterpret_cast<const std::byte*>(data64_.data()), data64_.size() * sizeof(double)};
}

std::span<std::byte> Tensor::bytes() {
    if (dtype_ == Dtype::F32)
        return {reinterpret_cast<std::byte*>(data32_.data()), data32_.size() * sizeof(float)};
    return {reinterpret_cast<std::byte*>(data64_.data()), data64_.size() * sizeof(double)};
}

Tensor Tensor::to(Dtype dt) const {
    if (dt == dtype_) return *this;
    Tensor out(shape_, dt);
    for (std::size_t i = 0; i < numel_; ++i) out.set(i, at(i));
    out.requires_grad = requires_grad;
    return out;
}

Tensor Tensor::slice_rows(std::size_t r0, std::size_t r1) const {
    const std::size_t n = rows(), d = cols();
    if (r0 > r1 || r1 > n) throw ShapeError("slice_rows out of range");
    Tensor out({r1 - r0, d}, dtype_);
    std::memcpy(out.bytes().data(), bytes().data() + r0 * d * (dtype_ == Dtype::F32 ? 4 : 8),
                (r1 - r0) * d * (dtype_ == Dtype::F32 ? 4 : 8));
    return out;
}

Tensor Tensor::take_rows(std::span<const std::int64_t> idx) const {
    const std::size_t n = rows(), d = cols();
    Tensor out({idx.size(), d}, dtype_);
    const std::size_t esz = dtype_ == Dtype::F32 ? 4 : 8;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= n)
            throw ShapeError("take_rows: row index out of range");
        std::memcpy(out.bytes().data() + i * d * esz,
                    bytes().data() + static_cast<std::size_t>(idx[i]) * d * esz, d * esz);
    }
    return out;
}

bool Tensor::all_finite() const {
    if (dtype_ == Dtype::F32) {
        for (float v : data32_)
            if (!std::isfinite(v)) return false;
    } else {
        for (double v : data64_)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::check_finite(const char* what) const {
    if (all_finite()) return;
    for (std::size_t i = 0; i < numel_; ++i)
        if (!std::isfinite(at(i)))
            throw NumericError(std::string(what) + ": non-finite value " + std::to_string(at(i)) +
                               " at flat index " + std::to_string(i));
    throw NumericError(std::string(what) + ": non-finite value");
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (std::size_t i = 0; i < numel_; ++i) m = std::max(m, std::fabs(at(i)));
    return m;
}

double Tensor::sum() const {
    double s = 0.0;
    for (std::size_t i = 0; i < numel_; ++i) s += at(i);
    return s;
}

double max_rel_err(const Tensor& a, const Tensor& b, double floor) {
    if (!a.same_shape(b)) throw ShapeError("max_rel_err: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.at(i), y = b.at(i);
        const double den = std::max({std::fabs(x), std::fabs(y), floor});
        worst = std::max(worst, std::fabs(x - y) / den);
    }
    return worst;
}

double max_abs_err(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_err: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a.at(i) - b.at(i)));
    return worst;
}

} // namespace cola
