#pragma once

#include <span>

#include "cola/tensor.hpp"

namespace cola {

template <typename T>
std::span<T> data_of(Tensor& t);
template <typename T>
std::span<const T> data_of(const Tensor& t);

template <> inline std::span<float> data_of<float>(Tensor& t) { return t.f32(); }
template <> inline std::span<double> data_of<double>(Tensor& t) { return t.f64(); }
template <> inline std::span<const float> data_of<float>(const Tensor& t) { return t.f32(); }
template <> inline std::span<const double> data_of<double>(const Tensor& t) { return t.f64(); }

// Calls f with a value of the tensor's scalar type: with_dtype(dt, [&](auto z){ using T = decltype(z); ... });
template <typename F>
void with_dtype(Dtype dt, F&& f) {
    if (dt == Dtype::F32)
        f(float{});
    else
        f(double{});
}

} // namespace cola
