#include "rf/tensorgrad/tensor.hpp"

#include "rf/core/error.hpp"
#include "rf/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace rf::tg {

std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
{
    if (data_.size() != shape_size(shape_))
        throw InvalidArgument("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                              shape_string(shape_));
}

Tensor Tensor::vector(std::vector<double> v)
{
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
}

double Tensor::item() const
{
    if (data_.size() != 1) throw InvalidArgument("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != data_.size())
        throw InvalidArgument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::add_scaled(const Tensor& other, double alpha)
{
    require_same_shape(*this, other, "add_scaled");
    kernels::axpy(data_.size(), alpha, other.data(), data_.data());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what)
{
    if (a.shape() != b.shape())
        throw InvalidArgument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
}

} // namespace rf::tg
