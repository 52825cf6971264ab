#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include "ecn/check.hpp"
#include "ecn/shape.hpp"

namespace ecn {

// Dense 4-D tensor. The handle is a value type; the storage (values plus an
// optional gradient buffer of identical shape) is shared, so two copies of a
// handle refer to the same accumulator. Gradients are only zeroed explicitly.
template <typename T>
class Tensor {
    struct Impl {
        Shape shape;
        std::vector<T> value;
        std::vector<T> grad; // empty until ensure_grad()
        bool requires_grad = false;
    };

public:
    Tensor() = default;

    explicit Tensor(Shape s, bool requires_grad = false)
        : impl_(std::make_shared<Impl>()) {
        impl_->shape = s;
        impl_->value.assign(static_cast<std::size_t>(s.numel()), T(0));
        impl_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape s) { return Tensor(s); }

    static Tensor full(Shape s, T v) {
        Tensor t(s);
        std::fill(t.impl_->value.begin(), t.impl_->value.end(), v);
        return t;
    }

    static Tensor from(Shape s, std::vector<T> values) {
        check(static_cast<std::int64_t>(values.size()) == s.numel(),
              "tensor data length does not match shape " + s.str());
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = s;
        t.impl_->value = std::move(values);
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::int64_t numel() const { return impl_->shape.numel(); }

    T* data() { return impl_->value.data(); }
    const T* data() const { return impl_->value.data(); }
    std::vector<T>& values() { return impl_->value; }
    const std::vector<T>& values() const { return impl_->value; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        if (rg) ensure_grad();
    }

    // Allocates the gradient buffer (zero-filled) if not present.
    void ensure_grad() {
        if (impl_->grad.empty())
            impl_->grad.assign(impl_->value.size(), T(0));
    }

    bool has_grad() const { return !impl_->grad.empty(); }
    T* grad() { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }
    const T* grad() const { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }

    void zero_grad() {
        if (!impl_->grad.empty())
            std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    T& at(int in, int ic, int iy, int ix) {
        return impl_->value[static_cast<std::size_t>(impl_->shape.index(in, ic, iy, ix))];
    }
    T at(int in, int ic, int iy, int ix) const {
        return impl_->value[static_cast<std::size_t>(impl_->shape.index(in, ic, iy, ix))];
    }
    T grad_at(int in, int ic, int iy, int ix) const {
        return impl_->grad[static_cast<std::size_t>(impl_->shape.index(in, ic, iy, ix))];
    }

    // Identity of the underlying storage (shared-weight tests rely on this).
    bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

    bool all_finite() const {
        for (const T& v : impl_->value)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

private:
    std::shared_ptr<Impl> impl_;
};

} // namespace ecn
