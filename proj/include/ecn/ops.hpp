#pragma once

#include <vector>

#include "ecn/rng.hpp"
#include "ecn/tape.hpp"
#include "ecn/tensor.hpp"

namespace ecn {

// Per-run state threaded through every operator. A null tape disables
// recording (pure inference). `training` switches batchnorm/dropout behavior.
template <typename T>
struct RunContext {
    Tape<T>* tape = nullptr;
    bool training = false;
    Rng* rng = nullptr; // dropout mask source, owned by the training run
    // When set, relu() records the smallest |input| it sees. The gradient
    // checker uses this to reject samples that sit on a kink.
    double* relu_kink_min = nullptr;

    static RunContext inference() { return RunContext{}; }
};

// Batch normalization state for one site: trainable gamma/beta plus running
// statistics buffers (buffers are not parameters and never weight-decayed).
template <typename T>
struct BatchNorm {
    Tensor<T> gamma; // shape 1xCx1x1
    Tensor<T> beta;  // shape 1xCx1x1
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T eps = T(1e-5);
    T momentum = T(0.1);

    BatchNorm() = default;
    explicit BatchNorm(int channels, T eps_ = T(1e-5), T momentum_ = T(0.1))
        : gamma(Tensor<T>::full(Shape{1, channels, 1, 1}, T(1))),
          beta(Tensor<T>::zeros(Shape{1, channels, 1, 1})),
          running_mean(static_cast<std::size_t>(channels), T(0)),
          running_var(static_cast<std::size_t>(channels), T(1)),
          eps(eps_),
          momentum(momentum_) {}

    int channels() const { return gamma.shape().c; }
};

// Sampling-grid alignment for fractional scaling. half_pixel maps output
// centers src = (i + 0.5) * in/out - 0.5 (clamped); endpoint aligns corners
// src = i * (in-1)/(out-1).
enum class ResizeAlign { half_pixel, endpoint };

// Precomputed bilinear grid for one axis: the two source indices and their
// weights per output coordinate. Weights are non-negative and sum to 1.
template <typename T>
struct ResizeAxis {
    std::vector<int> i0, i1;
    std::vector<T> w0, w1;
};

template <typename T>
struct ResizeGrid {
    ResizeAxis<T> y, x;
};

template <typename T>
ResizeGrid<T> make_resize_grid(int in_h, int in_w, int out_h, int out_w, ResizeAlign align);

namespace ops {

template <typename T>
Tensor<T> add(RunContext<T>& ctx, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> add_scalar(RunContext<T>& ctx, const Tensor<T>& a, T s);
template <typename T>
Tensor<T> mul(RunContext<T>& ctx, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(RunContext<T>& ctx, const Tensor<T>& a, T s);
template <typename T>
Tensor<T> relu(RunContext<T>& ctx, const Tensor<T>& a);

// Stride-1 cross-correlation, no bias anywhere. weight is (out_channels,
// in_channels/groups, k, k) with k odd; padding is k/2 so spatial extents are
// preserved and all size change flows through fractional scaling.
template <typename T>
Tensor<T> conv2d(RunContext<T>& ctx, const Tensor<T>& x, const Tensor<T>& weight,
                 int groups = 1);

template <typename T>
Tensor<T> batchnorm(RunContext<T>& ctx, const Tensor<T>& x, BatchNorm<T>& bn);

template <typename T>
Tensor<T> bilinear_resize(RunContext<T>& ctx, const Tensor<T>& x, int out_h, int out_w,
                          ResizeAlign align = ResizeAlign::half_pixel);

template <typename T>
Tensor<T> global_avg_pool(RunContext<T>& ctx, const Tensor<T>& x);

// x must be (N, C, 1, 1); w is (classes, C, 1, 1), b is (1, classes, 1, 1).
template <typename T>
Tensor<T> linear(RunContext<T>& ctx, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b);

// Mean over the batch of -log softmax(logits)[label]; logits (N, C, 1, 1).
template <typename T>
Tensor<T> softmax_cross_entropy(RunContext<T>& ctx, const Tensor<T>& logits,
                                const std::vector<int>& labels);

template <typename T>
Tensor<T> dropout(RunContext<T>& ctx, const Tensor<T>& x, double rate);

// Channel range [c0, c1) of x, copied.
template <typename T>
Tensor<T> slice_channels(RunContext<T>& ctx, const Tensor<T>& x, int c0, int c1);

template <typename T>
Tensor<T> concat_channels(RunContext<T>& ctx, const Tensor<T>& a, const Tensor<T>& b);

// Scalar (1x1x1x1) sum of all elements.
template <typename T>
Tensor<T> sum(RunContext<T>& ctx, const Tensor<T>& x);

} // namespace ops
} // namespace ecn
