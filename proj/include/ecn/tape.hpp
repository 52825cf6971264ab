#pragma once

#include <cassert>
#include <cstddef>
#include <functional>
#include <vector>

#include "ecn/check.hpp"
#include "ecn/shape.hpp"
#include "ecn/tensor.hpp"

namespace ecn {

// Ordered record of executed differentiable operations. Appending keeps the
// record topologically sorted by construction; one reverse sweep visits every
// operation exactly once. Confined to the thread that built it.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_fn) {
        assert(!running_ && "tape must not grow during backward");
        nodes_.push_back(std::move(backward_fn));
    }

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    void clear() { nodes_.clear(); }

    void run_backward() {
        assert(!running_);
        running_ = true;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            (*it)();
        running_ = false;
    }

private:
    std::vector<std::function<void()>> nodes_;
    bool running_ = false;
};

// Seeds the scalar loss with gradient 1 and propagates through the tape.
// Gradients accumulate additively into every recorded input.
template <typename T>
void backward(Tensor<T>& loss, Tape<T>& tape) {
    check(loss.shape() == scalar_shape(),
          "backward requires a scalar loss, got " + loss.shape().str());
    check(!tape.empty(), "backward on an empty graph");
    loss.ensure_grad();
    loss.grad()[0] += T(1);
    tape.run_backward();
}

} // namespace ecn
