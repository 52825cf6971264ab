#include "ecn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "ecn/check.hpp"

namespace ecn {
namespace kern {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Backend initial_backend() {
    if (const char* env = std::getenv("ECN_BACKEND")) {
        const std::string s(env);
        if (s == "scalar") return Backend::scalar;
        if (s == "avx2" && cpu_has_avx2()) return Backend::avx2;
        return Backend::scalar;
    }
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_state() {
    static std::atomic<Backend> b{initial_backend()};
    return b;
}

std::atomic<int>& thread_state() {
    static std::atomic<int> t{1};
    return t;
}

} // namespace

Backend active_backend() { return backend_state().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (b == Backend::avx2)
        check(cpu_has_avx2(), "avx2 backend requested but this CPU lacks AVX2/FMA");
    backend_state().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

int num_threads() { return thread_state().load(std::memory_order_relaxed); }

void set_num_threads(int n) {
    check(n >= 1, "thread count must be >= 1");
    thread_state().store(n, std::memory_order_relaxed);
}

int parallel_chunks(std::int64_t n,
                    const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return 0;
    const int want = num_threads();
    const int k = static_cast<int>(std::min<std::int64_t>(want, n));
    if (k <= 1) {
        fn(0, 0, n);
        return 1;
    }
    const std::int64_t chunk = (n + k - 1) / k;
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
    workers.reserve(static_cast<std::size_t>(k - 1));
    for (int i = 1; i < k; ++i) {
        const std::int64_t b = i * chunk;
        const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
        workers.emplace_back([&, i, b, e] {
            try {
                fn(i, b, e);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        });
    }
    try {
        fn(0, 0, std::min<std::int64_t>(n, chunk));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& w : workers) w.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return k;
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    parallel_chunks(n, [&](int, std::int64_t b, std::int64_t e) { fn(b, e); });
}

// ---- dispatched entry points ----

namespace {
inline bool use_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return active_backend() == Backend::avx2;
#else
    return false;
#endif
}
} // namespace

#if defined(__x86_64__) || defined(_M_X64)
#define ECN_DISPATCH_F32(fn, ...)          \
    if (use_avx2()) {                      \
        avx2::fn(__VA_ARGS__);             \
        return;                            \
    }                                      \
    scalar::fn(__VA_ARGS__)
#else
#define ECN_DISPATCH_F32(fn, ...) scalar::fn(__VA_ARGS__)
#endif

template <>
void add<float>(const float* a, const float* b, float* y, std::int64_t n) {
    ECN_DISPATCH_F32(add, a, b, y, n);
}
template <>
void add_scalar<float>(const float* a, float s, float* y, std::int64_t n) {
    ECN_DISPATCH_F32(add_scalar, a, s, y, n);
}
template <>
void mul<float>(const float* a, const float* b, float* y, std::int64_t n) {
    ECN_DISPATCH_F32(mul, a, b, y, n);
}
template <>
void scale<float>(const float* a, float s, float* y, std::int64_t n) {
    ECN_DISPATCH_F32(scale, a, s, y, n);
}
template <>
void relu<float>(const float* x, float* y, std::int64_t n) {
    ECN_DISPATCH_F32(relu, x, y, n);
}
template <>
void relu_backward<float>(const float* x, const float* gy, float* gx, std::int64_t n) {
    ECN_DISPATCH_F32(relu_backward, x, gy, gx, n);
}
template <>
void axpy<float>(float a, const float* x, float* y, std::int64_t n) {
    ECN_DISPATCH_F32(axpy, a, x, y, n);
}
template <>
void sgd_step<float>(float* p, const float* g, float* v, std::int64_t n,
                     float lr, float momentum, float weight_decay) {
    ECN_DISPATCH_F32(sgd_step, p, g, v, n, lr, momentum, weight_decay);
}
template <>
void gemm<float>(const float* A, const float* B, float* C, int M, int N, int K,
                 bool accumulate) {
    ECN_DISPATCH_F32(gemm, A, B, C, M, N, K, accumulate);
}
template <>
void gemm_nt<float>(const float* A, const float* B, float* C, int M, int N, int K,
                    bool accumulate) {
    ECN_DISPATCH_F32(gemm_nt, A, B, C, M, N, K, accumulate);
}
template <>
void dwconv3x3p1<float>(const float* x, const float* w9, int C, int H, int W, float* y) {
    ECN_DISPATCH_F32(dwconv3x3p1, x, w9, C, H, W, y);
}

#undef ECN_DISPATCH_F32

// float ops without a SIMD variant
template <>
void im2col_3x3p1<float>(const float* x, int C, int H, int W, float* col) {
    scalar::im2col_3x3p1(x, C, H, W, col);
}
template <>
void col2im_3x3p1<float>(const float* col, int C, int H, int W, float* x) {
    scalar::col2im_3x3p1(col, C, H, W, x);
}
template <>
void dwconv3x3p1_backward_input<float>(const float* gy, const float* w9, int C, int H,
                                       int W, float* gx) {
    scalar::dwconv3x3p1_backward_input(gy, w9, C, H, W, gx);
}
template <>
void dwconv3x3p1_backward_weight<float>(const float* x, const float* gy, int C, int H,
                                        int W, float* gw9) {
    scalar::dwconv3x3p1_backward_weight(x, gy, C, H, W, gw9);
}

// double: scalar reference path only (fixed reduction order for verification)
template <>
void add<double>(const double* a, const double* b, double* y, std::int64_t n) {
    scalar::add(a, b, y, n);
}
template <>
void add_scalar<double>(const double* a, double s, double* y, std::int64_t n) {
    scalar::add_scalar(a, s, y, n);
}
template <>
void mul<double>(const double* a, const double* b, double* y, std::int64_t n) {
    scalar::mul(a, b, y, n);
}
template <>
void scale<double>(const double* a, double s, double* y, std::int64_t n) {
    scalar::scale(a, s, y, n);
}
template <>
void relu<double>(const double* x, double* y, std::int64_t n) {
    scalar::relu(x, y, n);
}
template <>
void relu_backward<double>(const double* x, const double* gy, double* gx, std::int64_t n) {
    scalar::relu_backward(x, gy, gx, n);
}
template <>
void axpy<double>(double a, const double* x, double* y, std::int64_t n) {
    scalar::axpy(a, x, y, n);
}
template <>
void sgd_step<double>(double* p, const double* g, double* v, std::int64_t n,
                      double lr, double momentum, double weight_decay) {
    scalar::sgd_step(p, g, v, n, lr, momentum, weight_decay);
}
template <>
void gemm<double>(const double* A, const double* B, double* C, int M, int N, int K,
                  bool accumulate) {
    scalar::gemm(A, B, C, M, N, K, accumulate);
}
template <>
void gemm_nt<double>(const double* A, const double* B, double* C, int M, int N, int K,
                     bool accumulate) {
    scalar::gemm_nt(A, B, C, M, N, K, accumulate);
}
template <>
void im2col_3x3p1<double>(const double* x, int C, int H, int W, double* col) {
    scalar::im2col_3x3p1(x, C, H, W, col);
}
template <>
void col2im_3x3p1<double>(const double* col, int C, int H, int W, double* x) {
    scalar::col2im_3x3p1(col, C, H, W, x);
}
template <>
void dwconv3x3p1<double>(const double* x, const double* w9, int C, int H, int W,
                         double* y) {
    scalar::dwconv3x3p1(x, w9, C, H, W, y);
}
template <>
void dwconv3x3p1_backward_input<double>(const double* gy, const double* w9, int C, int H,
                                        int W, double* gx) {
    scalar::dwconv3x3p1_backward_input(gy, w9, C, H, W, gx);
}
template <>
void dwconv3x3p1_backward_weight<double>(const double* x, const double* gy, int C, int H,
                                         int W, double* gw9) {
    scalar::dwconv3x3p1_backward_weight(x, gy, C, H, W, gw9);
}

} // namespace kern
} // namespace ecn
