#pragma once

#include <cstdint>
#include <functional>

namespace ecn {
namespace kern {

// Runtime-selected implementation of the arithmetic inner loops. The scalar
// kernels are the reference; the AVX2 kernels must agree with them within
// floating-point reassociation (equivalence-tested). Double precision always
// runs the scalar path so verification-mode results have a fixed reduction
// order.
enum class Backend { scalar, avx2 };

bool cpu_has_avx2();
Backend active_backend();
void set_backend(Backend b); // throws ecn::Error if unsupported on this CPU
const char* backend_name(Backend b);

// Kernel-internal worker threads. Partitioning is a fixed contiguous split,
// so results are run-to-run deterministic for a fixed thread count.
int num_threads();
void set_num_threads(int n);

// Splits [0, n) into <= num_threads() contiguous chunks and runs fn(chunk_index,
// begin, end) on worker threads. Returns the number of chunks used.
int parallel_chunks(std::int64_t n,
                    const std::function<void(int, std::int64_t, std::int64_t)>& fn);
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

// ---- elementwise ----
template <typename T> void add(const T* a, const T* b, T* y, std::int64_t n);
template <typename T> void add_scalar(const T* a, T s, T* y, std::int64_t n);
template <typename T> void mul(const T* a, const T* b, T* y, std::int64_t n);
template <typename T> void scale(const T* a, T s, T* y, std::int64_t n);
template <typename T> void relu(const T* x, T* y, std::int64_t n);
// gx += gy where x > 0
template <typename T> void relu_backward(const T* x, const T* gy, T* gx, std::int64_t n);
// y += a * x
template <typename T> void axpy(T a, const T* x, T* y, std::int64_t n);
// v = momentum*v + g + weight_decay*p ; p -= lr*v
template <typename T>
void sgd_step(T* p, const T* g, T* v, std::int64_t n, T lr, T momentum, T weight_decay);

// ---- small dense matrix products (row-major) ----
// C[MxN] = A[MxK] * B[KxN], accumulating into C when accumulate is set.
template <typename T>
void gemm(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate);
// C[MxN] = A[MxK] * B^T with B stored [NxK].
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate);

// ---- 3x3 stride-1 pad-1 convolution helpers (single image, CHW) ----
// col[(c*3 + ky)*3 + kx][y*W + x] = x[c][y+ky-1][x+kx-1], zero outside.
template <typename T> void im2col_3x3p1(const T* x, int C, int H, int W, T* col);
// adjoint scatter: x += col
template <typename T> void col2im_3x3p1(const T* col, int C, int H, int W, T* x);
// channel-wise 3x3: y[c] = w9[c] (*) x[c]; w9 is C contiguous 3x3 kernels
template <typename T>
void dwconv3x3p1(const T* x, const T* w9, int C, int H, int W, T* y);
template <typename T>
void dwconv3x3p1_backward_input(const T* gy, const T* w9, int C, int H, int W, T* gx);
template <typename T>
void dwconv3x3p1_backward_weight(const T* x, const T* gy, int C, int H, int W, T* gw9);

namespace scalar {
// Reference implementations, sequential reduction order, any arithmetic type.
template <typename T> void add(const T* a, const T* b, T* y, std::int64_t n);
template <typename T> void add_scalar(const T* a, T s, T* y, std::int64_t n);
template <typename T> void mul(const T* a, const T* b, T* y, std::int64_t n);
template <typename T> void scale(const T* a, T s, T* y, std::int64_t n);
template <typename T> void relu(const T* x, T* y, std::int64_t n);
template <typename T> void relu_backward(const T* x, const T* gy, T* gx, std::int64_t n);
template <typename T> void axpy(T a, const T* x, T* y, std::int64_t n);
template <typename T>
void sgd_step(T* p, const T* g, T* v, std::int64_t n, T lr, T momentum, T weight_decay);
template <typename T>
void gemm(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate);
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate);
template <typename T> void im2col_3x3p1(const T* x, int C, int H, int W, T* col);
template <typename T> void col2im_3x3p1(const T* col, int C, int H, int W, T* x);
template <typename T>
void dwconv3x3p1(const T* x, const T* w9, int C, int H, int W, T* y);
template <typename T>
void dwconv3x3p1_backward_input(const T* gy, const T* w9, int C, int H, int W, T* gx);
template <typename T>
void dwconv3x3p1_backward_weight(const T* x, const T* gy, int C, int H, int W, T* gw9);
} // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
// float only; compiled with -mavx2 -mfma in its own translation unit.
void add(const float* a, const float* b, float* y, std::int64_t n);
void add_scalar(const float* a, float s, float* y, std::int64_t n);
void mul(const float* a, const float* b, float* y, std::int64_t n);
void scale(const float* a, float s, float* y, std::int64_t n);
void relu(const float* x, float* y, std::int64_t n);
void relu_backward(const float* x, const float* gy, float* gx, std::int64_t n);
void axpy(float a, const float* x, float* y, std::int64_t n);
void sgd_step(float* p, const float* g, float* v, std::int64_t n,
              float lr, float momentum, float weight_decay);
void gemm(const float* A, const float* B, float* C, int M, int N, int K, bool accumulate);
void gemm_nt(const float* A, const float* B, float* C, int M, int N, int K, bool accumulate);
void dwconv3x3p1(const float* x, const float* w9, int C, int H, int W, float* y);
} // namespace avx2
#endif

} // namespace kern
} // namespace ecn
