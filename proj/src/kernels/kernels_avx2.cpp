#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

#include "ecn/kernels.hpp"

namespace ecn {
namespace kern {
namespace avx2 {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehl_ps(lo, lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_shuffle_ps(lo, lo, 0x55);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
}

// dst[0..n) += w * src[0..n)
inline void tap_axpy(float w, const float* src, float* dst, int n) {
    const __m256 wv = _mm256_set1_ps(w);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 d = _mm256_loadu_ps(dst + i);
        d = _mm256_fmadd_ps(wv, _mm256_loadu_ps(src + i), d);
        _mm256_storeu_ps(dst + i, d);
    }
    for (; i < n; ++i) dst[i] += w * src[i];
}

} // namespace

void add(const float* a, const float* b, float* y, std::int64_t n) {
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void add_scalar(const float* a, float s, float* y, std::int64_t n) {
    const __m256 sv = _mm256_set1_ps(s);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), sv));
    for (; i < n; ++i) y[i] = a[i] + s;
}

void mul(const float* a, const float* b, float* y, std::int64_t n) {
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void scale(const float* a, float s, float* y, std::int64_t n) {
    const __m256 sv = _mm256_set1_ps(s);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), sv));
    for (; i < n; ++i) y[i] = a[i] * s;
}

void relu(const float* x, float* y, std::int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, std::int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 g = _mm256_and_ps(mask, _mm256_loadu_ps(gy + i));
        _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), g));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0f) gx[i] += gy[i];
}

void axpy(float a, const float* x, float* y, std::int64_t n) {
    const __m256 av = _mm256_set1_ps(a);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 d = _mm256_loadu_ps(y + i);
        d = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), d);
        _mm256_storeu_ps(y + i, d);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void sgd_step(float* p, const float* g, float* v, std::int64_t n,
              float lr, float momentum, float weight_decay) {
    const __m256 mv = _mm256_set1_ps(momentum);
    const __m256 wdv = _mm256_set1_ps(weight_decay);
    const __m256 lrv = _mm256_set1_ps(lr);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vel = _mm256_fmadd_ps(mv, _mm256_loadu_ps(v + i), _mm256_loadu_ps(g + i));
        __m256 par = _mm256_loadu_ps(p + i);
        vel = _mm256_fmadd_ps(wdv, par, vel);
        _mm256_storeu_ps(v + i, vel);
        _mm256_storeu_ps(p + i, _mm256_fnmadd_ps(lrv, vel, par));
    }
    for (; i < n; ++i) {
        v[i] = momentum * v[i] + g[i] + weight_decay * p[i];
        p[i] -= lr * v[i];
    }
}

void gemm(const float* A, const float* B, float* C, int M, int N, int K, bool accumulate) {
    const std::int64_t ldb = N;
    int m = 0;
    for (; m + 2 <= M; m += 2) {
        const float* a0 = A + static_cast<std::int64_t>(m) * K;
        const float* a1 = a0 + K;
        float* c0 = C + static_cast<std::int64_t>(m) * N;
        float* c1 = c0 + N;
        int j = 0;
        for (; j + 16 <= N; j += 16) {
            __m256 acc00, acc01, acc10, acc11;
            if (accumulate) {
                acc00 = _mm256_loadu_ps(c0 + j);
                acc01 = _mm256_loadu_ps(c0 + j + 8);
                acc10 = _mm256_loadu_ps(c1 + j);
                acc11 = _mm256_loadu_ps(c1 + j + 8);
            } else {
                acc00 = acc01 = acc10 = acc11 = _mm256_setzero_ps();
            }
            const float* b = B + j;
            for (int k = 0; k < K; ++k, b += ldb) {
                const __m256 b0 = _mm256_loadu_ps(b);
                const __m256 b1 = _mm256_loadu_ps(b + 8);
                const __m256 av0 = _mm256_set1_ps(a0[k]);
                const __m256 av1 = _mm256_set1_ps(a1[k]);
                acc00 = _mm256_fmadd_ps(av0, b0, acc00);
                acc01 = _mm256_fmadd_ps(av0, b1, acc01);
                acc10 = _mm256_fmadd_ps(av1, b0, acc10);
                acc11 = _mm256_fmadd_ps(av1, b1, acc11);
            }
            _mm256_storeu_ps(c0 + j, acc00);
            _mm256_storeu_ps(c0 + j + 8, acc01);
            _mm256_storeu_ps(c1 + j, acc10);
            _mm256_storeu_ps(c1 + j + 8, acc11);
        }
        for (; j + 8 <= N; j += 8) {
            __m256 acc0, acc1;
            if (accumulate) {
                acc0 = _mm256_loadu_ps(c0 + j);
                acc1 = _mm256_loadu_ps(c1 + j);
            } else {
                acc0 = acc1 = _mm256_setzero_ps();
            }
            const float* b = B + j;
            for (int k = 0; k < K; ++k, b += ldb) {
                const __m256 b0 = _mm256_loadu_ps(b);
                acc0 = _mm256_fmadd_ps(_mm256_set1_ps(a0[k]), b0, acc0);
                acc1 = _mm256_fmadd_ps(_mm256_set1_ps(a1[k]), b0, acc1);
            }
            _mm256_storeu_ps(c0 + j, acc0);
            _mm256_storeu_ps(c1 + j, acc1);
        }
        for (; j < N; ++j) {
            float s0 = accumulate ? c0[j] : 0.0f;
            float s1 = accumulate ? c1[j] : 0.0f;
            for (int k = 0; k < K; ++k) {
                s0 += a0[k] * B[static_cast<std::int64_t>(k) * ldb + j];
                s1 += a1[k] * B[static_cast<std::int64_t>(k) * ldb + j];
            }
            c0[j] = s0;
            c1[j] = s1;
        }
    }
    if (m < M) {
        const float* a0 = A + static_cast<std::int64_t>(m) * K;
        float* c0 = C + static_cast<std::int64_t>(m) * N;
        int j = 0;
        for (; j + 8 <= N; j += 8) {
            __m256 acc = accumulate ? _mm256_loadu_ps(c0 + j) : _mm256_setzero_ps();
            const float* b = B + j;
            for (int k = 0; k < K; ++k, b += ldb)
                acc = _mm256_fmadd_ps(_mm256_set1_ps(a0[k]), _mm256_loadu_ps(b), acc);
            _mm256_storeu_ps(c0 + j, acc);
        }
        for (; j < N; ++j) {
            float s = accumulate ? c0[j] : 0.0f;
            for (int k = 0; k < K; ++k)
                s += a0[k] * B[static_cast<std::int64_t>(k) * ldb + j];
            c0[j] = s;
        }
    }
}

void gemm_nt(const float* A, const float* B, float* C, int M, int N, int K, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        const float* a = A + static_cast<std::int64_t>(m) * K;
        float* c = C + static_cast<std::int64_t>(m) * N;
        for (int j = 0; j < N; ++j) {
            const float* b = B + static_cast<std::int64_t>(j) * K;
            __m256 acc0 = _mm256_setzero_ps();
            __m256 acc1 = _mm256_setzero_ps();
            int k = 0;
            for (; k + 16 <= K; k += 16) {
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc0);
                acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k + 8), _mm256_loadu_ps(b + k + 8), acc1);
            }
            for (; k + 8 <= K; k += 8)
                acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k), acc0);
            float s = hsum8(_mm256_add_ps(acc0, acc1));
            for (; k < K; ++k) s += a[k] * b[k];
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

void dwconv3x3p1(const float* x, const float* w9, int C, int H, int W, float* y) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        const float* xc = x + c * plane;
        const float* w = w9 + c * 9;
        float* yc = y + c * plane;
        std::memset(yc, 0, sizeof(float) * static_cast<std::size_t>(plane));
        for (int oy = 0; oy < H; ++oy) {
            float* yrow = yc + static_cast<std::int64_t>(oy) * W;
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = oy + ky - 1;
                if (sy < 0 || sy >= H) continue;
                const float* xrow = xc + static_cast<std::int64_t>(sy) * W;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int lo = dx < 0 ? -dx : 0;
                    const int hi = dx > 0 ? W - dx : W;
                    if (hi <= lo) continue;
                    tap_axpy(w[ky * 3 + kx], xrow + lo + dx, yrow + lo, hi - lo);
                }
            }
        }
    }
}

} // namespace avx2
} // namespace kern
} // namespace ecn

#endif // x86_64
