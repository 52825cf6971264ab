#include "ecn/kernels.hpp"

#include <cstring>

namespace ecn {
namespace kern {
namespace scalar {

template <typename T>
void add(const T* a, const T* b, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void add_scalar(const T* a, T s, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] + s;
}

template <typename T>
void mul(const T* a, const T* b, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <typename T>
void scale(const T* a, T s, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] * s;
}

template <typename T>
void relu(const T* x, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* gy, T* gx, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i)
        if (x[i] > T(0)) gx[i] += gy[i];
}

template <typename T>
void axpy(T a, const T* x, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void sgd_step(T* p, const T* g, T* v, std::int64_t n, T lr, T momentum, T weight_decay) {
    for (std::int64_t i = 0; i < n; ++i) {
        v[i] = momentum * v[i] + g[i] + weight_decay * p[i];
        p[i] -= lr * v[i];
    }
}

template <typename T>
void gemm(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        T* c = C + static_cast<std::int64_t>(m) * N;
        if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(N));
        const T* a = A + static_cast<std::int64_t>(m) * K;
        for (int k = 0; k < K; ++k) {
            const T av = a[k];
            const T* b = B + static_cast<std::int64_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int N, int K, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        const T* a = A + static_cast<std::int64_t>(m) * K;
        T* c = C + static_cast<std::int64_t>(m) * N;
        for (int j = 0; j < N; ++j) {
            const T* b = B + static_cast<std::int64_t>(j) * K;
            T s = T(0);
            for (int k = 0; k < K; ++k) s += a[k] * b[k];
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

template <typename T>
void im2col_3x3p1(const T* x, int C, int H, int W, T* col) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        const T* xc = x + c * plane;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* out = col + ((static_cast<std::int64_t>(c) * 3 + ky) * 3 + kx) * plane;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    T* row = out + static_cast<std::int64_t>(y) * W;
                    if (sy < 0 || sy >= H) {
                        std::memset(row, 0, sizeof(T) * static_cast<std::size_t>(W));
                        continue;
                    }
                    const T* src = xc + static_cast<std::int64_t>(sy) * W;
                    const int dx = kx - 1;
                    for (int xx = 0; xx < W; ++xx) {
                        const int sx = xx + dx;
                        row[xx] = (sx < 0 || sx >= W) ? T(0) : src[sx];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_3x3p1(const T* col, int C, int H, int W, T* x) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        T* xc = x + c * plane;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* in = col + ((static_cast<std::int64_t>(c) * 3 + ky) * 3 + kx) * plane;
                const int dx = kx - 1;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    T* dst = xc + static_cast<std::int64_t>(sy) * W;
                    const T* row = in + static_cast<std::int64_t>(y) * W;
                    for (int xx = 0; xx < W; ++xx) {
                        const int sx = xx + dx;
                        if (sx >= 0 && sx < W) dst[sx] += row[xx];
                    }
                }
            }
        }
    }
}

template <typename T>
void dwconv3x3p1(const T* x, const T* w9, int C, int H, int W, T* y) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        const T* xc = x + c * plane;
        const T* w = w9 + c * 9;
        T* yc = y + c * plane;
        for (int oy = 0; oy < H; ++oy) {
            for (int ox = 0; ox < W; ++ox) {
                T s = T(0);
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = oy + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = ox + kx - 1;
                        if (sx < 0 || sx >= W) continue;
                        s += w[ky * 3 + kx] * xc[static_cast<std::int64_t>(sy) * W + sx];
                    }
                }
                yc[static_cast<std::int64_t>(oy) * W + ox] = s;
            }
        }
    }
}

template <typename T>
void dwconv3x3p1_backward_input(const T* gy, const T* w9, int C, int H, int W, T* gx) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        const T* gc = gy + c * plane;
        const T* w = w9 + c * 9;
        T* xc = gx + c * plane;
        for (int oy = 0; oy < H; ++oy) {
            for (int ox = 0; ox < W; ++ox) {
                const T g = gc[static_cast<std::int64_t>(oy) * W + ox];
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = oy + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = ox + kx - 1;
                        if (sx < 0 || sx >= W) continue;
                        xc[static_cast<std::int64_t>(sy) * W + sx] += g * w[ky * 3 + kx];
                    }
                }
            }
        }
    }
}

template <typename T>
void dwconv3x3p1_backward_weight(const T* x, const T* gy, int C, int H, int W, T* gw9) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        const T* xc = x + c * plane;
        const T* gc = gy + c * plane;
        T* w = gw9 + c * 9;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T s = T(0);
                for (int oy = 0; oy < H; ++oy) {
                    const int sy = oy + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (int ox = 0; ox < W; ++ox) {
                        const int sx = ox + kx - 1;
                        if (sx < 0 || sx >= W) continue;
                        s += gc[static_cast<std::int64_t>(oy) * W + ox] *
                             xc[static_cast<std::int64_t>(sy) * W + sx];
                    }
                }
                w[ky * 3 + kx] += s;
            }
        }
    }
}

#define ECN_INSTANTIATE_SCALAR(T)                                                         \
    template void add<T>(const T*, const T*, T*, std::int64_t);                           \
    template void add_scalar<T>(const T*, T, T*, std::int64_t);                           \
    template void mul<T>(const T*, const T*, T*, std::int64_t);                           \
    template void scale<T>(const T*, T, T*, std::int64_t);                                \
    template void relu<T>(const T*, T*, std::int64_t);                                    \
    template void relu_backward<T>(const T*, const T*, T*, std::int64_t);                 \
    template void axpy<T>(T, const T*, T*, std::int64_t);                                 \
    template void sgd_step<T>(T*, const T*, T*, std::int64_t, T, T, T);                   \
    template void gemm<T>(const T*, const T*, T*, int, int, int, bool);                   \
    template void gemm_nt<T>(const T*, const T*, T*, int, int, int, bool);                \
    template void im2col_3x3p1<T>(const T*, int, int, int, T*);                           \
    template void col2im_3x3p1<T>(const T*, int, int, int, T*);                           \
    template void dwconv3x3p1<T>(const T*, const T*, int, int, int, T*);                  \
    template void dwconv3x3p1_backward_input<T>(const T*, const T*, int, int, int, T*);   \
    template void dwconv3x3p1_backward_weight<T>(const T*, const T*, int, int, int, T*);

ECN_INSTANTIATE_SCALAR(float)
ECN_INSTANTIATE_SCALAR(double)

#undef ECN_INSTANTIATE_SCALAR

} // namespace scalar
} // namespace kern
} // namespace ecn
