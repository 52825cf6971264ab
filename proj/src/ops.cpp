#include "ecn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "ecn/check.hpp"
#include "ecn/kernels.hpp"

namespace ecn {

template <typename T>
ResizeGrid<T> make_resize_grid(int in_h, int in_w, int out_h, int out_w,
                               ResizeAlign align) {
    check(in_h > 0 && in_w > 0 && out_h > 0 && out_w > 0,
          "resize extents must be positive");
    auto make_axis = [&](int in, int out) {
        ResizeAxis<T> ax;
        ax.i0.resize(static_cast<std::size_t>(out));
        ax.i1.resize(static_cast<std::size_t>(out));
        ax.w0.resize(static_cast<std::size_t>(out));
        ax.w1.resize(static_cast<std::size_t>(out));
        for (int i = 0; i < out; ++i) {
            double src;
            if (align == ResizeAlign::half_pixel) {
                src = (i + 0.5) * (static_cast<double>(in) / out) - 0.5;
            } else {
                src = out > 1 ? i * (static_cast<double>(in - 1) / (out - 1)) : 0.0;
            }
            src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
            int lo = static_cast<int>(std::floor(src));
            if (lo > in - 1) lo = in - 1;
            const int hi = std::min(lo + 1, in - 1);
            const double f = src - lo;
            ax.i0[static_cast<std::size_t>(i)] = lo;
            ax.i1[static_cast<std::size_t>(i)] = hi;
            ax.w0[static_cast<std::size_t>(i)] = static_cast<T>(1.0 - f);
            ax.w1[static_cast<std::size_t>(i)] = static_cast<T>(f);
        }
        return ax;
    };
    ResizeGrid<T> g;
    g.y = make_axis(in_h, out_h);
    g.x = make_axis(in_w, out_w);
    return g;
}

template ResizeGrid<float> make_resize_grid<float>(int, int, int, int, ResizeAlign);
template ResizeGrid<double> make_resize_grid<double>(int, int, int, int, ResizeAlign);

namespace ops {

namespace {

template <typename T>
bool track(RunContext<T>& ctx, std::initializer_list<const Tensor<T>*> inputs) {
    if (!ctx.tape) return false;
    for (const Tensor<T>* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

template <typename T>
void mark_output(Tensor<T>& out) {
    out.set_requires_grad(true); // allocates the grad buffer for downstream use
}

} // namespace

// ---- elementwise ----

template <typename T>
Tensor<T> add(RunContext<T>& ctx, const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " +
                                      b.shape().str());
    Tensor<T> out(a.shape());
    kern::add(a.data(), b.data(), out.data(), a.numel());
    if (track(ctx, {&a, &b})) {
        mark_output(out);
        Tensor<T> ac = a, bc = b, oc = out;
        ctx.tape->record([ac, bc, oc]() mutable {
            const T* g = oc.grad();
            if (ac.requires_grad()) {
                ac.ensure_grad();
                kern::axpy(T(1), g, ac.grad(), ac.numel());
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                kern::axpy(T(1), g, bc.grad(), bc.numel());
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> add_scalar(RunContext<T>& ctx, const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    kern::add_scalar(a.data(), s, out.data(), a.numel());
    if (track(ctx, {&a})) {
        mark_output(out);
        Tensor<T> ac = a, oc = out;
        ctx.tape->record([ac, oc]() mutable {
            ac.ensure_grad();
            kern::axpy(T(1), oc.grad(), ac.grad(), ac.numel());
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(RunContext<T>& ctx, const Tensor<T>& a, const Tensor<T>& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch " + a.shape().str() + " vs " +
                                      b.shape().str());
    Tensor<T> out(a.shape());
    kern::mul(a.data(), b.data(), out.data(), a.numel());
    if (track(ctx, {&a, &b})) {
        mark_output(out);
        Tensor<T> ac = a, bc = b, oc = out;
        ctx.tape->record([ac, bc, oc]() mutable {
            const T* g = oc.grad();
            const std::int64_t n = oc.numel();
            if (ac.requires_grad()) {
                ac.ensure_grad();
                T* ga = ac.grad();
                const T* bv = bc.data();
                for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                T* gb = bc.grad();
                const T* av = ac.data();
                for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(RunContext<T>& ctx, const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    kern::scale(a.data(), s, out.data(), a.numel());
    if (track(ctx, {&a})) {
        mark_output(out);
        Tensor<T> ac = a, oc = out;
        ctx.tape->record([ac, oc, s]() mutable {
            ac.ensure_grad();
            kern::axpy(s, oc.grad(), ac.grad(), ac.numel());
        });
    }
    return out;
}

template <typename T>
Tensor<T> relu(RunContext<T>& ctx, const Tensor<T>& a) {
    Tensor<T> out(a.shape());
    kern::relu(a.data(), out.data(), a.numel());
    if (ctx.relu_kink_min) {
        const T* x = a.data();
        double m = *ctx.relu_kink_min;
        for (std::int64_t i = 0, n = a.numel(); i < n; ++i)
            m = std::min(m, std::abs(static_cast<double>(x[i])));
        *ctx.relu_kink_min = m;
    }
    if (track(ctx, {&a})) {
        mark_output(out);
        Tensor<T> ac = a, oc = out;
        ctx.tape->record([ac, oc]() mutable {
            ac.ensure_grad();
            kern::relu_backward(ac.data(), oc.grad(), ac.grad(), ac.numel());
        });
    }
    return out;
}

// ---- convolution ----

namespace {

enum class ConvPath { pointwise, full3x3, depthwise3x3, general };

template <typename T>
struct ConvDims {
    int N, C, H, W, OC, ICG, K, groups, pad;
    std::int64_t plane;
    ConvPath path;
};

template <typename T>
ConvDims<T> conv_dims(const Tensor<T>& x, const Tensor<T>& w, int groups) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    check(ws.h == ws.w && ws.h % 2 == 1, "conv2d: kernel must be square and odd");
    check(groups >= 1 && xs.c % groups == 0 && ws.n % groups == 0,
          "conv2d: groups must divide input and output channels");
    check(ws.c * groups == xs.c,
          "conv2d: weight expects " + std::to_string(ws.c * groups) +
              " input channels, got " + std::to_string(xs.c));
    ConvDims<T> d;
    d.N = xs.n;
    d.C = xs.c;
    d.H = xs.h;
    d.W = xs.w;
    d.OC = ws.n;
    d.ICG = ws.c;
    d.K = ws.h;
    d.groups = groups;
    d.pad = ws.h / 2;
    d.plane = static_cast<std::int64_t>(d.H) * d.W;
    if (groups == 1 && d.K == 1)
        d.path = ConvPath::pointwise;
    else if (groups == 1 && d.K == 3)
        d.path = ConvPath::full3x3;
    else if (groups == d.C && d.ICG == 1 && d.OC == d.C && d.K == 3)
        d.path = ConvPath::depthwise3x3;
    else
        d.path = ConvPath::general;
    return d;
}

// Reference path for arbitrary odd kernels / group counts.
template <typename T>
void conv_general_forward(const ConvDims<T>& d, const T* x, const T* w, T* y) {
    const int ocg = d.OC / d.groups;
    for (int n = 0; n < d.N; ++n) {
        const T* xn = x + static_cast<std::int64_t>(n) * d.C * d.plane;
        T* yn = y + static_cast<std::int64_t>(n) * d.OC * d.plane;
        for (int oc = 0; oc < d.OC; ++oc) {
            const int g = oc / ocg;
            const T* wk = w + static_cast<std::int64_t>(oc) * d.ICG * d.K * d.K;
            T* out = yn + oc * d.plane;
            for (int oy = 0; oy < d.H; ++oy) {
                for (int ox = 0; ox < d.W; ++ox) {
                    T s = T(0);
                    for (int ic = 0; ic < d.ICG; ++ic) {
                        const T* xc = xn + (static_cast<std::int64_t>(g) * d.ICG + ic) * d.plane;
                        for (int ky = 0; ky < d.K; ++ky) {
                            const int sy = oy + ky - d.pad;
                            if (sy < 0 || sy >= d.H) continue;
                            for (int kx = 0; kx < d.K; ++kx) {
                                const int sx = ox + kx - d.pad;
                                if (sx < 0 || sx >= d.W) continue;
                                s += wk[(static_cast<std::int64_t>(ic) * d.K + ky) * d.K + kx] *
                                     xc[static_cast<std::int64_t>(sy) * d.W + sx];
                            }
                        }
                    }
                    out[static_cast<std::int64_t>(oy) * d.W + ox] = s;
                }
            }
        }
    }
}

template <typename T>
void conv_general_backward(const ConvDims<T>& d, const T* x, const T* w, const T* gy,
                           T* gx, T* gw) {
    const int ocg = d.OC / d.groups;
    for (int n = 0; n < d.N; ++n) {
        const T* xn = x + static_cast<std::int64_t>(n) * d.C * d.plane;
        const T* gyn = gy + static_cast<std::int64_t>(n) * d.OC * d.plane;
        for (int oc = 0; oc < d.OC; ++oc) {
            const int g = oc / ocg;
            const T* wk = w + static_cast<std::int64_t>(oc) * d.ICG * d.K * d.K;
            T* gwk = gw ? gw + static_cast<std::int64_t>(oc) * d.ICG * d.K * d.K : nullptr;
            const T* gout = gyn + oc * d.plane;
            for (int oy = 0; oy < d.H; ++oy) {
                for (int ox = 0; ox < d.W; ++ox) {
                    const T go = gout[static_cast<std::int64_t>(oy) * d.W + ox];
                    for (int ic = 0; ic < d.ICG; ++ic) {
                        const std::int64_t ch = static_cast<std::int64_t>(g) * d.ICG + ic;
                        for (int ky = 0; ky < d.K; ++ky) {
                            const int sy = oy + ky - d.pad;
                            if (sy < 0 || sy >= d.H) continue;
                            for (int kx = 0; kx < d.K; ++kx) {
                                const int sx = ox + kx - d.pad;
                                if (sx < 0 || sx >= d.W) continue;
                                const std::int64_t xi =
                                    ch * d.plane + static_cast<std::int64_t>(sy) * d.W + sx;
                                const std::int64_t wi =
                                    (static_cast<std::int64_t>(ic) * d.K + ky) * d.K + kx;
                                if (gx)
                                    gx[static_cast<std::int64_t>(n) * d.C * d.plane + xi] +=
                                        go * wk[wi];
                                if (gwk) gwk[wi] += go * xn[xi];
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace

template <typename T>
Tensor<T> conv2d(RunContext<T>& ctx, const Tensor<T>& x, const Tensor<T>& weight,
                 int groups) {
    const ConvDims<T> d = conv_dims(x, weight, groups);
    Tensor<T> out(Shape{d.N, d.OC, d.H, d.W});

    const T* xp = x.data();
    const T* wp = weight.data();
    T* yp = out.data();
    const std::int64_t xstride = static_cast<std::int64_t>(d.C) * d.plane;
    const std::int64_t ystride = static_cast<std::int64_t>(d.OC) * d.plane;

    switch (d.path) {
    case ConvPath::pointwise:
        kern::parallel_for(d.N, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t n = b; n < e; ++n)
                kern::gemm(wp, xp + n * xstride, yp + n * ystride, d.OC,
                           static_cast<int>(d.plane), d.C, false);
        });
        break;
    case ConvPath::full3x3:
        kern::parallel_for(d.N, [&](std::int64_t b, std::int64_t e) {
            std::vector<T> col(static_cast<std::size_t>(d.C) * 9 * d.plane);
            for (std::int64_t n = b; n < e; ++n) {
                kern::im2col_3x3p1(xp + n * xstride, d.C, d.H, d.W, col.data());
                kern::gemm(wp, col.data(), yp + n * ystride, d.OC,
                           static_cast<int>(d.plane), d.C * 9, false);
            }
        });
        break;
    case ConvPath::depthwise3x3:
        kern::parallel_for(d.N, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t n = b; n < e; ++n)
                kern::dwconv3x3p1(xp + n * xstride, wp, d.C, d.H, d.W, yp + n * ystride);
        });
        break;
    case ConvPath::general:
        conv_general_forward(d, xp, wp, yp);
        break;
    }

    if (track(ctx, {&x, &weight})) {
        mark_output(out);
        Tensor<T> xc = x, wc = weight, oc = out;
        ctx.tape->record([xc, wc, oc, d]() mutable {
            const T* gy = oc.grad();
            const bool need_x = xc.requires_grad();
            const bool need_w = wc.requires_grad();
            if (need_x) xc.ensure_grad();
            if (need_w) wc.ensure_grad();
            const std::int64_t xstride = static_cast<std::int64_t>(d.C) * d.plane;
            const std::int64_t ystride = static_cast<std::int64_t>(d.OC) * d.plane;
            const std::int64_t wn = wc.numel();

            if (d.path == ConvPath::general) {
                conv_general_backward(d, xc.data(), wc.data(), gy,
                                      need_x ? xc.grad() : nullptr,
                                      need_w ? wc.grad() : nullptr);
                return;
            }

            // Transposed weights for the input gradient.
            std::vector<T> wt;
            const int KK = d.ICG * d.K * d.K; // rows of W^T per group
            if (need_x && d.path != ConvPath::depthwise3x3) {
                wt.resize(static_cast<std::size_t>(wn));
                const T* w = wc.data();
                for (int och = 0; och < d.OC; ++och)
                    for (int r = 0; r < KK; ++r)
                        wt[static_cast<std::size_t>(r) * d.OC + och] =
                            w[static_cast<std::size_t>(och) * KK + r];
            }

            // Per-chunk weight-gradient partials, merged in chunk order so the
            // reduction order is fixed for a fixed thread count.
            std::vector<std::vector<T>> partials;
            const int chunks = kern::parallel_chunks(
                d.N, [&](int chunk, std::int64_t b, std::int64_t e) {
                    std::vector<T>* gwp = nullptr;
                    if (need_w) {
                        if (static_cast<int>(partials.size()) <= chunk) {
                            // parallel_chunks assigns chunk ids before launch;
                            // resize happens once under the first chunk only
                            // when single-threaded, otherwise preallocated
                            // below. Guard for safety.
                        }
                        gwp = &partials[static_cast<std::size_t>(chunk)];
                    }
                    std::vector<T> col, colg;
                    if (d.path == ConvPath::full3x3) {
                        col.resize(static_cast<std::size_t>(d.C) * 9 * d.plane);
                        if (need_x) colg.resize(static_cast<std::size_t>(d.C) * 9 * d.plane);
                    }
                    for (std::int64_t n = b; n < e; ++n) {
                        const T* gyn = gy + n * ystride;
                        switch (d.path) {
                        case ConvPath::pointwise:
                            if (need_x)
                                kern::gemm(wt.data(), gyn, xc.grad() + n * xstride, d.C,
                                           static_cast<int>(d.plane), d.OC, true);
                            if (need_w)
                                kern::gemm_nt(gyn, xc.data() + n * xstride, gwp->data(),
                                              d.OC, d.C, static_cast<int>(d.plane), true);
                            break;
                        case ConvPath::full3x3:
                            if (need_w) {
                                kern::im2col_3x3p1(xc.data() + n * xstride, d.C, d.H, d.W,
                                                   col.data());
                                kern::gemm_nt(gyn, col.data(), gwp->data(), d.OC, d.C * 9,
                                              static_cast<int>(d.plane), true);
                            }
                            if (need_x) {
                                kern::gemm(wt.data(), gyn, colg.data(), d.C * 9,
                                           static_cast<int>(d.plane), d.OC, false);
                                kern::col2im_3x3p1(colg.data(), d.C, d.H, d.W,
                                                   xc.grad() + n * xstride);
                            }
                            break;
                        case ConvPath::depthwise3x3:
                            if (need_x)
                                kern::dwconv3x3p1_backward_input(
                                    gyn, wc.data(), d.C, d.H, d.W, xc.grad() + n * xstride);
                            if (need_w)
                                kern::dwconv3x3p1_backward_weight(
                                    xc.data() + n * xstride, gyn, d.C, d.H, d.W,
                                    gwp->data());
                            break;
                        case ConvPath::general:
                            break; // handled above
                        }
                    }
                },
                need_w ? &partials : nullptr, wn);
            if (need_w)
                for (int i = 0; i < chunks; ++i)
                    kern::axpy(T(1), partials[static_cast<std::size_t>(i)].data(),
                               wc.grad(), wn);
        });
    }
    return out;
}

} // namespace ops
} // namespace ecn
