#include "fp/net/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fp::net {

template <typename T>
void conv2d_forward(const T* in, int n, int ci, int h, int w, const T* weight, const T* bias,
                    int co, int k, int pad, T* out) {
    const int oh = h + 2 * pad - k + 1;
    const int ow = w + 2 * pad - k + 1;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

    // The adaptive head (kernel = full extent, 1x1 output) is a dot product
    // over the contiguous sample block.
    if (pad == 0 && oh == 1 && ow == 1 && k == h && k == w) {
        const int features = static_cast<int>(ci * in_plane);
        fc_forward(in, n, features, weight, bias, co, out);
        return;
    }

    for (int b = 0; b < n; ++b) {
        const T* in_b = in + static_cast<std::size_t>(b) * ci * in_plane;
        T* out_b = out + static_cast<std::size_t>(b) * co * out_plane;
        for (int oc = 0; oc < co; ++oc) {
            T* out_c = out_b + static_cast<std::size_t>(oc) * out_plane;
            std::fill(out_c, out_c + out_plane, bias[oc]);
            for (int ic = 0; ic < ci; ++ic) {
                const T* in_c = in_b + static_cast<std::size_t>(ic) * in_plane;
                const T* w_base = weight + ((static_cast<std::size_t>(oc) * ci + ic) * k) * k;
                if (k == 3 && pad == 1 && ow >= 2 && oh >= 3) {
                    // all nine taps in one pass per interior row
                    const T w00 = w_base[0], w01 = w_base[1], w02 = w_base[2];
                    const T w10 = w_base[3], w11 = w_base[4], w12 = w_base[5];
                    const T w20 = w_base[6], w21 = w_base[7], w22 = w_base[8];
                    for (int y = 1; y < oh - 1; ++y) {
                        T* orow = out_c + static_cast<std::size_t>(y) * ow;
                        const T* r0 = in_c + static_cast<std::size_t>(y - 1) * w;
                        const T* r1 = r0 + w;
                        const T* r2 = r1 + w;
                        orow[0] += w01 * r0[0] + w02 * r0[1] + w11 * r1[0] + w12 * r1[1] +
                                   w21 * r2[0] + w22 * r2[1];
                        for (int x = 1; x < ow - 1; ++x)
                            orow[x] += w00 * r0[x - 1] + w01 * r0[x] + w02 * r0[x + 1] +
                                       w10 * r1[x - 1] + w11 * r1[x] + w12 * r1[x + 1] +
                                       w20 * r2[x - 1] + w21 * r2[x] + w22 * r2[x + 1];
                        orow[ow - 1] += w00 * r0[ow - 2] + w01 * r0[ow - 1] + w10 * r1[ow - 2] +
                                        w11 * r1[ow - 1] + w20 * r2[ow - 2] + w21 * r2[ow - 1];
                    }
                    // top and bottom rows: the out-of-image tap row drops out
                    for (int y : {0, oh - 1}) {
                        T* orow = out_c + static_cast<std::size_t>(y) * ow;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = y + ky - 1;
                            if (sy < 0 || sy >= h) continue;
                            const T* irow = in_c + static_cast<std::size_t>(sy) * w;
                            const T t0 = w_base[ky * 3], t1 = w_base[ky * 3 + 1],
                                    t2 = w_base[ky * 3 + 2];
                            orow[0] += t1 * irow[0] + t2 * irow[1];
                            for (int x = 1; x < ow - 1; ++x)
                                orow[x] += t0 * irow[x - 1] + t1 * irow[x] + t2 * irow[x + 1];
                            orow[ow - 1] += t0 * irow[ow - 2] + t1 * irow[ow - 1];
                        }
                    }
                    continue;
                }
                for (int ky = 0; ky < k; ++ky) {
                    const int y_lo = std::max(0, pad - ky);
                    const int y_hi = std::min(oh, h + pad - ky);
                    for (int kx = 0; kx < k; ++kx) {
                        const T wv = w_base[ky * k + kx];
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(ow, w + pad - kx);
                        for (int y = y_lo; y < y_hi; ++y) {
                            T* orow = out_c + static_cast<std::size_t>(y) * ow;
                            const T* irow =
                                in_c + static_cast<std::size_t>(y + ky - pad) * w + (kx - pad);
                            for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * irow[x];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward(const T* in, int n, int ci, int h, int w, const T* weight, int co, int k,
                     int pad, const T* grad_out, T* grad_in, T* grad_weight, T* grad_bias) {
    const int oh = h + 2 * pad - k + 1;
    const int ow = w + 2 * pad - k + 1;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

    // dot-product fast path mirroring the forward; callers hand in
    // zero-initialized gradient buffers, so overwrite semantics are fine
    if (pad == 0 && oh == 1 && ow == 1 && k == h && k == w) {
        const int features = static_cast<int>(ci * in_plane);
        fc_backward(in, n, features, weight, co, grad_out, grad_in, grad_weight, grad_bias);
        return;
    }
    for (int b = 0; b < n; ++b) {
        const T* in_b = in + static_cast<std::size_t>(b) * ci * in_plane;
        const T* go_b = grad_out + static_cast<std::size_t>(b) * co * out_plane;
        T* gi_b = grad_in ? grad_in + static_cast<std::size_t>(b) * ci * in_plane : nullptr;
        for (int oc = 0; oc < co; ++oc) {
            const T* go_c = go_b + static_cast<std::size_t>(oc) * out_plane;
            T gb = T(0);
#pragma omp simd reduction(+ : gb)
            for (std::size_t i = 0; i < out_plane; ++i) gb += go_c[i];
            grad_bias[oc] += gb;
            for (int ic = 0; ic < ci; ++ic) {
                const T* in_c = in_b + static_cast<std::size_t>(ic) * in_plane;
                T* gi_c = gi_b ? gi_b + static_cast<std::size_t>(ic) * in_plane : nullptr;
                const T* w_base = weight + ((static_cast<std::size_t>(oc) * ci + ic) * k) * k;
                T* gw_base = grad_weight + ((static_cast<std::size_t>(oc) * ci + ic) * k) * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int y_lo = std::max(0, pad - ky);
                    const int y_hi = std::min(oh, h + pad - ky);
                    for (int kx = 0; kx < k; ++kx) {
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(ow, w + pad - kx);
                        T gw = T(0);
                        const T wv = w_base[ky * k + kx];
                        for (int y = y_lo; y < y_hi; ++y) {
                            const T* gorow = go_c + static_cast<std::size_t>(y) * ow;
                            const T* irow =
                                in_c + static_cast<std::size_t>(y + ky - pad) * w + (kx - pad);
                            T* girow = gi_c ? gi_c + static_cast<std::size_t>(y + ky - pad) * w +
                                                  (kx - pad)
                                            : nullptr;
                            T acc = T(0);
                            if (girow) {
#pragma omp simd reduction(+ : acc)
                                for (int x = x_lo; x < x_hi; ++x) {
                                    acc += gorow[x] * irow[x];
                                    girow[x] += wv * gorow[x];
                                }
                            } else {
#pragma omp simd reduction(+ : acc)
                                for (int x = x_lo; x < x_hi; ++x) acc += gorow[x] * irow[x];
                            }
                            gw += acc;
                        }
                        gw_base[ky * k + kx] += gw;
                    }
                }
            }
        }
    }
}

template <typename T>
void relu_forward(const T* in, std::size_t count, T* out) {
    for (std::size_t i = 0; i < count; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward(const T* in, const T* grad_out, std::size_t count, T* grad_in) {
    for (std::size_t i = 0; i < count; ++i) grad_in[i] = in[i] > T(0) ? grad_out[i] : T(0);
}

template <typename T>
void maxpool2_forward(const T* in, int n, int c, int h, int w, T* out, std::int32_t* argmax) {
    const int oh = h / 2, ow = w / 2;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const T* src = in + (static_cast<std::size_t>(b) * c + ch) * in_plane;
            T* dst = out + (static_cast<std::size_t>(b) * c + ch) * out_plane;
            std::int32_t* am = argmax + (static_cast<std::size_t>(b) * c + ch) * out_plane;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    const std::size_t i00 = static_cast<std::size_t>(2 * y) * w + 2 * x;
                    const std::size_t cand[4] = {i00, i00 + 1, i00 + w, i00 + w + 1};
                    std::size_t best = cand[0];
                    for (int k = 1; k < 4; ++k)
                        if (src[cand[k]] > src[best]) best = cand[k];
                    dst[static_cast<std::size_t>(y) * ow + x] = src[best];
                    am[static_cast<std::size_t>(y) * ow + x] = static_cast<std::int32_t>(best);
                }
            }
        }
    }
}

template <typename T>
void maxpool2_backward_planes(const std::int32_t* argmax, const T* grad_out, int planes,
                              std::size_t out_plane, std::size_t in_plane, T* grad_in) {
    std::fill(grad_in, grad_in + static_cast<std::size_t>(planes) * in_plane, T(0));
    for (int p = 0; p < planes; ++p) {
        const std::int32_t* am = argmax + static_cast<std::size_t>(p) * out_plane;
        const T* go = grad_out + static_cast<std::size_t>(p) * out_plane;
        T* gi = grad_in + static_cast<std::size_t>(p) * in_plane;
        for (std::size_t i = 0; i < out_plane; ++i) gi[am[i]] += go[i];
    }
}

template <typename T>
void fc_forward(const T* in, int n, int in_features, const T* weight, const T* bias,
                int out_features, T* out) {
    for (int b = 0; b < n; ++b) {
        const T* x = in + static_cast<std::size_t>(b) * in_features;
        T* y = out + static_cast<std::size_t>(b) * out_features;
        for (int o = 0; o < out_features; ++o) {
            const T* wr = weight + static_cast<std::size_t>(o) * in_features;
            T acc = bias[o];
#pragma omp simd reduction(+ : acc)
            for (int i = 0; i < in_features; ++i) acc += wr[i] * x[i];
            y[o] = acc;
        }
    }
}

template <typename T>
void fc_backward(const T* in, int n, int in_features, const T* weight, int out_features,
                 const T* grad_out, T* grad_in, T* grad_weight, T* grad_bias) {
    for (int b = 0; b < n; ++b) {
        const T* x = in + static_cast<std::size_t>(b) * in_features;
        const T* go = grad_out + static_cast<std::size_t>(b) * out_features;
        T* gi = grad_in ? grad_in + static_cast<std::size_t>(b) * in_features : nullptr;
        if (gi) std::fill(gi, gi + in_features, T(0));
        for (int o = 0; o < out_features; ++o) {
            const T g = go[o];
            grad_bias[o] += g;
            const T* wr = weight + static_cast<std::size_t>(o) * in_features;
            T* gw = grad_weight + static_cast<std::size_t>(o) * in_features;
            for (int i = 0; i < in_features; ++i) gw[i] += g * x[i];
            if (gi)
                for (int i = 0; i < in_features; ++i) gi[i] += g * wr[i];
        }
    }
}

template <typename T>
void dropout_forward(const T* in, std::size_t count, double rate, std::uint64_t seed, T* out,
                     std::uint8_t* mask) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double keep = 1.0 - rate;
    const T scale = static_cast<T>(1.0 / keep);
    for (std::size_t i = 0; i < count; ++i) {
        const bool on = u01(rng) < keep;
        mask[i] = on ? 1 : 0;
        out[i] = on ? in[i] * scale : T(0);
    }
}

template <typename T>
void dropout_backward(const std::uint8_t* mask, const T* grad_out, std::size_t count, double rate,
                      T* grad_in) {
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < count; ++i) grad_in[i] = mask[i] ? grad_out[i] * scale : T(0);
}

template <typename T>
void softmax_forward(const T* in, int n, int classes, T* out) {
    for (int b = 0; b < n; ++b) {
        const T* x = in + static_cast<std::size_t>(b) * classes;
        T* y = out + static_cast<std::size_t>(b) * classes;
        T mx = x[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, x[c]);
        T sum = T(0);
        for (int c = 0; c < classes; ++c) {
            y[c] = std::exp(x[c] - mx);
            sum += y[c];
        }
        for (int c = 0; c < classes; ++c) y[c] /= sum;
    }
}

template <typename T>
void softmax_backward(const T* out, const T* grad_out, int n, int classes, T* grad_in) {
    for (int b = 0; b < n; ++b) {
        const T* p = out + static_cast<std::size_t>(b) * classes;
        const T* g = grad_out + static_cast<std::size_t>(b) * classes;
        T* gi = grad_in + static_cast<std::size_t>(b) * classes;
        T dot = T(0);
        for (int c = 0; c < classes; ++c) dot += g[c] * p[c];
        for (int c = 0; c < classes; ++c) gi[c] = p[c] * (g[c] - dot);
    }
}

#define FP_INSTANTIATE(T)                                                                        \
    template void conv2d_forward<T>(const T*, int, int, int, int, const T*, const T*, int, int, \
                                    int, T*);                                                    \
    template void conv2d_backward<T>(const T*, int, int, int, int, const T*, int, int, int,     \
                                     const T*, T*, T*, T*);                                      \
    template void relu_forward<T>(const T*, std::size_t, T*);                                    \
    template void relu_backward<T>(const T*, const T*, std::size_t, T*);                         \
    template void maxpool2_forward<T>(const T*, int, int, int, int, T*, std::int32_t*);          \
    template void maxpool2_backward_planes<T>(const std::int32_t*, const T*, int, std::size_t,   \
                                              std::size_t, T*);                                  \
    template void fc_forward<T>(const T*, int, int, const T*, const T*, int, T*);                \
    template void fc_backward<T>(const T*, int, int, const T*, int, const T*, T*, T*, T*);       \
    template void dropout_forward<T>(const T*, std::size_t, double, std::uint64_t, T*,           \
                                     std::uint8_t*);                                             \
    template void dropout_backward<T>(const std::uint8_t*, const T*, std::size_t, double, T*);   \
    template void softmax_forward<T>(const T*, int, int, T*);                                    \
    template void softmax_backward<T>(const T*, const T*, int, int, T*);

FP_INSTANTIATE(float)
FP_INSTANTIATE(double)
#undef FP_INSTANTIATE

}  // namespace fp::net
