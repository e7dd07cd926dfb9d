// NEON variants of the inner-loop kernels (aarch64 only; NEON is baseline
// there, so no runtime feature check is needed).

#include "morph/kernels.hpp"

#include <arm_neon.h>

namespace morph::kern {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq_neon(const double* a, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t va = vld1q_f64(a + i);
        acc = vaddq_f64(acc, vmulq_f64(va, va));
    }
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) s += a[i] * a[i];
    return s;
}

double wsumsq_cplx_neon(const std::complex<double>* a, const double* w, std::size_t n) {
    const auto* d = reinterpret_cast<const double*>(a);
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i < n; ++i) {
        float64x2_t va = vld1q_f64(d + 2 * i);
        float64x2_t vw = vdupq_n_f64(w[i]);
        acc = vaddq_f64(acc, vmulq_f64(vw, vmulq_f64(va, va)));
    }
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vy = vld1q_f64(y + i);
        vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i))));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void cmul_real_neon(std::complex<double>* a, const double* m, std::size_t n) {
    auto* d = reinterpret_cast<double*>(a);
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t va = vld1q_f64(d + 2 * i);
        vst1q_f64(d + 2 * i, vmulq_f64(va, vdupq_n_f64(m[i])));
    }
}

void conv1d_neon(const double* padded, double* out, std::size_t n,
                 const double* taps, int radius) {
    const int width = 2 * radius + 1;
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (int j = 0; j < width; ++j) {
            float64x2_t vt = vdupq_n_f64(taps[j]);
            float64x2_t vp = vld1q_f64(padded + i + std::size_t(j));
            acc = vaddq_f64(acc, vmulq_f64(vt, vp));
        }
        vst1q_f64(out + i, acc);
    }
    for (; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < width; ++j) s += taps[j] * padded[i + std::size_t(j)];
        out[i] = s;
    }
}

} // namespace

const Backend* neon_backend() {
    static const Backend b = {
        "neon",     dot_neon,       sumsq_neon, wsumsq_cplx_neon,
        axpy_neon,  cmul_real_neon, conv1d_neon,
    };
    return &b;
}

} // namespace morph::kern
