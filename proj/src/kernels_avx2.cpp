// AVX2 variants of the inner-loop kernels. This translation unit is the only
// one compiled with -mavx2; callers reach it through the dispatch table after
// a runtime CPU check.

#include "morph/kernels.hpp"

#include <immintrin.h>

namespace morph::kern {

namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        __m256d vb = _mm256_loadu_pd(b + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d va = _mm256_loadu_pd(a + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, va));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * a[i];
    return s;
}

double wsumsq_cplx_avx2(const std::complex<double>* a, const double* w, std::size_t n) {
    const auto* d = reinterpret_cast<const double*>(a);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d va = _mm256_loadu_pd(d + 2 * i); // re0 im0 re1 im1
        __m256d vw = _mm256_set_pd(w[i + 1], w[i + 1], w[i], w[i]);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(vw, _mm256_mul_pd(va, va)));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double re = d[2 * i];
        const double im = d[2 * i + 1];
        s += w[i] * (re * re + im * im);
    }
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void cmul_real_avx2(std::complex<double>* a, const double* m, std::size_t n) {
    auto* d = reinterpret_cast<double*>(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d va = _mm256_loadu_pd(d + 2 * i);
        __m256d vm = _mm256_set_pd(m[i + 1], m[i + 1], m[i], m[i]);
        _mm256_storeu_pd(d + 2 * i, _mm256_mul_pd(va, vm));
    }
    for (; i < n; ++i) {
        d[2 * i] *= m[i];
        d[2 * i + 1] *= m[i];
    }
}

// Tap loop kept outermost-inner so every output element accumulates in the
// same order as the scalar kernel (mul+add, no FMA): results are bit-equal.
void conv1d_avx2(const double* padded, double* out, std::size_t n,
                 const double* taps, int radius) {
    const int width = 2 * radius + 1;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (int j = 0; j < width; ++j) {
            __m256d vt = _mm256_set1_pd(taps[j]);
            __m256d vp = _mm256_loadu_pd(padded + i + std::size_t(j));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(vt, vp));
        }
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < width; ++j) s += taps[j] * padded[i + std::size_t(j)];
        out[i] = s;
    }
}

} // namespace

const Backend* avx2_backend() {
#if defined(__GNUC__) || defined(__clang__)
    if (!__builtin_cpu_supports("avx2")) return nullptr;
#endif
    static const Backend b = {
        "avx2",     dot_avx2,       sumsq_avx2, wsumsq_cplx_avx2,
        axpy_avx2,  cmul_real_avx2, conv1d_avx2,
    };
    return &b;
}

} // namespace morph::kern
