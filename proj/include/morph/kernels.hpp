#pragma once

#include <complex>
#include <cstddef>

namespace morph::kern {

/// Data-parallel inner loops used by the volume and registration code.
/// Scalar reference implementations always exist; an AVX2 (x86-64) or NEON
/// (aarch64) variant is selected once at startup when the CPU supports it.
/// The environment variable MORPHKIT_SIMD=scalar|avx2|neon forces a backend.
///
/// axpy, cmul_real and conv1d accumulate per output element in the same
/// order in every backend and are bit-identical across them; the reductions
/// (dot, sumsq, wsumsq_cplx) use lane-parallel partial sums and agree with
/// the scalar path to roundoff.
struct Backend {
    const char* name;

    /// sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// sum_i a[i]^2
    double (*sumsq)(const double* a, std::size_t n);
    /// sum_i w[i]*|a[i]|^2 over complex a
    double (*wsumsq_cplx)(const std::complex<double>* a, const double* w, std::size_t n);
    /// y[i] += alpha*x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// a[i] *= m[i] for complex a, real m
    void (*cmul_real)(std::complex<double>* a, const double* m, std::size_t n);
    /// out[i] = sum_{j=0..2r} taps[j]*padded[i+j]; padded has n+2r samples
    void (*conv1d)(const double* padded, double* out, std::size_t n,
                   const double* taps, int radius);
};

const Backend& scalar_backend();

/// Non-null only when compiled for x86-64 and the CPU reports AVX2.
const Backend* avx2_backend();

/// Non-null only when compiled for aarch64.
const Backend* neon_backend();

/// Backend chosen at first use (honours MORPHKIT_SIMD).
const Backend& active();

} // namespace morph::kern
