#include "morph/kernels.hpp"

namespace morph::kern {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sumsq_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

double wsumsq_cplx_scalar(const std::complex<double>* a, const double* w, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double re = a[i].real();
        const double im = a[i].imag();
        s += w[i] * (re * re + im * im);
    }
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void cmul_real_scalar(std::complex<double>* a, const double* m, std::size_t n) {
    auto* d = reinterpret_cast<double*>(a);
    for (std::size_t i = 0; i < n; ++i) {
        d[2 * i] *= m[i];
        d[2 * i + 1] *= m[i];
    }
}

void conv1d_scalar(const double* padded, double* out, std::size_t n,
                   const double* taps, int radius) {
    const int width = 2 * radius + 1;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < width; ++j) s += taps[j] * padded[i + std::size_t(j)];
        out[i] = s;
    }
}

} // namespace

const Backend& scalar_backend() {
    static const Backend b = {
        "scalar",     dot_scalar,       sumsq_scalar, wsumsq_cplx_scalar,
        axpy_scalar,  cmul_real_scalar, conv1d_scalar,
    };
    return b;
}

} // namespace morph::kern
