#include "morph/fft.hpp"

#include <cmath>

namespace morph::fft {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace

Plan::Plan(std::size_t n) : n_(n), pow2_(is_pow2(n)) {
    if (n_ == 0) return;
    if (pow2_) {
        rev_.resize(n_);
        int levels = 0;
        while ((std::size_t(1) << levels) < n_) ++levels;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t r = 0;
            for (int b = 0; b < levels; ++b) r |= ((i >> b) & 1u) << (levels - 1 - b);
            rev_[i] = std::uint32_t(r);
        }
        tw_.resize(n_ / 2);
        for (std::size_t k = 0; k < n_ / 2; ++k) {
            const double a = -2.0 * kPi * double(k) / double(n_);
            tw_[k] = cplx(std::cos(a), std::sin(a));
        }
    } else {
        chirp_.resize(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            // k^2 mod 2n keeps the angle argument small for large k.
            const std::size_t k2 = (k * k) % (2 * n_);
            const double a = -kPi * double(k2) / double(n_);
            chirp_[k] = cplx(std::cos(a), std::sin(a));
        }
        const std::size_t m = next_pow2(2 * n_ + 1);
        inner_ = std::make_shared<Plan>(m);
        chirp_fft_.assign(m, cplx(0.0, 0.0));
        chirp_fft_[0] = std::conj(chirp_[0]);
        for (std::size_t k = 1; k < n_; ++k) {
            chirp_fft_[k] = std::conj(chirp_[k]);
            chirp_fft_[m - k] = std::conj(chirp_[k]);
        }
        inner_->forward(chirp_fft_.data());
    }
}

void Plan::forward(cplx* a) const {
    if (n_ <= 1) return;
    if (pow2_) {
        radix2(a, false);
    } else {
        bluestein(a, false);
    }
}

void Plan::inverse(cplx* a) const {
    if (n_ <= 1) return;
    if (pow2_) {
        radix2(a, true);
    } else {
        bluestein(a, true);
    }
    const double s = 1.0 / double(n_);
    for (std::size_t i = 0; i < n_; ++i) a[i] *= s;
}

void Plan::radix2(cplx* a, bool inv) const {
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j = rev_[i];
        if (j > i) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t step = n_ / len;
        for (std::size_t blk = 0; blk < n_; blk += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx w = tw_[k * step];
                if (inv) w = std::conj(w);
                const cplx u = a[blk + k];
                const cplx t = a[blk + k + len / 2] * w;
                a[blk + k] = u + t;
                a[blk + k + len / 2] = u - t;
            }
        }
    }
}

void Plan::bluestein(cplx* a, bool inv) const {
    const std::size_t m = inner_->size();
    std::vector<cplx> buf(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n_; ++k) {
        const cplx c = inv ? std::conj(chirp_[k]) : chirp_[k];
        buf[k] = a[k] * c;
    }
    inner_->forward(buf.data());
    if (inv) {
        for (std::size_t k = 0; k < m; ++k) buf[k] *= std::conj(chirp_fft_[k]);
    } else {
        for (std::size_t k = 0; k < m; ++k) buf[k] *= chirp_fft_[k];
    }
    inner_->inverse(buf.data());
    for (std::size_t k = 0; k < n_; ++k) {
        const cplx c = inv ? std::conj(chirp_[k]) : chirp_[k];
        a[k] = buf[k] * c;
    }
}

Plan3D::Plan3D(std::array<std::uint32_t, 3> dims) : dims_(dims) {
    px_ = std::make_shared<Plan>(dims_[0]);
    py_ = dims_[1] == dims_[0] ? px_ : std::make_shared<Plan>(dims_[1]);
    pz_ = dims_[2] == dims_[0] ? px_ : (dims_[2] == dims_[1] ? py_ : std::make_shared<Plan>(dims_[2]));
}

void Plan3D::forward(cplx* a) const { apply(a, false); }
void Plan3D::inverse(cplx* a) const { apply(a, true); }

void Plan3D::apply(cplx* a, bool inv) const {
    const std::size_t nx = dims_[0], ny = dims_[1], nz = dims_[2];
    // x lines are contiguous
    for (std::size_t zy = 0; zy < ny * nz; ++zy) {
        cplx* line = a + zy * nx;
        if (inv) {
            px_->inverse(line);
        } else {
            px_->forward(line);
        }
    }
    // y lines, stride nx
    std::vector<cplx> buf(std::max(ny, nz));
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t x = 0; x < nx; ++x) {
            cplx* base = a + x + z * nx * ny;
            for (std::size_t y = 0; y < ny; ++y) buf[y] = base[y * nx];
            if (inv) {
                py_->inverse(buf.data());
            } else {
                py_->forward(buf.data());
            }
            for (std::size_t y = 0; y < ny; ++y) base[y * nx] = buf[y];
        }
    }
    // z lines, stride nx*ny
    for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < nx; ++x) {
            cplx* base = a + x + y * nx;
            for (std::size_t z = 0; z < nz; ++z) buf[z] = base[z * nx * ny];
            if (inv) {
                pz_->inverse(buf.data());
            } else {
                pz_->forward(buf.data());
            }
            for (std::size_t z = 0; z < nz; ++z) base[z * nx * ny] = buf[z];
        }
    }
}

} // namespace morph::fft
