#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace morph::fft {

using cplx = std::complex<double>;

/// One-dimensional DFT plan. Power-of-two lengths run an iterative radix-2
/// Cooley-Tukey; every other length goes through Bluestein's chirp-z
/// convolution (so 112 = 16*7 grid axes work unchanged).
/// forward() is unnormalized, inverse() divides by n; inverse(forward(x)) == x.
class Plan {
public:
    explicit Plan(std::size_t n);

    std::size_t size() const { return n_; }
    void forward(cplx* a) const;
    void inverse(cplx* a) const;

private:
    void radix2(cplx* a, bool inv) const;
    void bluestein(cplx* a, bool inv) const;

    std::size_t n_ = 0;
    bool pow2_ = false;
    // radix-2 tables
    std::vector<std::uint32_t> rev_;
    std::vector<cplx> tw_; // exp(-2*pi*i*k/n), k < n/2
    // bluestein tables
    std::vector<cplx> chirp_;      // exp(-i*pi*k^2/n)
    std::vector<cplx> chirp_fft_;  // FFT of the padded conjugate chirp
    std::shared_ptr<Plan> inner_;  // power-of-two convolution plan
};

/// In-place 3D DFT over x-fastest data; plans are cached per axis length.
class Plan3D {
public:
    explicit Plan3D(std::array<std::uint32_t, 3> dims);

    void forward(cplx* a) const;
    void inverse(cplx* a) const;
    std::size_t voxels() const { return std::size_t(dims_[0]) * dims_[1] * dims_[2]; }

private:
    void apply(cplx* a, bool inv) const;

    std::array<std::uint32_t, 3> dims_;
    std::shared_ptr<Plan> px_, py_, pz_;
};

} // namespace morph::fft
