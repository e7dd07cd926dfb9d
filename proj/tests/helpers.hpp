#pragma once

#include <cmath>
#include <vector>

#include "morph/lddmm.hpp"
#include "morph/rng.hpp"
#include "morph/volume.hpp"

namespace testutil {

inline morph::Volume3D random_volume(std::array<std::uint32_t, 3> dims, std::uint64_t seed,
                                     double lo = 0.0, double hi = 1.0) {
    morph::Rng rng(seed);
    morph::Volume3D v(dims, {1.0, 1.0, 1.0});
    for (auto& f : v.data) f = float(rng.uniform(lo, hi));
    return v;
}

/// Smooth periodic random scalar: a handful of joint low-frequency modes
/// (|k_d| <= 1 per axis, mixed-axis products included) with unit-normalized
/// amplitude budget.
inline std::vector<double> smooth_periodic_scalar(std::array<std::uint32_t, 3> dims,
                                                  morph::Rng& rng, double amplitude) {
    std::vector<double> out(std::size_t(dims[0]) * dims[1] * dims[2], 0.0);
    const double tau = 6.283185307179586;
    const int n_modes = 4;
    struct Mode {
        int kx, ky, kz;
        double a, phase;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < n_modes; ++m) {
        Mode mode{};
        do {
            mode.kx = int(rng.below(3)) - 1;
            mode.ky = int(rng.below(3)) - 1;
            mode.kz = int(rng.below(3)) - 1;
        } while (mode.kx == 0 && mode.ky == 0 && mode.kz == 0);
        mode.a = rng.uniform(0.3, 1.0) * amplitude / double(n_modes);
        mode.phase = rng.uniform(0.0, tau);
        modes.push_back(mode);
    }
    std::size_t i = 0;
    for (std::uint32_t z = 0; z < dims[2]; ++z)
        for (std::uint32_t y = 0; y < dims[1]; ++y)
            for (std::uint32_t x = 0; x < dims[0]; ++x, ++i) {
                double s = 0.0;
                for (const auto& m : modes) {
                    const double arg = tau * (m.kx * double(x) / dims[0] +
                                              m.ky * double(y) / dims[1] +
                                              m.kz * double(z) / dims[2]) +
                                       m.phase;
                    s += m.a * std::cos(arg);
                }
                out[i] = s;
            }
    return out;
}

/// Smooth periodic random vector field built from joint low-frequency modes.
inline morph::lddmm::Field3 smooth_field(std::array<std::uint32_t, 3> dims,
                                         std::uint64_t seed, double amplitude) {
    morph::Rng rng(seed);
    morph::lddmm::Field3 f(dims, {1.0, 1.0, 1.0});
    for (int c = 0; c < 3; ++c) f.comp(c) = smooth_periodic_scalar(dims, rng, amplitude);
    return f;
}

/// Smooth periodic random image with values around [0, 1].
inline morph::Volume3D smooth_image(std::array<std::uint32_t, 3> dims, std::uint64_t seed) {
    morph::Rng rng(seed);
    const auto s = smooth_periodic_scalar(dims, rng, 0.8);
    morph::Volume3D v(dims, {1.0, 1.0, 1.0});
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(0.5 + s[i]);
    return v;
}

/// Binary ball of the given radius (voxels) centered at `center`.
inline morph::Volume3D ball_volume(std::array<std::uint32_t, 3> dims,
                                   std::array<double, 3> center, double radius) {
    morph::Volume3D v(dims, {1.0, 1.0, 1.0});
    for (std::uint32_t z = 0; z < dims[2]; ++z)
        for (std::uint32_t y = 0; y < dims[1]; ++y)
            for (std::uint32_t x = 0; x < dims[0]; ++x) {
                const double dx = x - center[0], dy = y - center[1], dz = z - center[2];
                if (dx * dx + dy * dy + dz * dz <= radius * radius)
                    v.at(x, y, z) = 1.0f;
            }
    return v;
}

/// Dice overlap of the half-max level sets of two volumes.
inline double dice_half_max(const morph::Volume3D& a, const morph::Volume3D& b) {
    float amax = 0.0f, bmax = 0.0f;
    for (float v : a.data) amax = std::max(amax, v);
    for (float v : b.data) bmax = std::max(bmax, v);
    std::size_t na = 0, nb = 0, nab = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool ia = a.data[i] >= 0.5f * amax;
        const bool ib = b.data[i] >= 0.5f * bmax;
        na += ia;
        nb += ib;
        nab += (ia && ib);
    }
    return 2.0 * double(nab) / double(na + nb);
}

} // namespace testutil
