#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <cstring>
#include <sstream>

#include "helpers.hpp"
#include "morph/errors.hpp"
#include "morph/fft.hpp"
#include "morph/jsonio.hpp"
#include "morph/kernels.hpp"
#include "morph/rng.hpp"
#include "morph/volume.hpp"

using namespace morph;

// ---------------------------------------------------------------------------
// kernels: every available backend against the scalar reference

namespace {

std::vector<const kern::Backend*> available_backends() {
    std::vector<const kern::Backend*> v;
    if (const auto* b = kern::avx2_backend()) v.push_back(b);
    if (const auto* b = kern::neon_backend()) v.push_back(b);
    v.push_back(&kern::active());
    return v;
}

} // namespace

TEST_CASE("simd backends match the scalar reference") {
    Rng rng(42);
    const std::size_t n = 1031; // odd length exercises the tail loops
    std::vector<double> a(n), b(n), w(n);
    std::vector<std::complex<double>> c(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        w[i] = rng.uniform(0.5, 2.0);
        c[i] = {rng.normal(), rng.normal()};
    }
    const auto& s = kern::scalar_backend();

    for (const auto* backend : available_backends()) {
        CAPTURE(backend->name);
        CHECK(backend->dot(a.data(), b.data(), n) ==
              doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-13));
        CHECK(backend->sumsq(a.data(), n) ==
              doctest::Approx(s.sumsq(a.data(), n)).epsilon(1e-13));
        CHECK(backend->wsumsq_cplx(c.data(), w.data(), n) ==
              doctest::Approx(s.wsumsq_cplx(c.data(), w.data(), n)).epsilon(1e-13));

        // axpy and cmul_real accumulate in the same order: bit-identical
        std::vector<double> y1(b), y2(b);
        s.axpy(0.37, a.data(), y1.data(), n);
        backend->axpy(0.37, a.data(), y2.data(), n);
        CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(double)) == 0);

        std::vector<std::complex<double>> c1(c), c2(c);
        s.cmul_real(c1.data(), w.data(), n);
        backend->cmul_real(c2.data(), w.data(), n);
        CHECK(std::memcmp(c1.data(), c2.data(), n * sizeof(std::complex<double>)) == 0);

        const int r = 4;
        std::vector<double> taps(2 * r + 1);
        for (auto& t : taps) t = rng.uniform(0.0, 1.0);
        std::vector<double> padded(n + 2 * r);
        for (auto& p : padded) p = rng.normal();
        std::vector<double> o1(n), o2(n);
        s.conv1d(padded.data(), o1.data(), n, taps.data(), r);
        backend->conv1d(padded.data(), o2.data(), n, taps.data(), r);
        CHECK(std::memcmp(o1.data(), o2.data(), n * sizeof(double)) == 0);
    }
}

// ---------------------------------------------------------------------------
// fft

TEST_CASE("fft matches a direct DFT and round-trips") {
    Rng rng(7);
    for (std::size_t n : {1u, 2u, 8u, 12u, 7u, 112u}) {
        fft::Plan plan(n);
        std::vector<fft::cplx> x(n);
        for (auto& v : x) v = {rng.normal(), rng.normal()};

        std::vector<fft::cplx> ref(n, fft::cplx(0, 0));
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) {
                const double a = -2.0 * 3.14159265358979323846 * double(k * j) / double(n);
                ref[k] += x[j] * fft::cplx(std::cos(a), std::sin(a));
            }

        std::vector<fft::cplx> y(x);
        plan.forward(y.data());
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(y[k].real() == doctest::Approx(ref[k].real()).epsilon(1e-9).scale(1.0));
            CHECK(y[k].imag() == doctest::Approx(ref[k].imag()).epsilon(1e-9).scale(1.0));
        }
        plan.inverse(y.data());
        for (std::size_t k = 0; k < n; ++k)
            CHECK(std::abs(y[k] - x[k]) < 1e-10);
    }
}

TEST_CASE("3d fft round-trips on a mixed-radix grid") {
    Rng rng(11);
    fft::Plan3D plan({4, 6, 5});
    std::vector<fft::cplx> x(4 * 6 * 5);
    for (auto& v : x) v = {rng.normal(), 0.0};
    auto y = x;
    plan.forward(y.data());
    plan.inverse(y.data());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-12);
}

// ---------------------------------------------------------------------------
// volume: flood fill

TEST_CASE("fill_interior fills a hollow cube shell") {
    Volume3D shell({9, 9, 9}, {1, 1, 1});
    // hollow 5^3 shell centered in the grid: indices 2..6
    for (std::uint32_t z = 2; z <= 6; ++z)
        for (std::uint32_t y = 2; y <= 6; ++y)
            for (std::uint32_t x = 2; x <= 6; ++x) {
                const bool surface = x == 2 || x == 6 || y == 2 || y == 6 || z == 2 || z == 6;
                if (surface) shell.at(x, y, z) = 1.0f;
            }
    const Volume3D solid = fill_interior(shell);
    std::size_t ones = 0;
    for (float v : solid.data) ones += (v == 1.0f);
    CHECK(ones == 125);
    // idempotent
    const Volume3D again = fill_interior(solid);
    CHECK(again.data == solid.data);
}

TEST_CASE("fill_interior leaves a solid blob unchanged") {
    Volume3D blob({9, 9, 9}, {1, 1, 1});
    for (std::uint32_t z = 2; z <= 6; ++z)
        for (std::uint32_t y = 2; y <= 6; ++y)
            for (std::uint32_t x = 2; x <= 6; ++x) blob.at(x, y, z) = 1.0f;
    const Volume3D out = fill_interior(blob);
    CHECK(out.data == blob.data);
}

TEST_CASE("fill_interior matches an independent BFS oracle on a sphere shell") {
    const std::array<std::uint32_t, 3> dims{16, 16, 16};
    Volume3D shell(dims, {1, 1, 1});
    const double r = 6.0;
    for (std::uint32_t z = 0; z < 16; ++z)
        for (std::uint32_t y = 0; y < 16; ++y)
            for (std::uint32_t x = 0; x < 16; ++x) {
                const double d = std::sqrt((x - 7.5) * (x - 7.5) + (y - 7.5) * (y - 7.5) +
                                           (z - 7.5) * (z - 7.5));
                if (std::fabs(d - r) <= 0.5) shell.at(x, y, z) = 1.0f;
            }

    // oracle: queue BFS over the exterior from every boundary voxel
    std::vector<std::uint8_t> ext(shell.voxels(), 0);
    std::vector<std::size_t> queue;
    auto try_push = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
        const std::size_t i = shell.index(x, y, z);
        if (!ext[i] && shell.data[i] == 0.0f) {
            ext[i] = 1;
            queue.push_back(i);
        }
    };
    for (std::uint32_t z = 0; z < 16; ++z)
        for (std::uint32_t y = 0; y < 16; ++y)
            for (std::uint32_t x = 0; x < 16; ++x)
                if (x == 0 || y == 0 || z == 0 || x == 15 || y == 15 || z == 15)
                    try_push(x, y, z);
    for (std::size_t q = 0; q < queue.size(); ++q) {
        const std::size_t i = queue[q];
        const std::uint32_t x = i % 16, y = (i / 16) % 16, z = i / 256;
        if (x > 0) try_push(x - 1, y, z);
        if (x < 15) try_push(x + 1, y, z);
        if (y > 0) try_push(x, y - 1, z);
        if (y < 15) try_push(x, y + 1, z);
        if (z > 0) try_push(x, y, z - 1);
        if (z < 15) try_push(x, y, z + 1);
    }
    std::size_t expected_ones = 0;
    for (std::uint8_t e : ext) expected_ones += (e == 0);

    const Volume3D solid = fill_interior(shell);
    std::size_t ones = 0;
    for (float v : solid.data) ones += (v == 1.0f);
    CHECK(ones == expected_ones);
}

TEST_CASE("fill_interior error paths") {
    Volume3D nonbinary({4, 4, 4}, {1, 1, 1});
    nonbinary.at(1, 1, 1) = 0.5f;
    CHECK_THROWS_AS(fill_interior(nonbinary), InvalidVolume);

    Volume3D touching({4, 4, 4}, {1, 1, 1});
    touching.at(0, 2, 2) = 1.0f;
    CHECK_THROWS_AS(fill_interior(touching), OpenShell);
}

// ---------------------------------------------------------------------------
// volume: gaussian smoothing

TEST_CASE("gaussian_smooth preserves constants") {
    Volume3D v({6, 5, 4}, {1, 1, 1}, 1.0f);
    const Volume3D s = gaussian_smooth(v, 9, 1.0);
    for (float f : s.data) CHECK(f == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("gaussian_smooth of an impulse equals the product kernel") {
    Volume3D v({9, 9, 9}, {1, 1, 1});
    v.at(4, 4, 4) = 1.0f;
    const Volume3D s = gaussian_smooth(v, 9, 1.0);

    // normalized 1D taps
    double taps[9], sum = 0.0;
    for (int i = -4; i <= 4; ++i) {
        taps[i + 4] = std::exp(-0.5 * i * i);
        sum += taps[i + 4];
    }
    for (double& t : taps) t /= sum;

    for (std::uint32_t z = 0; z < 9; ++z)
        for (std::uint32_t y = 0; y < 9; ++y)
            for (std::uint32_t x = 0; x < 9; ++x) {
                const double expect = taps[x] * taps[y] * taps[z];
                CHECK(double(s.at(x, y, z)) == doctest::Approx(expect).epsilon(1e-5));
            }
}

TEST_CASE("gaussian_smooth agrees with a brute-force 3d convolution") {
    const std::array<std::uint32_t, 3> dims{12, 12, 12};
    Volume3D shell(dims, {1, 1, 1});
    for (std::uint32_t z = 3; z <= 8; ++z)
        for (std::uint32_t y = 3; y <= 8; ++y)
            for (std::uint32_t x = 3; x <= 8; ++x)
                if (x == 3 || x == 8 || y == 3 || y == 8 || z == 3 || z == 8)
                    shell.at(x, y, z) = 1.0f;

    const int w = 5, r = w / 2;
    const double sigma = 1.0;
    const Volume3D s = gaussian_smooth(shell, w, sigma);

    std::vector<double> taps(w);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        taps[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += taps[i + r];
    }
    for (double& t : taps) t /= sum;

    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    double mass_direct = 0.0, mass_sep = 0.0, mass_in = 0.0;
    for (std::uint32_t z = 0; z < 12; ++z)
        for (std::uint32_t y = 0; y < 12; ++y)
            for (std::uint32_t x = 0; x < 12; ++x) {
                double acc = 0.0;
                for (int dz = -r; dz <= r; ++dz)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            const int sx = clampi(int(x) - dx, 11);
                            const int sy = clampi(int(y) - dy, 11);
                            const int sz = clampi(int(z) - dz, 11);
                            acc += taps[dx + r] * taps[dy + r] * taps[dz + r] *
                                   double(shell.at(sx, sy, sz));
                        }
                CHECK(double(s.at(x, y, z)) == doctest::Approx(acc).epsilon(2e-5).scale(1.0));
                CHECK(s.at(x, y, z) <= 1.0f + 1e-6f);
                CHECK(s.at(x, y, z) >= -1e-6f);
                mass_direct += acc;
                mass_sep += double(s.at(x, y, z));
                mass_in += double(shell.at(x, y, z));
            }
    CHECK(std::fabs(mass_sep - mass_direct) / mass_in < 0.005);
    CHECK(std::fabs(mass_sep - mass_in) / mass_in < 0.005);
}

TEST_CASE("gaussian_smooth rejects even windows") {
    Volume3D v({4, 4, 4}, {1, 1, 1}, 1.0f);
    CHECK_THROWS_AS(gaussian_smooth(v, 8, 1.0), InvalidParameter);
}

// ---------------------------------------------------------------------------
// volume: resample

TEST_CASE("resample identity and constants") {
    const Volume3D v = testutil::random_volume({5, 4, 3}, 3);
    const Volume3D id = resample(v, {1, 1, 1}, ResampleMode::trilinear);
    CHECK(id.data == v.data);

    Volume3D c({4, 4, 4}, {1, 1, 1}, 0.25f);
    const Volume3D up = resample(c, {2, 2, 2}, ResampleMode::trilinear);
    CHECK(up.dims == std::array<std::uint32_t, 3>{8, 8, 8});
    CHECK(up.spacing[0] == doctest::Approx(0.5));
    for (float f : up.data) CHECK(f == doctest::Approx(0.25f));
}

TEST_CASE("resample of a linear ramp matches the analytic values") {
    Volume3D v({8, 4, 4}, {1, 1, 1});
    for (std::uint32_t z = 0; z < 4; ++z)
        for (std::uint32_t y = 0; y < 4; ++y)
            for (std::uint32_t x = 0; x < 8; ++x) v.at(x, y, z) = float(x);
    const Volume3D up = resample(v, {2, 1, 1}, ResampleMode::trilinear);
    for (std::uint32_t x = 0; x < 16; ++x) {
        const double coord = std::min(double(x) / 2.0, 7.0); // clamp-to-edge contract
        CHECK(double(up.at(x, 1, 1)) == doctest::Approx(coord).epsilon(1e-6));
    }
}

TEST_CASE("resample round-trips binary volumes with nearest mode") {
    Volume3D v({6, 6, 6}, {1, 1, 1});
    Rng rng(9);
    for (auto& f : v.data) f = rng.uniform() < 0.5 ? 0.0f : 1.0f;
    const Volume3D up = resample(v, {2, 2, 2}, ResampleMode::nearest);
    const Volume3D back = resample(up, {0.5, 0.5, 0.5}, ResampleMode::nearest);
    CHECK(back.data == v.data);
}

TEST_CASE("resample rejects non-integer output dims") {
    Volume3D v({5, 5, 5}, {1, 1, 1}, 1.0f);
    CHECK_THROWS_AS(resample(v, {1.5, 1.0, 1.0}, ResampleMode::nearest), InvalidParameter);
}

// ---------------------------------------------------------------------------
// MVOL1 container

TEST_CASE("mvol writes the exact documented byte layout") {
    Volume3D v({2, 1, 1}, {0.5, 1.0, 2.0});
    v.data = {1.0f, -2.5f};
    std::ostringstream os(std::ios::binary);
    write_mvol(v, os);
    const std::string bytes = os.str();
    REQUIRE(bytes.size() == 5 + 12 + 24 + 8);
    CHECK(bytes.compare(0, 5, "MVOL1") == 0);
    std::uint32_t nx;
    std::memcpy(&nx, bytes.data() + 5, 4);
    CHECK(nx == 2);
    double sx;
    std::memcpy(&sx, bytes.data() + 17, 8);
    CHECK(sx == 0.5);
    float f0;
    std::memcpy(&f0, bytes.data() + 41, 4);
    CHECK(f0 == 1.0f);

    std::istringstream is(bytes, std::ios::binary);
    const Volume3D rt = read_mvol(is);
    CHECK(rt.dims == v.dims);
    CHECK(rt.spacing == v.spacing);
    CHECK(rt.data == v.data);
}

TEST_CASE("mvol reports bad magic with the offset") {
    std::string bytes = "XVOL1junkjunkjunk";
    std::istringstream is(bytes, std::ios::binary);
    try {
        read_mvol(is, "bad.mvol");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// json writer

TEST_CASE("json writer is ordered and prints 17 significant digits") {
    json::Value o = json::Value::object();
    o["b"] = json::num(0.1);
    o["a"] = json::integer(42);
    o["nested"] = json::Value::array();
    o["nested"].push_back(json::str("x\"y"));
    o["nan"] = json::num(std::nan(""));
    const std::string s = o.dump();
    CHECK(s == "{\"b\":0.10000000000000001,\"a\":42,\"nested\":[\"x\\\"y\"],\"nan\":null}");
}
