#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "morph/errors.hpp"
#include "morph/lddmm.hpp"
#include "morph/rng.hpp"

using namespace morph;
using namespace morph::lddmm;

namespace {

LddmmParams small_params(int timesteps = 5) {
    LddmmParams p;
    p.alpha = 0.05;
    p.gamma = 1.0;
    p.exponent = 2.0;
    p.sigma = 1.0;
    p.timesteps = timesteps;
    return p;
}

// 7-point periodic stencil application of B = gamma - alpha * Laplacian.
std::vector<double> stencil_B(const std::vector<double>& f,
                              std::array<std::uint32_t, 3> dims,
                              std::array<double, 3> sp, double alpha, double gamma) {
    const std::uint32_t nx = dims[0], ny = dims[1], nz = dims[2];
    std::vector<double> out(f.size());
    auto at = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
        return f[x + std::size_t(nx) * (y + std::size_t(ny) * z)];
    };
    for (std::uint32_t z = 0; z < nz; ++z)
        for (std::uint32_t y = 0; y < ny; ++y)
            for (std::uint32_t x = 0; x < nx; ++x) {
                const std::uint32_t xp = (x + 1) % nx, xm = (x + nx - 1) % nx;
                const std::uint32_t yp = (y + 1) % ny, ym = (y + ny - 1) % ny;
                const std::uint32_t zp = (z + 1) % nz, zm = (z + nz - 1) % nz;
                const double lap =
                    (at(xp, y, z) - 2.0 * at(x, y, z) + at(xm, y, z)) / (sp[0] * sp[0]) +
                    (at(x, yp, z) - 2.0 * at(x, y, z) + at(x, ym, z)) / (sp[1] * sp[1]) +
                    (at(x, y, zp) - 2.0 * at(x, y, z) + at(x, y, zm)) / (sp[2] * sp[2]);
                out[x + std::size_t(nx) * (y + std::size_t(ny) * z)] =
                    gamma * at(x, y, z) - alpha * lap;
            }
    return out;
}

// trilinear sample of an 8^3 component grid, clamped (test-local oracle copy)
double interp8(const std::vector<double>& g, double x, double y, double z) {
    const auto clampf = [](double vv, double hi) {
        return vv < 0.0 ? 0.0 : (vv > hi ? hi : vv);
    };
    const double xx = clampf(x, 7.0), yy = clampf(y, 7.0), zz = clampf(z, 7.0);
    const auto x0 = std::uint32_t(xx), y0 = std::uint32_t(yy), z0 = std::uint32_t(zz);
    const std::uint32_t x1 = std::min(x0 + 1u, 7u), y1 = std::min(y0 + 1u, 7u),
                        z1 = std::min(z0 + 1u, 7u);
    const double fx = xx - x0, fy = yy - y0, fz = zz - z0;
    auto at = [&](std::uint32_t i, std::uint32_t j, std::uint32_t k) {
        return g[i + 8 * (j + 8 * std::size_t(k))];
    };
    const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
    const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
    const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
    const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

std::array<double, 3> sample3(const Field3& m, double x, double y, double z) {
    return {interp8(m.x, x, y, z), interp8(m.y, x, y, z), interp8(m.z, x, y, z)};
}

} // namespace

TEST_CASE("apply_K is linear and has constants as eigenvectors") {
    const auto params = small_params();
    Field3 zero({8, 8, 8}, {1, 1, 1});
    const Field3 kz = apply_K(zero, params);
    for (int c = 0; c < 3; ++c)
        for (double v : kz.comp(c)) CHECK(v == doctest::Approx(0.0).scale(1.0));

    Field3 constant({8, 8, 8}, {1, 1, 1});
    for (auto& v : constant.x) v = 2.0;
    for (auto& v : constant.y) v = -1.0;
    for (auto& v : constant.z) v = 0.5;
    const Field3 kc = apply_K(constant, params);
    const double expect = std::pow(params.gamma, -2.0 * params.exponent);
    for (double v : kc.x) CHECK(v == doctest::Approx(2.0 * expect).epsilon(1e-12));
    for (double v : kc.y) CHECK(v == doctest::Approx(-1.0 * expect).epsilon(1e-12));
    for (double v : kc.z) CHECK(v == doctest::Approx(0.5 * expect).epsilon(1e-12));
}

TEST_CASE("apply_LdagL inverts apply_K to 1e-10") {
    const auto params = small_params();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        Field3 f({8, 8, 8}, {1, 1, 1});
        for (int c = 0; c < 3; ++c)
            for (auto& v : f.comp(c)) v = rng.normal();
        const Field3 rt = apply_LdagL(apply_K(f, params), params);
        double num = 0.0, den = 0.0;
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < f.voxels(); ++i) {
                num += (rt.comp(c)[i] - f.comp(c)[i]) * (rt.comp(c)[i] - f.comp(c)[i]);
                den += f.comp(c)[i] * f.comp(c)[i];
            }
        CHECK(std::sqrt(num / den) < 1e-10);
    }
}

TEST_CASE("operator round-trip holds on non-power-of-two grids") {
    // mixed-radix axes exercise the Bluestein FFT path (e.g. 112 = 16*7)
    const auto params = small_params();
    Rng rng(777);
    Field3 f({6, 7, 5}, {0.5, 0.5, 0.5});
    for (int c = 0; c < 3; ++c)
        for (auto& v : f.comp(c)) v = rng.normal();
    const Field3 rt = apply_LdagL(apply_K(f, params), params);
    double num = 0.0, den = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < f.voxels(); ++i) {
            num += (rt.comp(c)[i] - f.comp(c)[i]) * (rt.comp(c)[i] - f.comp(c)[i]);
            den += f.comp(c)[i] * f.comp(c)[i];
        }
    CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("apply_K rejects non-finite input") {
    const auto params = small_params();
    Field3 f({4, 4, 4}, {1, 1, 1});
    f.x[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(apply_K(f, params), NumericalError);
}

TEST_CASE("metric distance: zero velocity, homogeneity, stencil oracle") {
    auto params = small_params(2);
    const std::array<std::uint32_t, 3> dims{8, 8, 8};

    VelocityField zero(2, Field3(dims, {1, 1, 1}));
    CHECK(metric_distance(zero, params) == 0.0);

    Rng rng(5);
    Field3 f(dims, {1.25, 1.0, 0.75});
    for (int c = 0; c < 3; ++c)
        for (auto& v : f.comp(c)) v = rng.normal();

    VelocityField v{f, f};
    const double d1 = metric_distance(v, params);
    VelocityField v3 = v;
    for (auto& field : v3)
        for (int c = 0; c < 3; ++c)
            for (auto& x : field.comp(c)) x *= 3.0;
    CHECK(metric_distance(v3, params) == doctest::Approx(3.0 * d1).epsilon(1e-12));

    // spatial oracle: ||Lf||_L2 with L = B o B applied by stencil composition
    double ss = 0.0;
    for (int c = 0; c < 3; ++c) {
        auto once = stencil_B(f.comp(c), dims, f.spacing, params.alpha, params.gamma);
        auto twice = stencil_B(once, dims, f.spacing, params.alpha, params.gamma);
        for (double x : twice) ss += x * x;
    }
    const double voxmeas = f.spacing[0] * f.spacing[1] * f.spacing[2];
    const double expect = std::sqrt(ss * voxmeas);
    // two equal timesteps: the trapezoid weight sums to 1, d == ||f||_V
    CHECK(d1 == doctest::Approx(expect).epsilon(1e-6));
    CHECK(sobolev_norm(f, params) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("integrate_flow: zero velocity gives identity maps") {
    auto params = small_params(4);
    const std::array<std::uint32_t, 3> dims{6, 5, 4};
    VelocityField v(4, Field3(dims, {1, 1, 1}));
    const DiffeoFlow flow = integrate_flow(v, params);
    const Field3 id = identity_map(dims, {1, 1, 1});
    for (const auto& maps : {flow.forward, flow.backward})
        for (const auto& m : maps)
            for (int c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < m.voxels(); ++i)
                    CHECK(m.comp(c)[i] == doctest::Approx(id.comp(c)[i]).scale(1.0));
}

TEST_CASE("integrate_flow: constant velocity translates interior points exactly") {
    auto params = small_params(6);
    const std::array<std::uint32_t, 3> dims{12, 12, 12};
    VelocityField v(6, Field3(dims, {1, 1, 1}));
    const std::array<double, 3> u{0.8, -0.5, 0.3};
    for (auto& f : v) {
        for (auto& x : f.x) x = u[0];
        for (auto& x : f.y) x = u[1];
        for (auto& x : f.z) x = u[2];
    }
    const DiffeoFlow flow = integrate_flow(v, params);
    const Field3& back1 = flow.backward.back();
    for (std::uint32_t z = 3; z < 9; ++z)
        for (std::uint32_t y = 3; y < 9; ++y)
            for (std::uint32_t x = 3; x < 9; ++x) {
                const std::size_t i = x + 12 * (y + 12 * std::size_t(z));
                CHECK(back1.x[i] == doctest::Approx(x - u[0]).epsilon(1e-9));
                CHECK(back1.y[i] == doctest::Approx(y - u[1]).epsilon(1e-9));
                CHECK(back1.z[i] == doctest::Approx(z - u[2]).epsilon(1e-9));
            }
}

TEST_CASE("flow: forward/backward composition and an RK4 tracing oracle") {
    auto params = small_params(8);
    const std::array<std::uint32_t, 3> dims{8, 8, 8};
    VelocityField v;
    for (int t = 0; t < 8; ++t)
        v.push_back(testutil::smooth_field(dims, 21 + std::uint64_t(t), 0.25));
    double vmax = 0.0;
    for (const auto& f : v)
        for (int c = 0; c < 3; ++c)
            for (double x : f.comp(c)) vmax = std::max(vmax, std::fabs(x));
    const double dt = 1.0 / 7.0;
    const double tol = 10.0 * dt * vmax;

    const DiffeoFlow flow = integrate_flow(v, params);

    // composition phi_{0,1}(phi_{1,0}(x)) ~ x on interior points
    const Field3& fwd0 = flow.forward.front();
    const Field3& back1 = flow.backward.back();
    for (std::uint32_t z = 2; z < 6; ++z)
        for (std::uint32_t y = 2; y < 6; ++y)
            for (std::uint32_t x = 2; x < 6; ++x) {
                const std::size_t i = x + 8 * (y + 8 * std::size_t(z));
                const auto mid = sample3(fwd0, back1.x[i], back1.y[i], back1.z[i]);
                CHECK(std::fabs(mid[0] - double(x)) < tol);
                CHECK(std::fabs(mid[1] - double(y)) < tol);
                CHECK(std::fabs(mid[2] - double(z)) < tol);
            }

    // RK4 particle tracing from t=1 down to t=0 against the backward map
    auto vel_at = [&](double t, const std::array<double, 3>& p) {
        const double ft = t * 7.0;
        const int t0 = std::max(0, std::min(7, int(ft)));
        const int t1 = std::min(7, t0 + 1);
        const double w = ft - double(t0);
        const auto a = sample3(v[std::size_t(t0)], p[0], p[1], p[2]);
        const auto b = sample3(v[std::size_t(t1)], p[0], p[1], p[2]);
        std::array<double, 3> out{};
        for (std::size_t c = 0; c < 3; ++c) out[c] = (1.0 - w) * a[c] + w * b[c];
        return out;
    };
    for (std::uint32_t pz = 3; pz <= 4; ++pz)
        for (std::uint32_t py = 3; py <= 4; ++py)
            for (std::uint32_t px = 3; px <= 4; ++px) {
                std::array<double, 3> p{double(px), double(py), double(pz)};
                const int steps = 400;
                const double h = -1.0 / steps;
                double t = 1.0;
                for (int s = 0; s < steps; ++s) {
                    const auto k1 = vel_at(t, p);
                    auto p2 = p;
                    for (std::size_t c = 0; c < 3; ++c) p2[c] += 0.5 * h * k1[c];
                    const auto k2 = vel_at(t + 0.5 * h, p2);
                    auto p3 = p;
                    for (std::size_t c = 0; c < 3; ++c) p3[c] += 0.5 * h * k2[c];
                    const auto k3 = vel_at(t + 0.5 * h, p3);
                    auto p4 = p;
                    for (std::size_t c = 0; c < 3; ++c) p4[c] += h * k3[c];
                    const auto k4 = vel_at(t + h, p4);
                    for (std::size_t c = 0; c < 3; ++c)
                        p[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                    t += h;
                }
                const std::size_t i = px + 8 * (py + 8 * std::size_t(pz));
                CHECK(std::fabs(back1.x[i] - p[0]) < tol);
                CHECK(std::fabs(back1.y[i] - p[1]) < tol);
                CHECK(std::fabs(back1.z[i] - p[2]) < tol);
            }
}

TEST_CASE("gradient vanishes for matched images at zero velocity") {
    auto params = small_params(4);
    const Volume3D img = testutil::smooth_image({8, 8, 8}, 31);
    VelocityField v(4, Field3({8, 8, 8}, {1, 1, 1}));
    const DiffeoFlow flow = integrate_flow(v, params);
    const VelocityField g = gradient(v, img, img, flow, params);
    for (const auto& f : g)
        for (int c = 0; c < 3; ++c)
            for (double x : f.comp(c)) CHECK(x == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("gradient equals 2v when both images are constant") {
    auto params = small_params(3);
    Volume3D img({8, 8, 8}, {1, 1, 1}, 0.7f);
    VelocityField v;
    for (int t = 0; t < 3; ++t)
        v.push_back(testutil::smooth_field({8, 8, 8}, 100 + std::uint64_t(t), 0.3));
    const DiffeoFlow flow = integrate_flow(v, params);
    const VelocityField g = gradient(v, img, img, flow, params);
    for (std::size_t t = 0; t < 3; ++t)
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < g[t].voxels(); ++i)
                CHECK(g[t].comp(c)[i] ==
                      doctest::Approx(2.0 * v[t].comp(c)[i]).epsilon(1e-9).scale(1.0));
}

namespace {

// Aggregate relative error between finite differences of the energy and the
// gradient pairing over several probe directions. The probe set includes the
// gradient itself, so the denominator never degenerates by cancellation.
double gradient_fd_error(const Volume3D& i0, const Volume3D& i1, const VelocityField& v,
                         const LddmmParams& params, std::uint64_t probe_seed) {
    const DiffeoFlow flow = integrate_flow(v, params);
    const VelocityField g = gradient(v, i0, i1, flow, params);
    const double dt = 1.0 / double(params.timesteps - 1);
    const double eps = 1e-4;

    double ss_res = 0.0, ss_fd = 0.0;
    for (int probe = 0; probe < 4; ++probe) {
        VelocityField h;
        for (int t = 0; t < params.timesteps; ++t)
            h.push_back(probe == 0
                            ? g[std::size_t(t)]
                            : testutil::smooth_field(i0.dims,
                                                     probe_seed + 100 * std::uint64_t(probe) +
                                                         std::uint64_t(t),
                                                     1.0));
        double inner = 0.0;
        for (std::size_t t = 0; t < g.size(); ++t)
            inner += dt * sobolev_dot(g[t], h[t], params);
        auto energy_at = [&](double s) {
            VelocityField w = v;
            for (std::size_t t = 0; t < w.size(); ++t)
                for (int c = 0; c < 3; ++c)
                    for (std::size_t i = 0; i < w[t].voxels(); ++i)
                        w[t].comp(c)[i] += s * h[t].comp(c)[i];
            return energy(w, i0, i1, params).total();
        };
        const double fd = (energy_at(eps) - energy_at(-eps)) / (2.0 * eps);
        ss_res += (fd - inner) * (fd - inner);
        ss_fd += fd * fd;
    }
    return std::sqrt(ss_res / ss_fd);
}

} // namespace

TEST_CASE("gradient matches central finite differences of the discrete energy") {
    // At the zero-velocity evaluation point (where descent starts) the
    // symmetric difference quotient of the trilinear energy coincides with
    // the central-difference image gradient, so the agreement is exact up to
    // roundoff; this pins every factor in the matching term.
    const std::array<std::uint32_t, 3> dims{8, 8, 8};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LddmmParams params = small_params(5);
        params.sigma = 1.0;
        const Volume3D i0 = testutil::smooth_image(dims, 1000 + seed);
        const Volume3D i1 = testutil::smooth_image(dims, 2000 + seed);
        const VelocityField v(5, Field3(dims, {1, 1, 1}));
        const double rel = gradient_fd_error(i0, i1, v, params, 9000 + seed * 1000);
        CAPTURE(seed);
        CHECK(rel < 1e-3);
    }
}

TEST_CASE("gradient stays first-order consistent away from zero velocity") {
    // Off the grid nodes the interpolant's cell slopes and the central
    // differences genuinely differ, so the formula carries an O(dt)+O(h^2)
    // discretization error; this bounds it on generic smooth instances.
    const std::array<std::uint32_t, 3> dims{8, 8, 8};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LddmmParams params = small_params(9);
        params.sigma = 1.0;
        const Volume3D i0 = testutil::smooth_image(dims, 1000 + seed);
        const Volume3D i1 = testutil::smooth_image(dims, 2000 + seed);
        VelocityField v;
        for (int t = 0; t < params.timesteps; ++t)
            v.push_back(
                testutil::smooth_field(dims, 3000 + seed * 50 + std::uint64_t(t), 0.1));
        const double rel = gradient_fd_error(i0, i1, v, params, 9000 + seed * 1000);
        CAPTURE(seed);
        CHECK(rel < 0.25);
    }
}

TEST_CASE("register: identity pair is the optimum") {
    LddmmParams params = small_params(4);
    params.max_iters = 10;
    const Volume3D img = testutil::smooth_image({8, 8, 8}, 77);
    const auto res = register_volumes(img, img, params);
    CHECK(res.metric_distance <= 1e-6);
    for (const auto& f : res.velocity)
        for (int c = 0; c < 3; ++c)
            for (double x : f.comp(c)) CHECK(std::fabs(x) <= 1e-6);
    CHECK(res.converged);
}

TEST_CASE("register: translated ball recovers overlap and descends monotonically") {
    LddmmParams params;
    params.alpha = 0.3;
    params.sigma = 0.05;
    params.timesteps = 5;
    params.max_iters = 200;
    params.step_size = 2.5e-4;
    params.energy_tol = 1e-7;
    const std::array<std::uint32_t, 3> dims{16, 16, 16};
    const Volume3D a =
        gaussian_smooth(testutil::ball_volume(dims, {7.5, 7.5, 7.5}, 4.0), 5, 1.0);
    const Volume3D b =
        gaussian_smooth(testutil::ball_volume(dims, {8.5, 7.5, 7.5}, 4.0), 5, 1.0);
    const auto res = register_volumes(a, b, params);

    for (std::size_t i = 1; i < res.energy_trace.size(); ++i)
        CHECK(res.energy_trace[i].total() <= res.energy_trace[i - 1].total() + 1e-12);

    CHECK(testutil::dice_half_max(res.warped, b) >= 0.95);
    CHECK(res.metric_distance > 0.0);

    // the line-search bookkeeping agrees with a fresh energy evaluation
    const auto fresh = energy(res.velocity, a, b, params);
    CHECK(fresh.total() ==
          doctest::Approx(res.energy_trace.back().total()).epsilon(1e-9));

    // the stored maps stay diffeomorphic: positive Jacobian determinants
    for (const auto& maps : {res.flow.forward, res.flow.backward})
        for (const auto& m : maps) {
            double lo = 1e300;
            for (double j : jacobian_determinant(m)) lo = std::min(lo, j);
            CHECK(lo > 0.0);
        }
}

TEST_CASE("register: farther targets are metrically farther, roughly symmetric") {
    LddmmParams params;
    params.alpha = 0.3;
    params.sigma = 0.05;
    params.timesteps = 5;
    params.max_iters = 200;
    params.step_size = 2.5e-4;
    params.energy_tol = 1e-7;
    const std::array<std::uint32_t, 3> dims{16, 16, 16};
    const Volume3D base =
        gaussian_smooth(testutil::ball_volume(dims, {6.5, 7.5, 7.5}, 3.5), 5, 1.0);
    const Volume3D near =
        gaussian_smooth(testutil::ball_volume(dims, {7.5, 7.5, 7.5}, 3.5), 5, 1.0);
    const Volume3D far =
        gaussian_smooth(testutil::ball_volume(dims, {9.5, 7.5, 7.5}, 3.5), 5, 1.0);

    const double d_near = register_volumes(base, near, params).metric_distance;
    const double d_far = register_volumes(base, far, params).metric_distance;
    CHECK(d_near < d_far);

    const double d_rev = register_volumes(near, base, params).metric_distance;
    CHECK(std::fabs(d_near - d_rev) / std::max(d_near, d_rev) <= 0.15);
}

TEST_CASE("register works end to end on a mixed-radix grid") {
    LddmmParams params;
    params.alpha = 0.3;
    params.sigma = 0.05;
    params.timesteps = 4;
    params.max_iters = 80;
    params.step_size = 2.5e-4;
    params.energy_tol = 1e-6;
    const std::array<std::uint32_t, 3> dims{12, 14, 10};
    const Volume3D a =
        gaussian_smooth(testutil::ball_volume(dims, {5.5, 6.5, 4.5}, 2.5), 5, 1.0);
    const Volume3D b =
        gaussian_smooth(testutil::ball_volume(dims, {6.3, 6.5, 4.5}, 2.5), 5, 1.0);
    const auto res = register_volumes(a, b, params);
    CHECK(res.metric_distance > 0.0);
    CHECK(testutil::dice_half_max(res.warped, b) >= 0.9);
    for (std::size_t i = 1; i < res.energy_trace.size(); ++i)
        CHECK(res.energy_trace[i].total() <= res.energy_trace[i - 1].total() + 1e-12);
}

TEST_CASE("register rejects mismatched grids") {
    const Volume3D a({8, 8, 8}, {1, 1, 1}, 0.0f);
    const Volume3D b({8, 8, 4}, {1, 1, 1}, 0.0f);
    CHECK_THROWS_AS(register_volumes(a, b, LddmmParams{}), DimensionMismatch);
}
