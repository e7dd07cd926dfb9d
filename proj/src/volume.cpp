#include "morph/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "morph/errors.hpp"
#include "morph/kernels.hpp"

namespace morph {

Volume3D::Volume3D(std::array<std::uint32_t, 3> d, std::array<double, 3> sp, float fill)
    : dims(d), spacing(sp), data(std::size_t(d[0]) * d[1] * d[2], fill) {
    validate();
}

void Volume3D::validate() const {
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0)
        throw InvalidVolume("volume dims must be positive");
    for (double s : spacing)
        if (!(s > 0.0)) throw InvalidVolume("volume spacing must be positive");
    if (data.size() != voxels())
        throw InvalidVolume("volume data length does not match dims");
}

bool Volume3D::is_binary() const {
    for (float v : data)
        if (v != 0.0f && v != 1.0f) return false;
    return true;
}

double Volume3D::sample_trilinear(double x, double y, double z) const {
    const auto clampf = [](double v, double hi) { return v < 0.0 ? 0.0 : (v > hi ? hi : v); };
    x = clampf(x, double(dims[0] - 1));
    y = clampf(y, double(dims[1] - 1));
    z = clampf(z, double(dims[2] - 1));
    const auto x0 = std::uint32_t(x), y0 = std::uint32_t(y), z0 = std::uint32_t(z);
    const std::uint32_t x1 = std::min(x0 + 1, dims[0] - 1);
    const std::uint32_t y1 = std::min(y0 + 1, dims[1] - 1);
    const std::uint32_t z1 = std::min(z0 + 1, dims[2] - 1);
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    const double c00 = double(at(x0, y0, z0)) * (1 - fx) + double(at(x1, y0, z0)) * fx;
    const double c10 = double(at(x0, y1, z0)) * (1 - fx) + double(at(x1, y1, z0)) * fx;
    const double c01 = double(at(x0, y0, z1)) * (1 - fx) + double(at(x1, y0, z1)) * fx;
    const double c11 = double(at(x0, y1, z1)) * (1 - fx) + double(at(x1, y1, z1)) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

float Volume3D::sample_nearest(double x, double y, double z) const {
    const auto near = [](double v, std::uint32_t n) {
        long i = std::lround(v);
        if (i < 0) i = 0;
        if (i >= long(n)) i = long(n) - 1;
        return std::uint32_t(i);
    };
    return at(near(x, dims[0]), near(y, dims[1]), near(z, dims[2]));
}

Volume3D fill_interior(const Volume3D& shell) {
    shell.validate();
    if (!shell.is_binary()) throw InvalidVolume("fill_interior requires a binary volume");
    const auto [nx, ny, nz] = shell.dims;

    // A shell voxel on the grid boundary means the surface is not closed
    // inside the grid.
    for (std::uint32_t z = 0; z < nz; ++z)
        for (std::uint32_t y = 0; y < ny; ++y)
            for (std::uint32_t x = 0; x < nx; ++x) {
                const bool boundary = x == 0 || y == 0 || z == 0 || x == nx - 1 ||
                                      y == ny - 1 || z == nz - 1;
                if (boundary && shell.at(x, y, z) != 0.0f)
                    throw OpenShell("shell touches the grid boundary");
            }

    std::vector<std::uint8_t> exterior(shell.voxels(), 0);
    std::vector<std::uint32_t> stack;
    auto push = [&](std::uint32_t x, std::uint32_t y, std::uint32_t z) {
        const std::size_t i = shell.index(x, y, z);
        if (!exterior[i] && shell.data[i] == 0.0f) {
            exterior[i] = 1;
            stack.push_back(std::uint32_t(i));
        }
    };
    for (std::uint32_t z : {0u, nz - 1})
        for (std::uint32_t y : {0u, ny - 1})
            for (std::uint32_t x : {0u, nx - 1}) push(x, y, z);

    while (!stack.empty()) {
        const std::uint32_t i = stack.back();
        stack.pop_back();
        const std::uint32_t x = i % nx;
        const std::uint32_t y = (i / nx) % ny;
        const std::uint32_t z = i / (nx * ny);
        if (x > 0) push(x - 1, y, z);
        if (x + 1 < nx) push(x + 1, y, z);
        if (y > 0) push(x, y - 1, z);
        if (y + 1 < ny) push(x, y + 1, z);
        if (z > 0) push(x, y, z - 1);
        if (z + 1 < nz) push(x, y, z + 1);
    }

    Volume3D out(shell.dims, shell.spacing);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = exterior[i] ? 0.0f : 1.0f;
    return out;
}

namespace {

std::vector<double> gaussian_taps(int window, double sigma) {
    const int r = window / 2;
    std::vector<double> taps(std::size_t(window), 0.0);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
        taps[std::size_t(i + r)] = v;
        sum += v;
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// One separable pass along `axis` with clamp-to-edge padding. Lines are
// copied into a contiguous padded buffer so the same conv1d kernel serves
// all three axes.
void smooth_axis(Volume3D& vol, int axis, const std::vector<double>& taps) {
    const int r = int(taps.size()) / 2;
    const auto [nx, ny, nz] = vol.dims;
    const std::uint32_t n = vol.dims[std::size_t(axis)];
    std::vector<double> padded(n + 2 * std::size_t(r));
    std::vector<double> out(n);

    std::uint32_t nu, nv;
    if (axis == 0) {
        nu = ny;
        nv = nz;
    } else if (axis == 1) {
        nu = nx;
        nv = nz;
    } else {
        nu = nx;
        nv = ny;
    }

    const auto& k = kern::active();
    for (std::uint32_t v = 0; v < nv; ++v) {
        for (std::uint32_t u = 0; u < nu; ++u) {
            auto idx = [&](std::uint32_t i) {
                if (axis == 0) return vol.index(i, u, v);
                if (axis == 1) return vol.index(u, i, v);
                return vol.index(u, v, i);
            };
            for (std::uint32_t i = 0; i < n; ++i)
                padded[std::size_t(r) + i] = double(vol.data[idx(i)]);
            for (int i = 0; i < r; ++i) {
                padded[std::size_t(i)] = padded[std::size_t(r)];
                padded[std::size_t(r) + n + std::size_t(i)] = padded[std::size_t(r) + n - 1];
            }
            k.conv1d(padded.data(), out.data(), n, taps.data(), r);
            for (std::uint32_t i = 0; i < n; ++i) vol.data[idx(i)] = float(out[i]);
        }
    }
}

} // namespace

Volume3D gaussian_smooth(const Volume3D& vol, int window, double sigma) {
    vol.validate();
    if (window < 1 || window % 2 == 0)
        throw InvalidParameter("smoothing window must be odd and >= 1");
    if (!(sigma > 0.0)) throw InvalidParameter("smoothing sigma must be positive");

    const auto taps = gaussian_taps(window, sigma);
    Volume3D out = vol;
    for (int axis = 0; axis < 3; ++axis) smooth_axis(out, axis, taps);
    return out;
}

Volume3D resample(const Volume3D& vol, std::array<double, 3> factor, ResampleMode mode) {
    vol.validate();
    std::array<std::uint32_t, 3> odims{};
    for (int a = 0; a < 3; ++a) {
        if (!(factor[std::size_t(a)] > 0.0))
            throw InvalidParameter("resample factor must be positive");
        const double d = double(vol.dims[std::size_t(a)]) * factor[std::size_t(a)];
        const double rounded = std::round(d);
        if (std::abs(d - rounded) > 1e-9 || rounded < 1.0)
            throw InvalidParameter("resample factor must give integer output dims");
        odims[std::size_t(a)] = std::uint32_t(rounded);
    }
    Volume3D out(odims, {vol.spacing[0] / factor[0], vol.spacing[1] / factor[1],
                         vol.spacing[2] / factor[2]});
    for (std::uint32_t z = 0; z < odims[2]; ++z)
        for (std::uint32_t y = 0; y < odims[1]; ++y)
            for (std::uint32_t x = 0; x < odims[0]; ++x) {
                const double sx = double(x) / factor[0];
                const double sy = double(y) / factor[1];
                const double sz = double(z) / factor[2];
                out.at(x, y, z) = mode == ResampleMode::nearest
                                      ? vol.sample_nearest(sx, sy, sz)
                                      : float(vol.sample_trilinear(sx, sy, sz));
            }
    return out;
}

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::string& name, const char* what, std::size_t offset) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) {
        std::ostringstream msg;
        msg << name << ": truncated " << what << " at offset " << offset;
        throw FormatError(msg.str());
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace

void write_mvol(const Volume3D& vol, std::ostream& os) {
    vol.validate();
    os.write("MVOL1", 5);
    for (std::uint32_t d : vol.dims) put_le(os, d);
    for (double s : vol.spacing) put_le(os, s);
    for (float v : vol.data) put_le(os, v);
}

void write_mvol(const Volume3D& vol, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(path + ": cannot open for writing");
    write_mvol(vol, os);
    os.flush();
    if (!os) throw FormatError(path + ": write failed");
}

Volume3D read_mvol(std::istream& is, const std::string& name) {
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "MVOL1", 5) != 0) {
        throw FormatError(name + ": bad magic at offset 0 (expected \"MVOL1\")");
    }
    Volume3D vol;
    std::size_t off = 5;
    for (int i = 0; i < 3; ++i, off += 4)
        vol.dims[std::size_t(i)] = get_le<std::uint32_t>(is, name, "dims", off);
    for (int i = 0; i < 3; ++i, off += 8)
        vol.spacing[std::size_t(i)] = get_le<double>(is, name, "spacing", off);
    const std::size_t n = std::size_t(vol.dims[0]) * vol.dims[1] * vol.dims[2];
    if (vol.dims[0] == 0 || vol.dims[1] == 0 || vol.dims[2] == 0 || n > (std::size_t(1) << 33))
        throw FormatError(name + ": implausible dims in header");
    vol.data.resize(n);
    for (std::size_t i = 0; i < n; ++i, off += 4)
        vol.data[i] = get_le<float>(is, name, "data", off);
    vol.validate();
    return vol;
}

Volume3D read_mvol(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(path + ": cannot open");
    return read_mvol(is, path);
}

} // namespace morph
