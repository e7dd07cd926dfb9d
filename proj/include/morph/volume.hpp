#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace morph {

/// Regular 3D scalar field. Values are stored as 32-bit floats in x-fastest
/// order; all arithmetic on them accumulates in double. Instances are
/// immutable by convention once built and safe to share across threads.
struct Volume3D {
    std::array<std::uint32_t, 3> dims{0, 0, 0};   // nx, ny, nz
    std::array<double, 3> spacing{1.0, 1.0, 1.0}; // mm per voxel
    std::vector<float> data;                      // nx*ny*nz, x fastest

    Volume3D() = default;
    Volume3D(std::array<std::uint32_t, 3> d, std::array<double, 3> sp, float fill = 0.0f);

    std::size_t voxels() const { return std::size_t(dims[0]) * dims[1] * dims[2]; }
    std::size_t index(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
        return std::size_t(x) + dims[0] * (std::size_t(y) + std::size_t(dims[1]) * z);
    }
    float at(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
        return data[index(x, y, z)];
    }
    float& at(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
        return data[index(x, y, z)];
    }

    /// Throws InvalidVolume when dims/spacing/data are inconsistent.
    void validate() const;
    bool is_binary() const;

    /// Trilinear sample at voxel coordinates, clamped to the grid.
    double sample_trilinear(double x, double y, double z) const;
    float sample_nearest(double x, double y, double z) const;
};

enum class ResampleMode { nearest, trilinear };

/// Fill a closed binary shell: complement of a 6-connected exterior flood
/// fill seeded at the grid corners. Interior and shell become 1.
Volume3D fill_interior(const Volume3D& shell);

/// Separable truncated-Gaussian smoothing; kernel renormalized to sum 1,
/// clamp-to-edge boundary. window is the full width in voxels (odd).
Volume3D gaussian_smooth(const Volume3D& vol, int window = 9, double sigma = 1.0);

/// Resample by a per-axis factor that must give integer output dims.
/// Output spacing = input spacing / factor.
Volume3D resample(const Volume3D& vol, std::array<double, 3> factor, ResampleMode mode);

/// MVOL1 container: 5-byte magic "MVOL1", little-endian u32 dims[3],
/// f64 spacing[3], then f32 values x-fastest. Bit-exact round trip.
void write_mvol(const Volume3D& vol, const std::string& path);
Volume3D read_mvol(const std::string& path);
void write_mvol(const Volume3D& vol, std::ostream& os);
Volume3D read_mvol(std::istream& is, const std::string& name = "<stream>");

} // namespace morph
