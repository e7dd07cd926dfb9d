#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "morph/fft.hpp"
#include "morph/volume.hpp"

namespace morph::lddmm {

/// Parameters of the inexact-matching variational problem. The smoothness
/// operator is L = (-alpha*Laplacian + gamma)^exponent applied per component;
/// exponent must exceed 1.5 so velocity fields stay diffeomorphic in 3D.
struct LddmmParams {
    double alpha = 0.01;
    double gamma = 1.0;
    double exponent = 2.0;
    double sigma = 1.0;   // matching weight: (1/sigma^2)*||I0.phi1^-1 - I1||^2
    int timesteps = 10;   // discretization of t in [0,1]
    double step_size = 1.0;
    int max_iters = 200;
    double energy_tol = 1e-6;

    void validate() const;
};

/// Dense 3-component vector field on the registration grid, double precision,
/// planar component storage (SIMD-friendly).
struct Field3 {
    std::array<std::uint32_t, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<double> x, y, z;

    Field3() = default;
    Field3(std::array<std::uint32_t, 3> d, std::array<double, 3> sp);

    std::size_t voxels() const { return std::size_t(dims[0]) * dims[1] * dims[2]; }
    std::vector<double>& comp(int c) { return c == 0 ? x : (c == 1 ? y : z); }
    const std::vector<double>& comp(int c) const { return c == 0 ? x : (c == 1 ? y : z); }
    bool same_grid(const Field3& o) const { return dims == o.dims && spacing == o.spacing; }
    bool finite() const;
};

/// One velocity field per timestep, mm per unit flow-time.
using VelocityField = std::vector<Field3>;

/// Forward maps phi_{t,1} and backward maps phi_{t,0} as coordinate fields
/// in mm, one per timestep.
struct DiffeoFlow {
    std::vector<Field3> forward;
    std::vector<Field3> backward;
};

struct EnergyPoint {
    int iteration = 0;
    double matching = 0.0;
    double regularization = 0.0;
    double total() const { return matching + regularization; }
};

struct RegistrationResult {
    VelocityField velocity;
    DiffeoFlow flow;
    std::vector<EnergyPoint> energy_trace; // accepted iterations, non-increasing total
    double metric_distance = 0.0;
    Volume3D warped; // I0 composed with phi_{1,0}
    int iterations = 0;
    bool converged = false;
};

/// Smoothing/metric operator bound to one grid: caches the FFT plans and the
/// spectral multipliers m(w) = gamma + alpha*sum_d (2-2cos w_d)/spacing_d^2.
class Operator {
public:
    Operator(std::array<std::uint32_t, 3> dims, std::array<double, 3> spacing,
             const LddmmParams& params);

    /// K = (L^dag L)^-1: multiply the DFT by m(w)^(-2a).
    Field3 apply_K(const Field3& f) const;
    /// L^dag L: multiply the DFT by m(w)^(+2a).
    Field3 apply_LdagL(const Field3& f) const;
    /// ||f||_V = ||Lf||_L2, evaluated spectrally.
    double norm_V(const Field3& f) const;
    /// <a,b>_V.
    double dot_V(const Field3& a, const Field3& b) const;

private:
    Field3 multiply(const Field3& f, const std::vector<double>& w) const;

    std::array<std::uint32_t, 3> dims_;
    std::array<double, 3> spacing_;
    fft::Plan3D plan_;
    std::vector<double> w_pos_; // m^{2a}
    std::vector<double> w_neg_; // m^{-2a}
    double voxel_measure_ = 1.0;
};

Field3 identity_map(std::array<std::uint32_t, 3> dims, std::array<double, 3> spacing);

/// Jacobian determinant of a coordinate map (central differences on its
/// periodic displacement part). Positive everywhere for a diffeomorphism.
std::vector<double> jacobian_determinant(const Field3& map);

/// Free-function forms of the operator (each builds a fresh Operator).
Field3 apply_K(const Field3& f, const LddmmParams& params);
Field3 apply_LdagL(const Field3& f, const LddmmParams& params);
double sobolev_norm(const Field3& f, const LddmmParams& params);
double sobolev_dot(const Field3& a, const Field3& b, const LddmmParams& params);

/// Semi-Lagrangian integration of the flow ODE over the unit time interval,
/// dt = 1/(T-1): backward maps compose against x - dt*v_t(x), forward maps
/// against x + dt*v_t(x).
DiffeoFlow integrate_flow(const VelocityField& v, const LddmmParams& params);

/// Total energy sum_t ||v_t||_V^2 * dt + (1/sigma^2)*||I0.phi_{1,0} - I1||_L2^2.
EnergyPoint energy(const VelocityField& v, const Volume3D& I0, const Volume3D& I1,
                   const LddmmParams& params);

/// Cost gradient per timestep: 2 v_t - K((2/sigma^2) |Dphi_{t,1}| grad(J_t^0) (J_t^0 - J_t^1))
/// with J_t^0 = I0 . phi_{t,0}, J_t^1 = I1 . phi_{t,1}; image gradient and the
/// Jacobian determinant use central differences scaled by voxel spacing.
/// The left-point flow recursion leaves the final velocity sample out of the
/// matching term, so its gradient is the regularization part alone.
VelocityField gradient(const VelocityField& v, const Volume3D& I0, const Volume3D& I1,
                       const DiffeoFlow& flow, const LddmmParams& params);

/// Gradient descent with backtracking from a zero velocity field;
/// deterministic for fixed inputs and parameters.
RegistrationResult register_volumes(const Volume3D& I0, const Volume3D& I1,
                                    const LddmmParams& params);

/// Trapezoidal quadrature of ||v_t||_V over flow time (the geodesic length).
double metric_distance(const VelocityField& v, const LddmmParams& params);

/// I0 pulled back through the final backward map (the matched template).
Volume3D warp_volume(const Volume3D& I0, const DiffeoFlow& flow);

} // namespace morph::lddmm
