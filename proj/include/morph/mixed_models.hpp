#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "morph/linalg.hpp"

namespace morph::mixed {

/// Residual covariance families for the within-subject measure blocks.
/// CS: equal variances, equal covariances. UN: free SPD matrix.
/// AR1: common variance, geometric lag decay. ARH1: per-measure variances
/// with the same geometric correlation decay.
enum class CovKind { cs, un, ar1, arh1 };

const char* to_string(CovKind k);

struct CovStructure {
    CovKind kind = CovKind::cs;
    // cs: (sigma2, sigma1); ar1: (sigma2, rho);
    // arh1: (sigma_1^2..sigma_m^2, rho); un: lower triangle row-major.
    std::vector<double> params;

    la::Mat matrix(std::size_t m) const;
    std::size_t n_params(std::size_t m) const;
};

/// Fixed-effect factors. D is between-subject (diagnosis); S and T index the
/// within-subject positions (side, timepoint). All are two-level.
enum FactorBits : unsigned { kD = 1u, kS = 2u, kT = 4u };

struct ModelSpec {
    std::vector<unsigned> terms; // non-intercept terms as factor masks

    /// All main effects and interactions of the given factors.
    static ModelSpec full_factorial(unsigned factors);
    /// Throws DesignError unless every interaction's constituents are present.
    void validate() const;
    static std::string label(unsigned mask);
};

/// Balanced repeated data: n_subjects blocks of m measures each;
/// y is subject-major. pos[j] holds the (side, time) levels of block slot j,
/// -1 when that factor does not exist in the layout.
struct RepeatedData {
    std::size_t n_subjects = 0;
    std::size_t m = 0;
    std::vector<double> y;                  // n_subjects * m
    std::vector<int> group;                 // per subject, 0/1
    std::vector<std::array<int, 2>> pos;    // per slot: {side, time}

    std::size_t n_obs() const { return n_subjects * m; }
    void validate() const;
};

struct FixedEffect {
    std::string label;
    double estimate = 0.0;
};

struct MixedModelFit {
    std::vector<FixedEffect> beta; // intercept first
    CovStructure cov;
    double logLik = 0.0;
    std::size_t k = 0; // fixed + covariance parameters
    double aic = 0.0;
    double bic = 0.0;
    std::vector<double> fitted;
    std::vector<double> residuals;

    // bookkeeping for Wald tests and LRTs
    std::vector<unsigned> term_masks; // excludes intercept
    la::Mat coef_cov;                 // df-adjusted GLS coefficient covariance
    std::size_t n_obs = 0;
    std::size_t n_subjects = 0;
    std::size_t p_fixed = 0;
};

/// Maximum-likelihood fit: beta profiled out by GLS, the covariance
/// parameters maximized by Nelder-Mead direct search on an unconstrained
/// reparameterization (log variances, atanh rho, Cholesky for UN) from
/// moment-based starts; nested optima are reused as extra starts so the
/// likelihood ordering CS,AR1 <= ARH1 <= UN holds by construction.
MixedModelFit fit(const RepeatedData& data, const ModelSpec& spec, CovKind kind);

/// aic = -2l + 2k; bic = -2l + k ln(n_obs).
std::pair<double, double> information_criteria(double logLik, std::size_t k,
                                               std::size_t n_obs);

struct LrtResult {
    double statistic = 0.0;
    std::size_t df = 0;
    double p = 1.0;
};

/// Arithmetic form used for printed-table checks.
LrtResult lrt_values(double logLik_nested, std::size_t k_nested, double logLik_full,
                     std::size_t k_full);

/// Likelihood-ratio test of nested covariance structures (same fixed
/// effects, same data); throws NotNested otherwise.
LrtResult lrt(const MixedModelFit& nested, const MixedModelFit& full);

struct FTest {
    std::string term;
    double F = 0.0;
    double num_df = 0.0;
    double den_df = 0.0;
    double p = 1.0;
};

/// Wald-type F test per fixed-effect term; denominator df by the containment
/// rule (between terms: subjects minus between parameters; within terms:
/// N - subjects - within parameters).
std::vector<FTest> f_tests(const MixedModelFit& fit);

} // namespace morph::mixed
