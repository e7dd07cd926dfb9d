#include "morph/mixed_models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "morph/distributions.hpp"
#include "morph/errors.hpp"

namespace morph::mixed {

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112;
constexpr double kPenalty = -1e300;

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// ---------------------------------------------------------------------------
// Nelder-Mead direct search (maximization), deterministic.
struct Simplex {
    std::function<double(const std::vector<double>&)> f;
    int max_evals = 2000;
    double tol = 1e-10;

    std::vector<double> best_x;
    double best_f = kPenalty;
    int evals = 0;

    double eval(const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        if (v > best_f) {
            best_f = v;
            best_x = x;
        }
        return v;
    }

    void run(std::vector<double> x0) {
        const std::size_t d = x0.size();
        if (d == 0) {
            eval(x0);
            return;
        }
        std::vector<std::vector<double>> pts(d + 1, x0);
        std::vector<double> fv(d + 1);
        for (std::size_t i = 0; i < d; ++i)
            pts[i + 1][i] += std::max(0.1, 0.1 * std::fabs(x0[i]));
        for (std::size_t i = 0; i <= d; ++i) fv[i] = eval(pts[i]);

        while (evals < max_evals) {
            // order: best first (maximizing)
            std::vector<std::size_t> idx(d + 1);
            for (std::size_t i = 0; i <= d; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return fv[a] > fv[b]; });
            {
                std::vector<std::vector<double>> p2(d + 1);
                std::vector<double> f2(d + 1);
                for (std::size_t i = 0; i <= d; ++i) {
                    p2[i] = pts[idx[i]];
                    f2[i] = fv[idx[i]];
                }
                pts = std::move(p2);
                fv = std::move(f2);
            }
            if (std::fabs(fv[0] - fv[d]) <= tol * (std::fabs(fv[0]) + tol)) break;

            std::vector<double> centroid(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j] / double(d);

            auto blend = [&](double c) {
                std::vector<double> x(d);
                for (std::size_t j = 0; j < d; ++j)
                    x[j] = centroid[j] + c * (pts[d][j] - centroid[j]);
                return x;
            };
            const auto xr = blend(-1.0);
            const double fr = eval(xr);
            if (fr > fv[0]) {
                const auto xe = blend(-2.0);
                const double fe = eval(xe);
                if (fe > fr) {
                    pts[d] = xe;
                    fv[d] = fe;
                } else {
                    pts[d] = xr;
                    fv[d] = fr;
                }
            } else if (fr > fv[d - 1]) {
                pts[d] = xr;
                fv[d] = fr;
            } else {
                const auto xc = blend(fr > fv[d] ? -0.5 : 0.5);
                const double fc = eval(xc);
                if (fc > std::max(fr, fv[d])) {
                    pts[d] = xc;
                    fv[d] = fc;
                } else {
                    for (std::size_t i = 1; i <= d; ++i) {
                        for (std::size_t j = 0; j < d; ++j)
                            pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                        fv[i] = eval(pts[i]);
                        if (evals >= max_evals) break;
                    }
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Unconstrained covariance parameterizations (always SPD by construction).

la::Mat cov_cs(std::size_t m, double a, double b) {
    // eigenvalue form: a = sigma2 - sigma1 > 0, b = sigma2 + (m-1) sigma1 > 0
    const double sigma2 = (a * double(m - 1) + b) / double(m);
    const double sigma1 = (b - a) / double(m);
    la::Mat S(m, m, sigma1);
    for (std::size_t i = 0; i < m; ++i) S(i, i) = sigma2;
    return S;
}

la::Mat cov_ar1(std::size_t m, double sigma2, double rho) {
    la::Mat S(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            S(i, j) = sigma2 * std::pow(rho, double(i > j ? i - j : j - i));
    return S;
}

la::Mat cov_arh1(std::size_t m, const double* var, double rho) {
    la::Mat S(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            S(i, j) = std::sqrt(var[i] * var[j]) * std::pow(rho, double(i > j ? i - j : j - i));
    return S;
}

la::Mat cov_un_from_chol(std::size_t m, const std::vector<double>& theta) {
    // theta: diag logs first, then strictly-lower entries row-major
    la::Mat L(m, m);
    std::size_t t = 0;
    for (std::size_t i = 0; i < m; ++i) L(i, i) = std::exp(theta[t++]);
    for (std::size_t i = 1; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j) L(i, j) = theta[t++];
    la::Mat S(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= std::min(i, j); ++k) s += L(i, k) * L(j, k);
            S(i, j) = S(j, i) = s;
        }
    return S;
}

std::size_t theta_dim(CovKind kind, std::size_t m) {
    switch (kind) {
        case CovKind::cs: return 2;
        case CovKind::ar1: return 2;
        case CovKind::arh1: return m + 1;
        case CovKind::un: return m * (m + 1) / 2;
    }
    return 0;
}

la::Mat cov_from_theta(CovKind kind, std::size_t m, const std::vector<double>& theta) {
    switch (kind) {
        case CovKind::cs: return cov_cs(m, std::exp(theta[0]), std::exp(theta[1]));
        case CovKind::ar1: return cov_ar1(m, std::exp(theta[0]), std::tanh(theta[1]));
        case CovKind::arh1: {
            std::vector<double> var(m);
            for (std::size_t i = 0; i < m; ++i) var[i] = std::exp(theta[i]);
            return cov_arh1(m, var.data(), std::tanh(theta[m]));
        }
        case CovKind::un: return cov_un_from_chol(m, theta);
    }
    return la::Mat();
}

std::vector<double> theta_from_cov(CovKind kind, const la::Mat& C) {
    const std::size_t m = C.rows;
    switch (kind) {
        case CovKind::cs: {
            double dsum = 0.0, osum = 0.0;
            for (std::size_t i = 0; i < m; ++i) dsum += C(i, i);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) osum += C(i, j);
            const double sigma2 = std::max(dsum / double(m), 1e-12);
            double sigma1 = m > 1 ? osum / (double(m) * double(m - 1) / 2.0) : 0.0;
            double a = sigma2 - sigma1;
            double b = sigma2 + double(m - 1) * sigma1;
            a = std::max(a, 1e-8 * sigma2);
            b = std::max(b, 1e-8 * sigma2);
            return {std::log(a), std::log(b)};
        }
        case CovKind::ar1: {
            double dsum = 0.0;
            for (std::size_t i = 0; i < m; ++i) dsum += C(i, i);
            const double sigma2 = std::max(dsum / double(m), 1e-12);
            double lag = 0.0;
            for (std::size_t i = 0; i + 1 < m; ++i) lag += C(i, i + 1);
            double rho = m > 1 ? clamp(lag / (double(m - 1) * sigma2), -0.95, 0.95) : 0.0;
            return {std::log(sigma2), std::atanh(rho)};
        }
        case CovKind::arh1: {
            std::vector<double> theta(m + 1);
            double lag = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                theta[i] = std::log(std::max(C(i, i), 1e-12));
            for (std::size_t i = 0; i + 1 < m; ++i) {
                lag += C(i, i + 1);
                scale += std::sqrt(std::max(C(i, i) * C(i + 1, i + 1), 1e-24));
            }
            const double rho = m > 1 ? clamp(lag / std::max(scale, 1e-12), -0.95, 0.95) : 0.0;
            theta[m] = std::atanh(rho);
            return theta;
        }
        case CovKind::un: {
            la::Mat L = C;
            if (!la::cholesky(L)) {
                double dmean = 0.0;
                for (std::size_t i = 0; i < m; ++i) dmean += C(i, i) / double(m);
                L = C;
                for (std::size_t i = 0; i < m; ++i) L(i, i) += std::max(1e-6 * dmean, 1e-12);
                if (!la::cholesky(L)) L = la::Mat::identity(m);
            }
            std::vector<double> theta;
            theta.reserve(m * (m + 1) / 2);
            for (std::size_t i = 0; i < m; ++i)
                theta.push_back(std::log(std::max(L(i, i), 1e-12)));
            for (std::size_t i = 1; i < m; ++i)
                for (std::size_t j = 0; j < i; ++j) theta.push_back(L(i, j));
            return theta;
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Profiled likelihood machinery. Subjects with the same group level share a
// design block, so the per-evaluation cost is independent of n.

struct PatternSums {
    la::Mat X;              // m x p design block
    double count = 0.0;     // subjects with this pattern
    std::vector<double> sy; // sum of y blocks
    la::Mat S;              // sum of y y^T
};

struct ProfileContext {
    std::size_t m = 0, p = 0, n_subjects = 0;
    std::vector<PatternSums> patterns;

    struct Eval {
        bool ok = false;
        double logLik = kPenalty;
        std::vector<double> beta;
        la::Mat xsx; // sum X' Sigma^-1 X
    };

    Eval eval(const la::Mat& Sigma) const {
        Eval out;
        la::Mat L = Sigma;
        if (!la::cholesky(L)) return out;
        double logdet = 0.0;
        for (std::size_t i = 0; i < m; ++i) logdet += 2.0 * std::log(L(i, i));
        la::Mat Sinv;
        try {
            Sinv = la::inverse_spd(Sigma);
        } catch (const NumericalError&) {
            return out;
        }

        la::Mat A(p, p);
        std::vector<double> b(p, 0.0);
        double tr_quad = 0.0;
        for (const auto& pat : patterns) {
            // XtSi = X^T Sigma^-1 (p x m)
            la::Mat XtSi = la::mul(pat.X.transposed(), Sinv);
            la::Mat XtSiX = la::mul(XtSi, pat.X);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) A(i, j) += pat.count * XtSiX(i, j);
            for (std::size_t i = 0; i < p; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < m; ++j) s += XtSi(i, j) * pat.sy[j];
                b[i] += s;
            }
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) tr_quad += Sinv(i, j) * pat.S(j, i);
        }

        la::Mat Ac = A;
        if (!la::cholesky(Ac)) return out;
        out.beta = la::chol_solve(Ac, b);
        out.xsx = A;

        // quad = sum_k r_k' Sinv r_k = tr(Sinv S) - 2 b'beta + beta' A beta
        double quad = tr_quad;
        for (std::size_t i = 0; i < p; ++i) quad -= 2.0 * b[i] * out.beta[i];
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) quad += out.beta[i] * A(i, j) * out.beta[j];

        const double N = double(n_subjects) * double(m);
        out.logLik = -0.5 * (N * kLn2Pi + double(n_subjects) * logdet + quad);
        out.ok = std::isfinite(out.logLik);
        if (!out.ok) out.logLik = kPenalty;
        return out;
    }

    // ML residual covariance at the GLS beta for the given Sigma: the UN
    // self-consistency map Sigma -> (1/n) sum r r'.
    la::Mat residual_cov(const std::vector<double>& beta) const {
        la::Mat C(m, m);
        for (const auto& pat : patterns) {
            std::vector<double> xb(m, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < p; ++j) xb[i] += pat.X(i, j) * beta[j];
            // sum over subjects in pattern of (y - xb)(y - xb)' =
            //   S - sy xb' - xb sy' + count xb xb'
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    C(i, j) += pat.S(i, j) - pat.sy[i] * xb[j] - xb[i] * pat.sy[j] +
                               pat.count * xb[i] * xb[j];
        }
        for (auto& v : C.a) v /= double(n_subjects);
        return C;
    }
};

std::vector<unsigned> canonical_terms(const ModelSpec& spec) { return spec.terms; }

double design_value(unsigned mask, int group, const std::array<int, 2>& pos) {
    double v = 1.0;
    if (mask & kD) v *= double(group);
    if (mask & kS) v *= double(pos[0] == 1);
    if (mask & kT) v *= double(pos[1] == 1);
    return v;
}

ProfileContext build_context(const RepeatedData& data, const ModelSpec& spec) {
    ProfileContext ctx;
    ctx.m = data.m;
    ctx.n_subjects = data.n_subjects;
    const auto terms = canonical_terms(spec);
    ctx.p = 1 + terms.size();

    // one pattern per group level present
    std::vector<int> levels;
    for (int g : data.group)
        if (std::find(levels.begin(), levels.end(), g) == levels.end()) levels.push_back(g);
    std::sort(levels.begin(), levels.end());

    for (int g : levels) {
        PatternSums pat;
        pat.X = la::Mat(ctx.m, ctx.p);
        for (std::size_t j = 0; j < ctx.m; ++j) {
            pat.X(j, 0) = 1.0;
            for (std::size_t t = 0; t < terms.size(); ++t)
                pat.X(j, t + 1) = design_value(terms[t], g, data.pos[j]);
        }
        pat.sy.assign(ctx.m, 0.0);
        pat.S = la::Mat(ctx.m, ctx.m);
        ctx.patterns.push_back(std::move(pat));
    }
    auto pattern_of = [&](int g) {
        return std::size_t(std::find(levels.begin(), levels.end(), g) - levels.begin());
    };
    for (std::size_t k = 0; k < data.n_subjects; ++k) {
        auto& pat = ctx.patterns[pattern_of(data.group[k])];
        pat.count += 1.0;
        const double* yk = data.y.data() + k * data.m;
        for (std::size_t i = 0; i < ctx.m; ++i) {
            pat.sy[i] += yk[i];
            for (std::size_t j = 0; j < ctx.m; ++j) pat.S(i, j) += yk[i] * yk[j];
        }
    }

    // full-rank check with Sigma = I
    auto id_eval = ctx.eval(la::Mat::identity(ctx.m));
    if (!id_eval.ok) throw DesignError("design matrix is rank deficient");
    return ctx;
}

struct Optimum {
    std::vector<double> theta;
    double logLik = kPenalty;
    ProfileContext::Eval eval;
};

Optimum optimize(const ProfileContext& ctx, CovKind kind, std::size_t m,
                 const std::vector<std::vector<double>>& starts) {
    Optimum best;
    for (const auto& start : starts) {
        Simplex s;
        s.f = [&](const std::vector<double>& theta) {
            return ctx.eval(cov_from_theta(kind, m, theta)).logLik;
        };
        s.run(start);
        // one deterministic restart from the incumbent
        std::vector<double> x = s.best_x;
        Simplex s2;
        s2.f = s.f;
        s2.max_evals = 1000;
        s2.run(x);
        if (s2.best_f > best.logLik) {
            best.logLik = s2.best_f;
            best.theta = s2.best_x;
        }
        if (s.best_f > best.logLik) {
            best.logLik = s.best_f;
            best.theta = s.best_x;
        }
    }
    best.eval = ctx.eval(cov_from_theta(kind, m, best.theta));
    return best;
}

la::Mat ols_residual_cov(const ProfileContext& ctx) {
    auto e = ctx.eval(la::Mat::identity(ctx.m));
    return ctx.residual_cov(e.beta);
}

} // namespace

const char* to_string(CovKind k) {
    switch (k) {
        case CovKind::cs: return "CS";
        case CovKind::un: return "UN";
        case CovKind::ar1: return "AR1";
        case CovKind::arh1: return "ARH1";
    }
    return "?";
}

la::Mat CovStructure::matrix(std::size_t m) const {
    switch (kind) {
        case CovKind::cs: {
            la::Mat S(m, m, params[1]);
            for (std::size_t i = 0; i < m; ++i) S(i, i) = params[0];
            return S;
        }
        case CovKind::ar1: return cov_ar1(m, params[0], params[1]);
        case CovKind::arh1: return cov_arh1(m, params.data(), params[m]);
        case CovKind::un: {
            la::Mat S(m, m);
            std::size_t t = 0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j <= i; ++j) {
                    S(i, j) = S(j, i) = params[t++];
                }
            return S;
        }
    }
    return la::Mat();
}

std::size_t CovStructure::n_params(std::size_t m) const {
    switch (kind) {
        case CovKind::cs: return 2;
        case CovKind::ar1: return 2;
        case CovKind::arh1: return m + 1;
        case CovKind::un: return m * (m + 1) / 2;
    }
    return 0;
}

ModelSpec ModelSpec::full_factorial(unsigned factors) {
    ModelSpec spec;
    for (unsigned mask = 1; mask <= 7; ++mask)
        if ((mask & factors) == mask) spec.terms.push_back(mask);
    std::sort(spec.terms.begin(), spec.terms.end(), [](unsigned a, unsigned b) {
        const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    return spec;
}

void ModelSpec::validate() const {
    for (unsigned t : terms) {
        if (t == 0 || t > 7) throw DesignError("invalid term mask");
        if (__builtin_popcount(t) > 1) {
            for (unsigned bit : {kD, kS, kT}) {
                if ((t & bit) && std::find(terms.begin(), terms.end(), bit) == terms.end())
                    throw DesignError("interaction term lacks main effect " +
                                      ModelSpec::label(bit));
            }
        }
    }
}

std::string ModelSpec::label(unsigned mask) {
    std::string s;
    for (unsigned bit : {kD, kS, kT}) {
        if (mask & bit) {
            if (!s.empty()) s += ':';
            s += bit == kD ? "D" : (bit == kS ? "S" : "T");
        }
    }
    return s.empty() ? "(intercept)" : s;
}

void RepeatedData::validate() const {
    if (n_subjects == 0 || m == 0) throw DesignError("empty repeated data");
    if (y.size() != n_subjects * m) throw DesignError("y size mismatch");
    if (group.size() != n_subjects) throw DesignError("group size mismatch");
    if (pos.size() != m) throw DesignError("position size mismatch");
}

MixedModelFit fit(const RepeatedData& data, const ModelSpec& spec, CovKind kind) {
    data.validate();
    spec.validate();
    const std::size_t m = data.m;
    ProfileContext ctx = build_context(data, spec);
    const la::Mat C0 = ols_residual_cov(ctx);

    Optimum opt;
    switch (kind) {
        case CovKind::cs:
        case CovKind::ar1:
            opt = optimize(ctx, kind, m, {theta_from_cov(kind, C0)});
            break;
        case CovKind::arh1: {
            Optimum ar = optimize(ctx, CovKind::ar1, m, {theta_from_cov(CovKind::ar1, C0)});
            const la::Mat Car = cov_from_theta(CovKind::ar1, m, ar.theta);
            opt = optimize(ctx, kind, m,
                           {theta_from_cov(kind, C0), theta_from_cov(kind, Car)});
            break;
        }
        case CovKind::un: {
            Optimum cs = optimize(ctx, CovKind::cs, m, {theta_from_cov(CovKind::cs, C0)});
            Optimum ar = optimize(ctx, CovKind::ar1, m, {theta_from_cov(CovKind::ar1, C0)});
            Optimum arh = optimize(
                ctx, CovKind::arh1, m,
                {theta_from_cov(CovKind::arh1, C0),
                 theta_from_cov(CovKind::arh1, cov_from_theta(CovKind::ar1, m, ar.theta))});
            opt = optimize(ctx, kind, m,
                           {theta_from_cov(kind, C0),
                            theta_from_cov(kind, cov_from_theta(CovKind::cs, m, cs.theta)),
                            theta_from_cov(kind, cov_from_theta(CovKind::arh1, m, arh.theta))});
            // Self-consistency polish: at the UN optimum Sigma equals the ML
            // residual covariance; iterating the fixed point sharpens the
            // simplex result to machine precision.
            la::Mat Sigma = cov_from_theta(kind, m, opt.theta);
            auto ev = ctx.eval(Sigma);
            for (int it = 0; it < 200 && ev.ok; ++it) {
                la::Mat Snew = ctx.residual_cov(ev.beta);
                auto ev2 = ctx.eval(Snew);
                if (!ev2.ok || ev2.logLik < ev.logLik - 1e-9) break;
                double delta = 0.0;
                for (std::size_t i = 0; i < Snew.a.size(); ++i)
                    delta = std::max(delta, std::fabs(Snew.a[i] - Sigma.a[i]));
                Sigma = Snew;
                ev = ev2;
                if (delta < 1e-13) break;
            }
            if (ev.ok && ev.logLik >= opt.logLik) {
                opt.logLik = ev.logLik;
                opt.theta = theta_from_cov(kind, Sigma);
                opt.eval = ev;
            }
            break;
        }
    }
    if (!opt.eval.ok) throw NumericalError("covariance optimization failed");

    const la::Mat Sigma = cov_from_theta(kind, m, opt.theta);
    MixedModelFit out;
    out.cov.kind = kind;
    switch (kind) {
        case CovKind::cs: {
            const double sigma2 = Sigma(0, 0);
            const double sigma1 = m > 1 ? Sigma(0, 1) : 0.0;
            out.cov.params = {sigma2, sigma1};
            break;
        }
        case CovKind::ar1: {
            const double sigma2 = Sigma(0, 0);
            const double rho = m > 1 ? Sigma(0, 1) / sigma2 : 0.0;
            out.cov.params = {sigma2, rho};
            break;
        }
        case CovKind::arh1: {
            out.cov.params.resize(m + 1);
            for (std::size_t i = 0; i < m; ++i) out.cov.params[i] = Sigma(i, i);
            out.cov.params[m] =
                m > 1 ? Sigma(0, 1) / std::sqrt(Sigma(0, 0) * Sigma(1, 1)) : 0.0;
            break;
        }
        case CovKind::un: {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j <= i; ++j) out.cov.params.push_back(Sigma(i, j));
            break;
        }
    }

    const auto terms = canonical_terms(spec);
    out.term_masks = terms;
    out.beta.resize(ctx.p);
    out.beta[0] = {"(intercept)", opt.eval.beta[0]};
    for (std::size_t t = 0; t < terms.size(); ++t)
        out.beta[t + 1] = {ModelSpec::label(terms[t]), opt.eval.beta[t + 1]};

    out.logLik = opt.logLik;
    out.n_obs = data.n_obs();
    out.n_subjects = data.n_subjects;
    out.p_fixed = ctx.p;
    out.k = ctx.p + out.cov.n_params(m);
    const auto ic = information_criteria(out.logLik, out.k, out.n_obs);
    out.aic = ic.first;
    out.bic = ic.second;

    if (out.n_obs <= ctx.p) throw DesignError("more fixed-effect parameters than observations");

    // Coefficient covariance with a REML-style scale correction so classical
    // balanced-ANOVA F statistics are reproduced exactly.
    la::Mat cov = la::inverse_spd(opt.eval.xsx);
    const double adj = double(out.n_obs) / double(out.n_obs - ctx.p);
    for (auto& v : cov.a) v *= adj;
    out.coef_cov = cov;

    out.fitted.resize(out.n_obs);
    out.residuals.resize(out.n_obs);
    for (std::size_t kk = 0; kk < data.n_subjects; ++kk)
        for (std::size_t j = 0; j < m; ++j) {
            double fit_v = opt.eval.beta[0];
            for (std::size_t t = 0; t < terms.size(); ++t)
                fit_v += opt.eval.beta[t + 1] *
                         design_value(terms[t], data.group[kk], data.pos[j]);
            out.fitted[kk * m + j] = fit_v;
            out.residuals[kk * m + j] = data.y[kk * m + j] - fit_v;
        }
    return out;
}

std::pair<double, double> information_criteria(double logLik, std::size_t k,
                                               std::size_t n_obs) {
    const double aic = -2.0 * logLik + 2.0 * double(k);
    const double bic = -2.0 * logLik + double(k) * std::log(double(n_obs));
    return {aic, bic};
}

LrtResult lrt_values(double logLik_nested, std::size_t k_nested, double logLik_full,
                     std::size_t k_full) {
    LrtResult r;
    r.statistic = std::max(0.0, 2.0 * (logLik_full - logLik_nested));
    r.df = k_full >= k_nested ? k_full - k_nested : 0;
    if (r.df == 0) {
        r.p = r.statistic <= 1e-12 ? 1.0 : 0.0;
    } else {
        r.p = dist::chi2_sf(r.statistic, double(r.df));
    }
    return r;
}

LrtResult lrt(const MixedModelFit& nested, const MixedModelFit& full) {
    const auto pair_ok = [](CovKind a, CovKind b) {
        if (a == b) return true;
        if (b == CovKind::un) return true;                       // everything nests in UN
        if (a == CovKind::ar1 && b == CovKind::arh1) return true;
        return false;
    };
    if (!pair_ok(nested.cov.kind, full.cov.kind))
        throw NotNested(std::string("covariance ") + to_string(nested.cov.kind) +
                        " is not nested in " + to_string(full.cov.kind));
    if (nested.p_fixed != full.p_fixed || nested.n_obs != full.n_obs)
        throw NotNested("nested and full fits must share fixed effects and data");
    return lrt_values(nested.logLik, nested.k, full.logLik, full.k);
}

std::vector<FTest> f_tests(const MixedModelFit& fit) {
    std::vector<FTest> out;
    const std::size_t n_between =
        [&] {
            std::size_t c = 1; // intercept
            for (unsigned t : fit.term_masks)
                if ((t & (kS | kT)) == 0) ++c;
            return c;
        }();
    std::size_t n_within = 0;
    for (unsigned t : fit.term_masks)
        if (t & (kS | kT)) ++n_within;

    for (std::size_t i = 0; i < fit.term_masks.size(); ++i) {
        const unsigned mask = fit.term_masks[i];
        const std::size_t col = i + 1;
        FTest ft;
        ft.term = ModelSpec::label(mask);
        ft.num_df = 1.0;
        const double var = fit.coef_cov(col, col);
        const double b = fit.beta[col].estimate;
        ft.F = var > 0.0 ? b * b / var : 0.0;
        const bool within = (mask & (kS | kT)) != 0;
        double den;
        if (within) {
            den = double(fit.n_obs) - double(fit.n_subjects) - double(n_within);
        } else {
            den = double(fit.n_subjects) - double(n_between);
        }
        ft.den_df = std::max(1.0, den);
        ft.p = dist::f_sf(ft.F, ft.num_df, ft.den_df);
        out.push_back(std::move(ft));
    }
    return out;
}

} // namespace morph::mixed
