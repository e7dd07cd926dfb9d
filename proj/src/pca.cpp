#include "morph/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "morph/errors.hpp"

namespace morph::pca {

void symmetric_eigen(const la::Mat& A, std::vector<double>& values, la::Mat& vectors) {
    const std::size_t n = A.rows;
    la::Mat M = A;
    vectors = la::Mat::identity(n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += M(i, j) * M(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(M(p, q)) < 1e-300) continue;
                const double theta = (M(q, q) - M(p, p)) / (2.0 * M(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = M(k, p), mkq = M(k, q);
                    M(k, p) = c * mkp - s * mkq;
                    M(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = M(p, k), mqk = M(q, k);
                    M(p, k) = c * mpk - s * mqk;
                    M(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors(k, p), vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
    }

    values.resize(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = M(i, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<double> sorted(n);
    la::Mat vs(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        sorted[c] = values[order[c]];
        for (std::size_t r = 0; r < n; ++r) vs(r, c) = vectors(r, order[c]);
    }
    values = std::move(sorted);
    vectors = std::move(vs);
}

la::Mat sample_covariance(const la::Mat& data) {
    const std::size_t n = data.rows, q = data.cols;
    if (n < 2) throw InvalidParameter("covariance needs at least two rows");
    std::vector<double> mean(q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) mean[j] += data(i, j);
    for (auto& m : mean) m /= double(n);
    la::Mat C(q, q);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < q; ++a) {
            const double da = data(i, a) - mean[a];
            for (std::size_t b = 0; b < q; ++b) C(a, b) += da * (data(i, b) - mean[b]);
        }
    for (auto& v : C.a) v /= double(n - 1);
    return C;
}

la::Mat sample_correlation(const la::Mat& data) {
    const std::size_t q = data.cols;
    for (std::size_t j = 0; j < q; ++j) {
        double lo = data(0, j), hi = data(0, j);
        for (std::size_t i = 1; i < data.rows; ++i) {
            lo = std::min(lo, data(i, j));
            hi = std::max(hi, data(i, j));
        }
        if (lo == hi) throw DegenerateColumn("zero-variance column in correlation-mode PCA");
    }
    la::Mat C = sample_covariance(data);
    for (std::size_t j = 0; j < q; ++j)
        if (!(C(j, j) > 0.0))
            throw DegenerateColumn("zero-variance column in correlation-mode PCA");
    la::Mat R(q, q);
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = 0; b < q; ++b) R(a, b) = C(a, b) / std::sqrt(C(a, a) * C(b, b));
    return R;
}

PcaResult pca(const la::Mat& data, PcaMode mode) {
    if (data.rows < 5) throw InvalidParameter("pca requires n >= 5 observations");
    const la::Mat M =
        mode == PcaMode::covariance ? sample_covariance(data) : sample_correlation(data);

    PcaResult res;
    res.mode = mode;
    symmetric_eigen(M, res.eigenvalues, res.loadings);

    // sign convention: largest-magnitude entry of each component positive
    const std::size_t q = M.rows;
    for (std::size_t c = 0; c < q; ++c) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < q; ++r)
            if (std::fabs(res.loadings(r, c)) > std::fabs(res.loadings(arg, c))) arg = r;
        if (res.loadings(arg, c) < 0.0)
            for (std::size_t r = 0; r < q; ++r) res.loadings(r, c) = -res.loadings(r, c);
    }

    double total = 0.0;
    for (double v : res.eigenvalues) total += v;
    res.prop_var.resize(q);
    res.cum_prop.resize(q);
    double run = 0.0;
    for (std::size_t c = 0; c < q; ++c) {
        res.prop_var[c] = total > 0.0 ? res.eigenvalues[c] / total : 0.0;
        run += res.prop_var[c];
        res.cum_prop[c] = run;
    }
    return res;
}

} // namespace morph::pca
