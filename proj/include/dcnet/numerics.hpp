#pragma once

// Dense double-precision kernel: vectors, row-major matrices, Cholesky
// factorization, seeded counter-based RNG streams, and a central-difference
// gradient oracle. Everything here is pure and safe to call concurrently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dcnet/errors.hpp"

namespace dcnet {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

// y = A x
inline Vec matvec(const Mat& a, const Vec& x) {
    if (x.size() != a.cols) throw configuration_error("matvec: dimension mismatch");
    Vec y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* row = a.data.data() + i * a.cols;
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw configuration_error("matmul: dimension mismatch");
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            double* crow = c.data.data() + i * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// v / ||v||_2, with the degenerate zero-norm input rejected.
inline Vec unit_normalize(const Vec& v) {
    const double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n))
        throw degenerate_input_error("unit_normalize: zero or non-finite norm");
    Vec r(v.size());
    const double inv = 1.0 / n;
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] * inv;
    return r;
}

// Numerically stable softmax at the given temperature (max-subtraction).
inline Vec softmax(const Vec& logits, double temperature) {
    if (!(temperature > 0.0))
        throw configuration_error("softmax: temperature must be positive");
    Vec out(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : logits) mx = std::max(mx, x / temperature);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] / temperature - mx);
        sum += out[i];
    }
    const double inv = 1.0 / sum;
    for (double& x : out) x *= inv;
    return out;
}

// Cholesky factorization A = L L^T of a symmetric positive definite matrix.
// The factor is the workhorse behind SPD inverses, Mahalanobis distances,
// Gaussian sampling and log-densities.
class CholeskyFactor {
public:
    explicit CholeskyFactor(const Mat& a) : n_(a.rows), l_(a.rows, a.rows) {
        if (a.rows != a.cols)
            throw invalid_covariance_error("cholesky: matrix not square");
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(a(i, j) - a(j, i)) > 1e-10 * (1.0 + std::abs(a(i, j))))
                    throw invalid_covariance_error("cholesky: matrix not symmetric");
        for (std::size_t j = 0; j < n_; ++j) {
            double d = a(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
            if (!(d > 0.0) || !std::isfinite(d))
                throw invalid_covariance_error("cholesky: matrix not positive definite");
            const double lj = std::sqrt(d);
            l_(j, j) = lj;
            for (std::size_t i = j + 1; i < n_; ++i) {
                double s = a(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
                l_(i, j) = s / lj;
            }
        }
    }

    std::size_t dim() const { return n_; }
    const Mat& lower() const { return l_; }

    // Solves L y = b (forward substitution).
    Vec forward_solve(const Vec& b) const {
        Vec y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
            y[i] = s / l_(i, i);
        }
        return y;
    }

    // Solves A x = b.
    Vec solve(const Vec& b) const {
        Vec y = forward_solve(b);
        Vec x(n_);
        for (std::size_t ii = n_; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n_; ++k) s -= l_(k, ii) * x[k];
            x[ii] = s / l_(ii, ii);
        }
        return x;
    }

    // (u)^T A^{-1} (u) computed as ||L^{-1} u||^2.
    double quad_form(const Vec& u) const {
        Vec y = forward_solve(u);
        return dot(y, y);
    }

    double log_det() const {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += std::log(l_(i, i));
        return 2.0 * s;
    }

    // x = mu + L g maps standard normal draws g to N(mu, A).
    Vec affine(const Vec& mu, const Vec& g) const {
        Vec x(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = mu[i];
            for (std::size_t k = 0; k <= i; ++k) s += l_(i, k) * g[k];
            x[i] = s;
        }
        return x;
    }

private:
    std::size_t n_;
    Mat l_;
};

// Factorization-based SPD inverse (result symmetrized).
inline Mat spd_inverse(const Mat& sigma) {
    CholeskyFactor chol(sigma);
    const std::size_t n = sigma.rows;
    Mat inv(n, n);
    Vec e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        Vec col = chol.solve(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = m;
            inv(j, i) = m;
        }
    return inv;
}

// sqrt((u-v)^T sigma_inv (u-v)). The caller is responsible for sigma_inv
// being a valid SPD inverse (factorization failures surface upstream).
inline double mahalanobis(const Vec& u, const Vec& v, const Mat& sigma_inv) {
    if (u.size() != v.size() || u.size() != sigma_inv.rows || sigma_inv.rows != sigma_inv.cols)
        throw configuration_error("mahalanobis: dimension mismatch");
    Vec d = sub(u, v);
    Vec sd = matvec(sigma_inv, d);
    return std::sqrt(std::max(0.0, dot(d, sd)));
}

// Mahalanobis distance given a precomputed Cholesky factor of sigma.
inline double mahalanobis_chol(const Vec& u, const Vec& v, const CholeskyFactor& chol) {
    Vec d = sub(u, v);
    return std::sqrt(std::max(0.0, chol.quad_form(d)));
}

// ---------------------------------------------------------------------------
// RNG. Counter-based: the state advances by a fixed odd constant per draw and
// the output is a bijective mix of the state (splitmix64). Streams are keyed
// by (seed, stream_id); identical keys reproduce identical draw sequences and
// distinct stream ids give statistically independent sequences, so parallel
// workers each derive their own stream.
// ---------------------------------------------------------------------------
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : state_(mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ mix(stream_id + 0xbf58476d1ce4e5b9ULL))),
          have_cached_normal_(false),
          cached_normal_(0.0) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) by rejection (no modulo bias).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw configuration_error("uniform_index: empty range");
        const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller (second draw cached).
    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_normal_ = r * std::sin(a);
        have_cached_normal_ = true;
        return r * std::cos(a);
    }

    Vec normal_vec(std::size_t n) {
        Vec v(n);
        for (double& x : v) x = normal();
        return v;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_index(i)]);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    bool have_cached_normal_;
    double cached_normal_;
};

// Stable stream-id composition for derived streams (purpose + indices).
inline std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(purpose);
    feed(a);
    feed(b);
    return h;
}

// ---------------------------------------------------------------------------
// Finite differences.
// ---------------------------------------------------------------------------
using ScalarFn = std::function<double(const Vec&)>;

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
inline Vec finite_diff_gradient(const ScalarFn& f, const Vec& x, double h) {
    if (!(h > 0.0)) throw configuration_error("finite_diff_gradient: h must be positive");
    Vec g(x.size());
    Vec xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        xp[i] = xi + h;
        const double fp = f(xp);
        xp[i] = xi - h;
        const double fm = f(xp);
        xp[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw evaluation_error("finite_diff_gradient: non-finite function value");
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_coordinate = 0;
    double analytic = 0.0;  // analytic value at the worst coordinate
    double numeric = 0.0;   // numeric value at the worst coordinate
};

// Per-coordinate relative error |a-n| / max(|a|, |n|, floor). The floor keeps
// near-zero coordinates from dominating with pure rounding noise.
inline GradCheckReport grad_check(const ScalarFn& f, const Vec& x, const Vec& analytic,
                                  double h = 1e-5, double floor = 1e-6) {
    const Vec numeric = finite_diff_gradient(f, x, h);
    GradCheckReport rep;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        const double rel = std::abs(analytic[i] - numeric[i]) / denom;
        if (rel >= rep.max_relative_error) {
            rep.max_relative_error = rel;
            rep.worst_coordinate = i;
            rep.analytic = analytic[i];
            rep.numeric = numeric[i];
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi). Used for positive semidefinite
// ordering checks; dimensions here are small.
// ---------------------------------------------------------------------------
inline Vec symmetric_eigenvalues(const Mat& m, int max_sweeps = 64) {
    if (m.rows != m.cols) throw configuration_error("symmetric_eigenvalues: not square");
    const std::size_t n = m.rows;
    Mat a = m;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    Vec eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace dcnet
