#pragma once

// Numerical verification of the OOD-detection bounds on Gaussian mixtures:
// ES scores, the expectation gap D, the per-pair upper bound, its relaxed
// nearest-component form, the ball-splitting lower-bound estimate for the
// OOD expectation, KL/Pinsker machinery, and the covariance ordering check.
// Monte Carlo estimates carry standard errors; all checks use 3*SE margins.

#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/io.hpp"
#include "dcnet/numerics.hpp"

namespace dcnet {

struct GmmSpec {
    std::size_t dim = 0;
    std::vector<Vec> in_means;
    std::vector<Vec> out_means;
    Mat sigma;

    std::size_t k() const { return in_means.size(); }
    std::size_t t() const { return out_means.size(); }

    void validate() const {
        if (dim < 1 || in_means.empty() || out_means.empty())
            throw configuration_error("gmm spec: needs dim >= 1, k >= 1, T >= 1");
        for (const auto& m : in_means)
            if (m.size() != dim || !all_finite(m))
                throw configuration_error("gmm spec: bad in-mean");
        for (const auto& m : out_means)
            if (m.size() != dim || !all_finite(m))
                throw configuration_error("gmm spec: bad out-mean");
    }
};

// ES(x) = sum_i exp(-1/2 (x - mu_i)' Sigma^{-1} (x - mu_i)), in (0, k].
inline double es_score_chol(const Vec& x, const std::vector<Vec>& in_means,
                            const CholeskyFactor& chol) {
    double s = 0.0;
    for (const auto& mu : in_means) {
        const double d = mahalanobis_chol(x, mu, chol);
        s += std::exp(-0.5 * d * d);
    }
    return s;
}

inline double es_score(const Vec& x, const GmmSpec& spec) {
    spec.validate();
    if (x.size() != spec.dim) throw configuration_error("es_score: dimension mismatch");
    CholeskyFactor chol(spec.sigma);  // non-SPD surfaces as invalid-covariance
    return es_score_chol(x, spec.in_means, chol);
}

struct GapEstimate {
    double d = 0.0;        // E_in[ES] - E_out[ES]
    double se = 0.0;
    double e_in = 0.0;
    double e_in_se = 0.0;
    double e_out = 0.0;
    double e_out_se = 0.0;
    std::size_t samples = 0;
};

namespace detail {

struct MeanVar {
    double mean = 0.0;
    double se = 0.0;
};

// Mean of ES over n draws from the uniform mixture with the given means.
inline MeanVar mc_es_expectation(const GmmSpec& spec, const std::vector<Vec>& mix_means,
                                 const CholeskyFactor& chol, std::size_t n,
                                 RngStream& rng) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t comp = mix_means.size() == 1
                                     ? 0
                                     : static_cast<std::size_t>(
                                           rng.uniform_index(mix_means.size()));
        const Vec g = rng.normal_vec(spec.dim);
        const Vec x = chol.affine(mix_means[comp], g);
        const double v = es_score_chol(x, spec.in_means, chol);
        sum += v;
        sumsq += v * v;
    }
    MeanVar mv;
    mv.mean = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, sumsq / static_cast<double>(n) - mv.mean * mv.mean);
    mv.se = std::sqrt(var / static_cast<double>(n));
    return mv;
}

}  // namespace detail

// D = E_in[ES] - E_out[ES] by Monte Carlo over the uniform mixtures.
inline GapEstimate expected_gap_mc(const GmmSpec& spec, std::size_t n, RngStream& rng) {
    spec.validate();
    if (n < 1000) throw configuration_error("expected_gap_mc: n must be >= 1000");
    CholeskyFactor chol(spec.sigma);
    const detail::MeanVar in = detail::mc_es_expectation(spec, spec.in_means, chol, n, rng);
    const detail::MeanVar out =
        detail::mc_es_expectation(spec, spec.out_means, chol, n, rng);
    GapEstimate g;
    g.e_in = in.mean;
    g.e_in_se = in.se;
    g.e_out = out.mean;
    g.e_out_se = out.se;
    g.d = in.mean - out.mean;
    g.se = std::sqrt(in.se * in.se + out.se * out.se);
    g.samples = n;
    return g;
}

// (1/T) sum_t sum_i alpha_{i,t} with alpha_{i,t} = 1/2 d_M(mu_in_i, mu_out_t).
inline double lemma1_bound(const GmmSpec& spec) {
    spec.validate();
    CholeskyFactor chol(spec.sigma);
    double s = 0.0;
    for (const auto& out : spec.out_means)
        for (const auto& in : spec.in_means)
            s += 0.5 * mahalanobis_chol(in, out, chol);
    return s / static_cast<double>(spec.t());
}

struct Theorem1Bound {
    double value = 0.0;      // second term averaged over each t's nearest component
    double value_max = 0.0;  // second term taken as the worst case over t
    std::vector<std::size_t> nearest;  // i0(t)
};

// Relaxation of the per-pair bound through the nearest IND component:
// (k/2T) sum_t d_M(out_t, in_{i0(t)}) + 1/2 sum_i d_M(in_{i0}, in_i), the
// second term reported both averaged over t and maximized over t. The
// averaged form dominates lemma1_bound by the triangle inequality.
inline Theorem1Bound theorem1_bound_full(const GmmSpec& spec) {
    spec.validate();
    CholeskyFactor chol(spec.sigma);
    Theorem1Bound b;
    double first = 0.0, second_sum = 0.0, second_max = 0.0;
    for (const auto& out : spec.out_means) {
        std::size_t i0 = 0;
        double best = 1e300;
        for (std::size_t i = 0; i < spec.k(); ++i) {
            const double d = mahalanobis_chol(out, spec.in_means[i], chol);
            if (d < best) {
                best = d;
                i0 = i;
            }
        }
        b.nearest.push_back(i0);
        first += best;
        double spread = 0.0;
        for (std::size_t i = 0; i < spec.k(); ++i)
            spread += 0.5 * mahalanobis_chol(spec.in_means[i0], spec.in_means[i], chol);
        second_sum += spread;
        second_max = std::max(second_max, spread);
    }
    const double tcount = static_cast<double>(spec.t());
    b.value = static_cast<double>(spec.k()) / (2.0 * tcount) * first + second_sum / tcount;
    b.value_max =
        static_cast<double>(spec.k()) / (2.0 * tcount) * first + second_max;
    return b;
}

inline double theorem1_bound(const GmmSpec& spec) { return theorem1_bound_full(spec).value; }

// Upper bound on E_out[ES]: for each pair, split the expectation at the
// Mahalanobis ball of radius alpha_{i,t} around out_t. Inside the ball the
// kernel is at most exp(-alpha^2/2); outside it contributes at most the tail
// mass. Ball probabilities are estimated by membership counting: under
// x ~ N(out_t, Sigma), d_M(x, out_t) equals the norm of the standard-normal
// driver.
inline double lower_bound_lemmaA(const GmmSpec& spec, std::size_t n, RngStream& rng) {
    spec.validate();
    if (n < 1000) throw configuration_error("lower_bound_lemmaA: n must be >= 1000");
    CholeskyFactor chol(spec.sigma);
    std::vector<double> norms(n);
    for (std::size_t s = 0; s < n; ++s) norms[s] = norm2(rng.normal_vec(spec.dim));
    double total = 0.0;
    for (const auto& out : spec.out_means)
        for (const auto& in : spec.in_means) {
            const double alpha = 0.5 * mahalanobis_chol(in, out, chol);
            std::size_t inside = 0;
            for (double r : norms)
                if (r < alpha) ++inside;
            const double p_ball = static_cast<double>(inside) / static_cast<double>(n);
            total += (1.0 - p_ball) + std::exp(-0.5 * alpha * alpha);
        }
    return total / static_cast<double>(spec.t());
}

// KL(N(mu1,Sigma) || N(mu2,Sigma)) = 1/2 d_M^2(mu1, mu2).
inline double kl_gaussian(const Vec& mu1, const Vec& mu2, const Mat& sigma) {
    CholeskyFactor chol(sigma);
    const double d = mahalanobis_chol(mu1, mu2, chol);
    return 0.5 * d * d;
}

struct TvReport {
    double tv = 0.0;
    double se = 0.0;
    double kl = 0.0;
    double pinsker_sqrt = 0.0;  // sqrt(KL/2)
    double pinsker_exp = 0.0;   // 1 - exp(-KL)/2
    bool pass = false;          // tv <= min(bounds) + 3*SE
};

// TV estimated from the balanced two-component mixture: with m = (p1+p2)/2,
// TV = 1/2 E_m[|p1 - p2| / m]; the shared covariance cancels all constants
// and the weight is bounded by 2, so the estimator has finite variance.
inline TvReport tv_and_pinsker(const Vec& mu1, const Vec& mu2, const Mat& sigma,
                               std::size_t n, RngStream& rng) {
    if (mu1.size() != mu2.size()) throw configuration_error("tv_and_pinsker: dim mismatch");
    if (n < 1000) throw configuration_error("tv_and_pinsker: n must be >= 1000");
    CholeskyFactor chol(sigma);
    const std::size_t d = mu1.size();
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const bool first = rng.uniform() < 0.5;
        const Vec g = rng.normal_vec(d);
        const Vec x = chol.affine(first ? mu1 : mu2, g);
        const double q1 = [&] {
            const double m = mahalanobis_chol(x, mu1, chol);
            return m * m;
        }();
        const double q2 = [&] {
            const double m = mahalanobis_chol(x, mu2, chol);
            return m * m;
        }();
        const double qmin = std::min(q1, q2);
        const double e1 = std::exp(-0.5 * (q1 - qmin));
        const double e2 = std::exp(-0.5 * (q2 - qmin));
        const double w = std::abs(e1 - e2) / (0.5 * (e1 + e2));
        sum += w;
        sumsq += w * w;
    }
    TvReport rep;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    rep.tv = 0.5 * mean;
    rep.se = 0.5 * std::sqrt(var / static_cast<double>(n));
    rep.kl = kl_gaussian(mu1, mu2, sigma);
    rep.pinsker_sqrt = std::sqrt(rep.kl / 2.0);
    rep.pinsker_exp = 1.0 - 0.5 * std::exp(-rep.kl);
    rep.pass = rep.tv <= std::min(rep.pinsker_sqrt, rep.pinsker_exp) + 3.0 * rep.se;
    return rep;
}

// If Sigma_a <= Sigma_b in the PSD order, the Sigma_a-metric is the larger
// one. The precondition is verified through the smallest eigenvalue of the
// difference; failure to certify it is a precondition error.
inline bool covariance_ordering_check(const Vec& u, const Vec& v, const Mat& sigma_a,
                                      const Mat& sigma_b) {
    if (u.size() != v.size() || sigma_a.rows != sigma_b.rows ||
        sigma_a.rows != u.size() || sigma_a.rows != sigma_a.cols ||
        sigma_b.rows != sigma_b.cols)
        throw configuration_error("covariance_ordering_check: dimension mismatch");
    Mat diff(sigma_a.rows, sigma_a.cols);
    for (std::size_t i = 0; i < diff.data.size(); ++i)
        diff.data[i] = sigma_b.data[i] - sigma_a.data[i];
    const Vec eig = symmetric_eigenvalues(diff);
    if (eig.front() < -1e-10)
        throw precondition_error(
            "covariance_ordering_check: Sigma_b - Sigma_a is not positive semidefinite");
    CholeskyFactor ca(sigma_a), cb(sigma_b);
    const Vec delta = sub(u, v);
    const double qa = ca.quad_form(delta);
    const double qb = cb.quad_form(delta);
    return qa >= qb - 1e-10;
}

// ---------------------------------------------------------------------------
// Randomized spec harness.
// ---------------------------------------------------------------------------

// Random SPD covariance and mean sets with the Mahalanobis spread rescaled
// into [0, 10]; larger separations make every check vacuously small.
inline GmmSpec random_gmm_spec(std::uint64_t seed, std::uint64_t spec_id) {
    RngStream rng(seed, stream_id(0x95ECu, spec_id));
    GmmSpec spec;
    spec.dim = 2 + static_cast<std::size_t>(rng.uniform_index(15));  // 2..16
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_index(6));
    const std::size_t t = 1 + static_cast<std::size_t>(rng.uniform_index(6));
    Mat a(spec.dim, spec.dim);
    for (double& x : a.data) x = rng.normal();
    spec.sigma = Mat(spec.dim, spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i)
        for (std::size_t j = 0; j < spec.dim; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < spec.dim; ++l) s += a(l, i) * a(l, j);
            spec.sigma(i, j) = s / static_cast<double>(spec.dim) + (i == j ? 0.3 : 0.0);
        }
    const double spread = rng.uniform(0.5, 6.0);
    for (std::size_t i = 0; i < k; ++i) {
        Vec m(spec.dim);
        for (double& x : m) x = spread * rng.normal();
        spec.in_means.push_back(std::move(m));
    }
    for (std::size_t i = 0; i < t; ++i) {
        Vec m(spec.dim);
        for (double& x : m) x = spread * rng.normal();
        spec.out_means.push_back(std::move(m));
    }
    // Clamp the worst pairwise Mahalanobis distance to 10 by shrinking all
    // means toward their common centroid.
    CholeskyFactor chol(spec.sigma);
    std::vector<const Vec*> all;
    for (const auto& m : spec.in_means) all.push_back(&m);
    for (const auto& m : spec.out_means) all.push_back(&m);
    double worst = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            worst = std::max(worst, mahalanobis_chol(*all[i], *all[j], chol));
    if (worst > 10.0) {
        Vec centroid(spec.dim, 0.0);
        for (const Vec* m : all)
            for (std::size_t j = 0; j < spec.dim; ++j) centroid[j] += (*m)[j];
        for (double& x : centroid) x /= static_cast<double>(all.size());
        const double shrink = 10.0 / worst;
        auto pull = [&](Vec& m) {
            for (std::size_t j = 0; j < spec.dim; ++j)
                m[j] = centroid[j] + shrink * (m[j] - centroid[j]);
        };
        for (auto& m : spec.in_means) pull(m);
        for (auto& m : spec.out_means) pull(m);
    }
    return spec;
}

struct BoundReport {
    std::uint64_t spec_id = 0;
    std::uint64_t seed = 0;
    std::size_t dim = 0;
    std::size_t k = 0;
    std::size_t t = 0;
    double empirical_d = 0.0;
    double mc_standard_error = 0.0;
    double e_out = 0.0;
    double e_out_se = 0.0;
    double lemma1 = 0.0;
    double theorem1 = 0.0;
    double theorem1_max = 0.0;
    double lower_bound = 0.0;
    std::size_t sample_count = 0;
    bool pass_lemma1 = false;
    bool pass_theorem1 = false;
    bool pass_lower = false;
    bool pass_relaxation = false;

    bool all_pass() const {
        return pass_lemma1 && pass_theorem1 && pass_lower && pass_relaxation;
    }
};

inline BoundReport verify_spec(std::uint64_t seed, std::uint64_t spec_id,
                               std::size_t mc_samples) {
    const GmmSpec spec = random_gmm_spec(seed, spec_id);
    BoundReport rep;
    rep.spec_id = spec_id;
    rep.seed = seed;
    rep.dim = spec.dim;
    rep.k = spec.k();
    rep.t = spec.t();
    RngStream gap_rng(seed, stream_id(0x6A0Bu, spec_id));
    const GapEstimate gap = expected_gap_mc(spec, mc_samples, gap_rng);
    rep.empirical_d = gap.d;
    rep.mc_standard_error = gap.se;
    rep.e_out = gap.e_out;
    rep.e_out_se = gap.e_out_se;
    rep.sample_count = gap.samples;
    rep.lemma1 = lemma1_bound(spec);
    const Theorem1Bound th = theorem1_bound_full(spec);
    rep.theorem1 = th.value;
    rep.theorem1_max = th.value_max;
    RngStream ball_rng(seed, stream_id(0xBA11u, spec_id));
    rep.lower_bound = lower_bound_lemmaA(spec, mc_samples, ball_rng);
    rep.pass_lemma1 = rep.empirical_d <= rep.lemma1 + 3.0 * rep.mc_standard_error;
    rep.pass_theorem1 = rep.empirical_d <= rep.theorem1 + 3.0 * rep.mc_standard_error;
    rep.pass_lower = rep.e_out <= rep.lower_bound + 3.0 * rep.e_out_se;
    rep.pass_relaxation = rep.theorem1 >= rep.lemma1 - 1e-12;
    return rep;
}

// Fans spec ids out to workers; results land in a vector indexed by spec id,
// so the emitted rows are byte-identical for any worker count.
inline std::vector<BoundReport> verify_bounds(std::uint64_t seed, std::size_t n_specs,
                                              std::size_t mc_samples,
                                              std::size_t workers = 1) {
    std::vector<BoundReport> out(n_specs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_specs; ++i) out[i] = verify_spec(seed, i, mc_samples);
        return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n_specs; i += workers)
                out[i] = verify_spec(seed, i, mc_samples);
        });
    for (auto& th : pool) th.join();
    return out;
}

inline std::string bounds_csv(const std::vector<BoundReport>& reports) {
    std::ostringstream out;
    out << "spec_id,seed,dim,k,T,empirical_D,SE,lemma1,theorem1,theorem1_max,"
           "lower_bound,E_out,E_out_SE,samples,pass_lemma1,pass_theorem1,pass_lower,"
           "pass_relaxation\n";
    for (const auto& r : reports) {
        out << r.spec_id << "," << r.seed << "," << r.dim << "," << r.k << "," << r.t << ","
            << fmt17(r.empirical_d) << "," << fmt17(r.mc_standard_error) << ","
            << fmt17(r.lemma1) << "," << fmt17(r.theorem1) << "," << fmt17(r.theorem1_max)
            << "," << fmt17(r.lower_bound) << "," << fmt17(r.e_out) << ","
            << fmt17(r.e_out_se) << "," << r.sample_count << "," << (r.pass_lemma1 ? 1 : 0)
            << "," << (r.pass_theorem1 ? 1 : 0) << "," << (r.pass_lower ? 1 : 0) << ","
            << (r.pass_relaxation ? 1 : 0) << "\n";
    }
    return out.str();
}

struct TvPairReport {
    std::uint64_t pair_id = 0;
    std::size_t dim = 0;
    TvReport tv;
};

// Random equal-covariance pairs for the TV/Pinsker harness.
inline std::vector<TvPairReport> verify_tv_pairs(std::uint64_t seed, std::size_t n_pairs,
                                                 std::size_t mc_samples) {
    std::vector<TvPairReport> out;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        RngStream rng(seed, stream_id(0x70A1u, p));
        const std::size_t dim = 2 + static_cast<std::size_t>(rng.uniform_index(7));
        Mat a(dim, dim);
        for (double& x : a.data) x = rng.normal();
        Mat sigma(dim, dim);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < dim; ++l) s += a(l, i) * a(l, j);
                sigma(i, j) = s / static_cast<double>(dim) + (i == j ? 0.25 : 0.0);
            }
        Vec mu1(dim), mu2(dim);
        for (double& x : mu1) x = rng.uniform(-2.0, 2.0);
        for (double& x : mu2) x = rng.uniform(-2.0, 2.0);
        TvPairReport rep;
        rep.pair_id = p;
        rep.dim = dim;
        RngStream mc(seed, stream_id(0x70A2u, p));
        rep.tv = tv_and_pinsker(mu1, mu2, sigma, mc_samples, mc);
        out.push_back(rep);
    }
    return out;
}

inline std::string tv_pairs_csv(const std::vector<TvPairReport>& reports) {
    std::ostringstream out;
    out << "pair_id,dim,tv,se,kl,pinsker_sqrt,pinsker_exp,pass\n";
    for (const auto& r : reports)
        out << r.pair_id << "," << r.dim << "," << fmt17(r.tv.tv) << "," << fmt17(r.tv.se)
            << "," << fmt17(r.tv.kl) << "," << fmt17(r.tv.pinsker_sqrt) << ","
            << fmt17(r.tv.pinsker_exp) << "," << (r.tv.pass ? 1 : 0) << "\n";
    return out.str();
}

}  // namespace dcnet
