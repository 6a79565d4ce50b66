#pragma once

// Incremental generation of near-orthogonal unit anchor vectors, one per
// class. Vectors of finished tasks are frozen; extensions only append.
// Below the dimension ceiling new vectors are orthonormalized exactly;
// above it they come from projected subgradient descent on the summed
// |cos| penalty over new-new and new-old pairs, started from a spread
// configuration and keeping the iterate with the smallest worst-case |cos|.

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/io.hpp"
#include "dcnet/numerics.hpp"

namespace dcnet {

struct GeneratorConfig {
    double max_cosine = 0.1;
    double step_size = 0.5;
    int max_iterations = 4000;
    int restarts = 4;
    std::uint64_t seed = 1;
};

struct TaskSpan {
    std::size_t start = 0;
    std::size_t count = 0;
};

struct BasisSet {
    std::size_t dim = 0;
    std::vector<Vec> vectors;           // one unit vector per global class
    std::map<int, TaskSpan> task_offsets;

    std::size_t size() const { return vectors.size(); }

    const TaskSpan& span(int task_id) const {
        auto it = task_offsets.find(task_id);
        if (it == task_offsets.end())
            throw configuration_error("basis: unknown task id " + std::to_string(task_id));
        return it->second;
    }

    // Anchor vectors of one task, in local class order.
    std::vector<Vec> task_block(int task_id) const {
        const TaskSpan& s = span(task_id);
        return std::vector<Vec>(vectors.begin() + static_cast<std::ptrdiff_t>(s.start),
                                vectors.begin() + static_cast<std::ptrdiff_t>(s.start + s.count));
    }
};

namespace detail {

// Worst and mean |cos| over pairs where at least one side is a new vector.
inline double worst_new_cosine(const std::vector<Vec>& old_v, const std::vector<Vec>& new_v) {
    double worst = 0.0;
    for (std::size_t i = 0; i < new_v.size(); ++i) {
        for (const auto& o : old_v) worst = std::max(worst, std::abs(dot(new_v[i], o)));
        for (std::size_t j = 0; j < i; ++j)
            worst = std::max(worst, std::abs(dot(new_v[i], new_v[j])));
    }
    return worst;
}

inline double coherence_penalty(const std::vector<Vec>& old_v, const std::vector<Vec>& new_v) {
    double p = 0.0;
    for (std::size_t i = 0; i < new_v.size(); ++i) {
        for (const auto& o : old_v) p += std::abs(dot(new_v[i], o));
        for (std::size_t j = 0; j < i; ++j) p += std::abs(dot(new_v[i], new_v[j]));
    }
    return p;
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Unit vector with equal weight on every frame direction; the sign pattern
// is chosen greedily (best of a fixed candidate budget) to minimize the
// worst overlap against the vectors placed so far.
inline Vec flat_against_frame(const std::vector<Vec>& frame, const std::vector<Vec>& old_v,
                              const std::vector<Vec>& placed, RngStream& rng) {
    const std::size_t d = frame.front().size();
    const double w = 1.0 / std::sqrt(static_cast<double>(frame.size()));
    Vec best;
    double best_worst = 2.0;
    for (int cand = 0; cand < 32; ++cand) {
        Vec v(d, 0.0);
        for (const auto& q : frame) {
            const double s = rng.uniform() < 0.5 ? -w : w;
            for (std::size_t k = 0; k < d; ++k) v[k] += s * q[k];
        }
        v = unit_normalize(v);
        double worst = 0.0;
        for (const auto& o : old_v) worst = std::max(worst, std::abs(dot(v, o)));
        for (const auto& p : placed) worst = std::max(worst, std::abs(dot(v, p)));
        if (worst < best_worst) {
            best_worst = worst;
            best = std::move(v);
        }
    }
    return best;
}

// Orthonormal span of the given vectors (modified Gram-Schmidt, dependent
// directions dropped).
inline std::vector<Vec> orthonormal_span(const std::vector<Vec>& vs) {
    std::vector<Vec> q;
    for (const auto& v : vs) {
        Vec r = v;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& u : q) {
                const double c = dot(r, u);
                for (std::size_t k = 0; k < r.size(); ++k) r[k] -= c * u[k];
            }
        const double n = norm2(r);
        if (n > 1e-10) {
            for (double& x : r) x /= n;
            q.push_back(std::move(r));
        }
    }
    return q;
}

}  // namespace detail

// Appends new_class_count unit vectors to the basis as the next task's block.
// Existing vectors are copied bit-identically. If the total still fits in the
// ambient dimension the new block is exactly orthonormal to everything;
// otherwise the summed-|cos| penalty is minimized by projected subgradient
// descent with a backtracking step size (penalty never increases within a
// restart). Throws generation_failure with the best worst-case cosine if
// max_cosine cannot be met.
inline BasisSet extend(const BasisSet& basis, std::size_t new_class_count,
                       const GeneratorConfig& cfg) {
    if (new_class_count < 1)
        throw configuration_error("basis extend: new_class_count must be >= 1");
    if (basis.dim < 1) throw configuration_error("basis extend: dim must be >= 1");
    if (!(cfg.max_cosine >= 0.0 && cfg.max_cosine < 1.0))
        throw configuration_error("basis extend: max_cosine must lie in [0,1)");
    if (cfg.max_iterations < 1)
        throw configuration_error("basis extend: max_iterations must be >= 1");

    const std::size_t d = basis.dim;
    const std::size_t old_n = basis.vectors.size();
    RngStream rng(cfg.seed, stream_id(0xBA515u, old_n, new_class_count));

    std::vector<Vec> fresh;
    fresh.reserve(new_class_count);

    if (old_n + new_class_count <= d) {
        // Exact regime: project random draws onto the orthogonal complement.
        std::vector<Vec> scratch = detail::orthonormal_span(basis.vectors);
        while (fresh.size() < new_class_count) {
            Vec v = rng.normal_vec(d);
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& u : scratch) {
                    const double c = dot(v, u);
                    for (std::size_t k = 0; k < d; ++k) v[k] -= c * u[k];
                }
            const double n = norm2(v);
            if (n < 1e-6) continue;  // degenerate draw, take another
            for (double& x : v) x /= n;
            scratch.push_back(v);
            fresh.push_back(std::move(v));
        }
    } else {
        // Oversubscribed regime: joint minimization of the coherence penalty.
        // The summed penalty does not control the worst pair (it can prefer
        // near-duplicates over spread vectors), so the first restart begins
        // from a spread configuration: the orthogonal complement is filled
        // exactly and the overflow starts flat against the full frame. Across
        // restarts and iterations the iterate with the smallest worst-case
        // |cos| wins.
        double best_worst = 2.0;
        std::vector<Vec> best;
        bool ok = false;
        for (int restart = 0; restart < std::max(1, cfg.restarts) && !ok; ++restart) {
            std::vector<Vec> cur;
            cur.reserve(new_class_count);
            if (restart == 0) {
                std::vector<Vec> frame = detail::orthonormal_span(basis.vectors);
                while (frame.size() < d && cur.size() < new_class_count) {
                    Vec v = rng.normal_vec(d);
                    for (int pass = 0; pass < 2; ++pass)
                        for (const auto& u : frame) {
                            const double c = dot(v, u);
                            for (std::size_t k = 0; k < d; ++k) v[k] -= c * u[k];
                        }
                    const double n = norm2(v);
                    if (n < 1e-6) continue;
                    for (double& x : v) x /= n;
                    frame.push_back(v);
                    cur.push_back(std::move(v));
                }
                while (cur.size() < new_class_count)
                    cur.push_back(detail::flat_against_frame(frame, basis.vectors, cur, rng));
            } else {
                cur.resize(new_class_count);
                for (auto& v : cur) v = unit_normalize(rng.normal_vec(d));
            }
            double pen = detail::coherence_penalty(basis.vectors, cur);
            double step = cfg.step_size > 0.0 ? cfg.step_size : 0.5;
            for (int it = 0; it < cfg.max_iterations; ++it) {
                const double worst_now = detail::worst_new_cosine(basis.vectors, cur);
                if (worst_now < best_worst) {
                    best_worst = worst_now;
                    best = cur;
                }
                if (worst_now <= cfg.max_cosine) break;
                // Subgradient of the penalty wrt each new vector, projected
                // onto the sphere's tangent space.
                std::vector<Vec> grad(new_class_count, Vec(d, 0.0));
                for (std::size_t i = 0; i < new_class_count; ++i) {
                    for (const auto& o : basis.vectors) {
                        const double s = detail::sgn(dot(cur[i], o));
                        for (std::size_t k = 0; k < d; ++k) grad[i][k] += s * o[k];
                    }
                    for (std::size_t j = 0; j < new_class_count; ++j) {
                        if (j == i) continue;
                        const double s = detail::sgn(dot(cur[i], cur[j]));
                        for (std::size_t k = 0; k < d; ++k) grad[i][k] += s * cur[j][k];
                    }
                    const double radial = dot(grad[i], cur[i]);
                    for (std::size_t k = 0; k < d; ++k) grad[i][k] -= radial * cur[i][k];
                }
                bool accepted = false;
                for (int bt = 0; bt < 30; ++bt) {
                    std::vector<Vec> trial(new_class_count);
                    bool valid = true;
                    for (std::size_t i = 0; i < new_class_count && valid; ++i) {
                        Vec t = cur[i];
                        for (std::size_t k = 0; k < d; ++k) t[k] -= step * grad[i][k];
                        const double n = norm2(t);
                        if (n < 1e-12) {
                            valid = false;
                            break;
                        }
                        for (double& x : t) x /= n;
                        trial[i] = std::move(t);
                    }
                    const double tp =
                        valid ? detail::coherence_penalty(basis.vectors, trial) : pen + 1.0;
                    if (valid && tp <= pen) {
                        cur = std::move(trial);
                        pen = tp;
                        step = std::min(step * 1.25, 2.0);
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!accepted || step < 1e-14) break;  // stalled at a stationary point
            }
            const double worst = detail::worst_new_cosine(basis.vectors, cur);
            if (worst < best_worst) {
                best_worst = worst;
                best = cur;
            }
            if (best_worst <= cfg.max_cosine) ok = true;
        }
        if (!ok)
            throw generation_failure("basis extend: could not reach max_cosine " +
                                         fmt17(cfg.max_cosine) + ", best worst-case |cos| " +
                                         fmt17(best_worst),
                                     best_worst);
        fresh = std::move(best);
    }

    BasisSet out = basis;
    const int next_task =
        out.task_offsets.empty() ? 0 : out.task_offsets.rbegin()->first + 1;
    out.task_offsets[next_task] = TaskSpan{old_n, new_class_count};
    for (auto& v : fresh) out.vectors.push_back(std::move(v));
    return out;
}

struct PairBlockStats {
    double max_abs_cosine = 0.0;
    double mean_abs_cosine = 0.0;
    std::size_t pair_count = 0;
};

struct OrthogonalityReport {
    double max_abs_cosine = 0.0;
    double mean_abs_cosine = 0.0;
    std::size_t worst_i = 0;
    std::size_t worst_j = 0;
    std::map<std::pair<int, int>, PairBlockStats> task_blocks;
};

inline OrthogonalityReport orthogonality_report(const BasisSet& basis) {
    if (basis.size() < 2)
        throw precondition_error("orthogonality_report: needs at least 2 vectors");
    OrthogonalityReport rep;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = i + 1; j < basis.size(); ++j) {
            const double c = std::abs(dot(basis.vectors[i], basis.vectors[j]));
            sum += c;
            ++pairs;
            if (c >= rep.max_abs_cosine) {
                rep.max_abs_cosine = c;
                rep.worst_i = i;
                rep.worst_j = j;
            }
        }
    rep.mean_abs_cosine = sum / static_cast<double>(pairs);
    for (const auto& [ta, sa] : basis.task_offsets)
        for (const auto& [tb, sb] : basis.task_offsets) {
            if (tb < ta) continue;
            PairBlockStats st;
            double bsum = 0.0;
            for (std::size_t i = sa.start; i < sa.start + sa.count; ++i) {
                const std::size_t j0 = (ta == tb) ? i + 1 : sb.start;
                for (std::size_t j = j0; j < sb.start + sb.count; ++j) {
                    const double c = std::abs(dot(basis.vectors[i], basis.vectors[j]));
                    st.max_abs_cosine = std::max(st.max_abs_cosine, c);
                    bsum += c;
                    ++st.pair_count;
                }
            }
            if (st.pair_count > 0) {
                st.mean_abs_cosine = bsum / static_cast<double>(st.pair_count);
                rep.task_blocks[{ta, tb}] = st;
            }
        }
    return rep;
}

// Text container: round-trips bit-identically (17-digit decimals).
inline std::string save_basis(const BasisSet& basis) {
    std::ostringstream out;
    out << "dcnet-basis 1\n";
    out << "dim " << basis.dim << "\n";
    out << "count " << basis.size() << "\n";
    out << "tasks " << basis.task_offsets.size() << "\n";
    for (const auto& [tid, span] : basis.task_offsets)
        out << "task " << tid << " " << span.start << " " << span.count << "\n";
    for (const auto& v : basis.vectors) {
        out << "v";
        for (double x : v) out << " " << fmt17(x);
        out << "\n";
    }
    return out.str();
}

inline BasisSet load_basis(const std::string& text) {
    std::istringstream in(text);
    std::string tag, ver;
    in >> tag >> ver;
    if (tag != "dcnet-basis" || ver != "1")
        throw checkpoint_error("basis container: bad header");
    BasisSet b;
    std::size_t count = 0, ntasks = 0;
    in >> tag >> b.dim;
    if (tag != "dim") throw checkpoint_error("basis container: expected dim");
    in >> tag >> count;
    if (tag != "count") throw checkpoint_error("basis container: expected count");
    in >> tag >> ntasks;
    if (tag != "tasks") throw checkpoint_error("basis container: expected tasks");
    for (std::size_t t = 0; t < ntasks; ++t) {
        int tid;
        TaskSpan span;
        in >> tag >> tid >> span.start >> span.count;
        if (tag != "task") throw checkpoint_error("basis container: expected task row");
        b.task_offsets[tid] = span;
    }
    for (std::size_t i = 0; i < count; ++i) {
        in >> tag;
        if (tag != "v") throw checkpoint_error("basis container: expected vector row");
        Vec v(b.dim);
        for (auto& x : v) in >> x;
        b.vectors.push_back(std::move(v));
    }
    if (!in) throw checkpoint_error("basis container: truncated");
    return b;
}

}  // namespace dcnet
