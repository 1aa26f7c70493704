#pragma once

// Independent reference implementations the unit and acceptance tests check
// the library against. Everything here is written from the definitions,
// favoring clarity over speed, and must not call the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "aquaclust/cart.hpp"
#include "aquaclust/dataset.hpp"
#include "aquaclust/gower.hpp"

namespace oracles {

// Literal three-loop responsibility update: r_ik = s_ik - max_{k'!=k}(a_ik' + s_ik').
inline std::vector<double> responsibilities(const aquaclust::SimilarityMatrix& S,
                                            const std::vector<double>& A) {
    const std::size_t n = S.n;
    std::vector<double> R(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t kp = 0; kp < n; ++kp)
                if (kp != k) best = std::max(best, A[i * n + kp] + S.at(i, kp));
            R[i * n + k] = S.at(i, k) - best;
        }
    return R;
}

// Literal availability update:
//   a_kk = sum_{i'!=k} max(0, r_i'k)
//   a_ik = min(0, r_kk + sum_{i' not in {i,k}} max(0, r_i'k))
inline std::vector<double> availabilities(const std::vector<double>& R,
                                          std::size_t n) {
    std::vector<double> A(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) {
                double sum = 0.0;
                for (std::size_t ip = 0; ip < n; ++ip)
                    if (ip != k) sum += std::max(0.0, R[ip * n + k]);
                A[i * n + k] = sum;
            } else {
                double sum = 0.0;
                for (std::size_t ip = 0; ip < n; ++ip)
                    if (ip != i && ip != k) sum += std::max(0.0, R[ip * n + k]);
                A[i * n + k] = std::min(0.0, R[k * n + k] + sum);
            }
        }
    return A;
}

// Exhaustive facility-location optimum: every non-empty exemplar subset,
// every point assigned to its best exemplar, plus exemplar preferences.
struct FacilityOptimum {
    double best = -std::numeric_limits<double>::infinity();
    // Best value attained by a subset whose value differs from `best`.
    double second = -std::numeric_limits<double>::infinity();
    std::size_t optima = 0;  // subsets attaining `best` exactly
    std::vector<std::size_t> best_set;
};

inline FacilityOptimum facility_bruteforce(const aquaclust::SimilarityMatrix& S) {
    const std::size_t n = S.n;
    FacilityOptimum out;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        double value = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                value += S.preference(i);
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k)
                if (mask & (1u << k)) best = std::max(best, S.at(i, k));
            value += best;
        }
        if (value > out.best) {
            out.second = out.best;
            out.best = value;
            out.optima = 1;
            out.best_set.clear();
            for (std::size_t k = 0; k < n; ++k)
                if (mask & (1u << k)) out.best_set.push_back(k);
        } else if (value == out.best) {
            ++out.optima;
        } else if (value > out.second) {
            out.second = value;
        }
    }
    return out;
}

// Gower distance recomputed from the definitions: range-scaled absolute
// difference for numeric attributes; Dice over explicitly built one-hot
// dummy vectors for categorical ones; mean over active attributes.
inline double gower_bruteforce(const aquaclust::Dataset& d, std::size_t i,
                               std::size_t j) {
    using namespace aquaclust;
    double sum = 0.0;
    std::size_t active = 0;
    for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
        const Attribute& attr = d.schema.attributes[a];
        if (attr.kind == AttributeKind::Numeric) {
            if (attr.range() <= 0.0) continue;
            sum += std::abs(d.records[i].num(a) - d.records[j].num(a)) / attr.range();
            ++active;
        } else {
            if (attr.categories.size() < 2) continue;
            std::vector<int> u(attr.categories.size(), 0), v(attr.categories.size(), 0);
            for (std::size_t c = 0; c < attr.categories.size(); ++c) {
                if (attr.categories[c] == d.records[i].cat(a)) u[c] = 1;
                if (attr.categories[c] == d.records[j].cat(a)) v[c] = 1;
            }
            int tp = 0, fp = 0, fn = 0;
            for (std::size_t c = 0; c < u.size(); ++c) {
                if (u[c] == 1 && v[c] == 1) ++tp;
                if (u[c] == 1 && v[c] == 0) ++fp;
                if (u[c] == 0 && v[c] == 1) ++fn;
            }
            int denom = 2 * tp + fp + fn;
            sum += denom == 0 ? 0.0 : static_cast<double>(fp + fn) / denom;
            ++active;
        }
    }
    return active == 0 ? 0.0 : sum / static_cast<double>(active);
}

// Exhaustive best-split search over every column and every midpoint, gain
// recomputed by direct partition and recount.
struct SplitOracle {
    bool found = false;
    std::size_t column = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double gini_of(const std::vector<std::size_t>& labels) {
    if (labels.empty()) return 0.0;
    std::vector<std::size_t> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
            ++run;
            continue;
        }
        double p = static_cast<double>(run) / sorted.size();
        sum += p * p;
        run = 1;
    }
    return 1.0 - sum;
}

inline SplitOracle split_bruteforce(const aquaclust::FeatureTable& t,
                                    const std::vector<std::size_t>& labels) {
    SplitOracle out;
    const double parent = gini_of(labels);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        std::vector<double> values;
        for (std::size_t r = 0; r < t.rows; ++r) values.push_back(t.at(r, c));
        std::vector<double> distinct = values;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (std::size_t v = 0; v + 1 < distinct.size(); ++v) {
            double threshold = (distinct[v] + distinct[v + 1]) / 2.0;
            std::vector<std::size_t> left, right;
            for (std::size_t r = 0; r < t.rows; ++r)
                (t.at(r, c) <= threshold ? left : right).push_back(labels[r]);
            if (left.empty() || right.empty()) continue;
            double child =
                (static_cast<double>(left.size()) / t.rows) * gini_of(left) +
                (static_cast<double>(right.size()) / t.rows) * gini_of(right);
            double gain = parent - child;
            if (gain > 0.0 && (!out.found || gain > out.gain)) {
                out.found = true;
                out.column = c;
                out.threshold = threshold;
                out.gain = gain;
            }
        }
    }
    return out;
}

// Deterministic generator used by the property tests; raw 64-bit engine
// output scaled by hand so sequences do not depend on library distribution
// internals.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(gen() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
};

}  // namespace oracles
