#include "aquaclust/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aquaclust/errors.hpp"

namespace aquaclust {

std::vector<double> update_responsibilities(const SimilarityMatrix& S,
                                            const std::vector<double>& availability) {
    const std::size_t n = S.n;
    if (n < 2) throw ParameterError("update_responsibilities: need at least 2 points");
    if (availability.size() != n * n)
        throw ParameterError("update_responsibilities: availability size mismatch");

    std::vector<double> R(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* s_row = S.s.data() + i * n;
        const double* a_row = availability.data() + i * n;
        // Largest and second largest of a_ik + s_ik over the row.
        double max1 = -std::numeric_limits<double>::infinity();
        double max2 = -std::numeric_limits<double>::infinity();
        std::size_t arg1 = 0;
        for (std::size_t k = 0; k < n; ++k) {
            double v = a_row[k] + s_row[k];
            if (v > max1) {
                max2 = max1;
                max1 = v;
                arg1 = k;
            } else if (v > max2) {
                max2 = v;
            }
        }
        double* r_row = R.data() + i * n;
        for (std::size_t k = 0; k < n; ++k)
            r_row[k] = s_row[k] - (k == arg1 ? max2 : max1);
    }
    return R;
}

std::vector<double> update_availabilities(const std::vector<double>& responsibility,
                                          std::size_t n) {
    if (n < 2) throw ParameterError("update_availabilities: need at least 2 points");
    if (responsibility.size() != n * n)
        throw ParameterError("update_availabilities: responsibility size mismatch");

    // Column sums of the positive off-diagonal responsibilities.
    std::vector<double> pos_sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r_row = responsibility.data() + i * n;
        for (std::size_t k = 0; k < n; ++k)
            if (i != k && r_row[k] > 0.0) pos_sum[k] += r_row[k];
    }

    std::vector<double> A(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r_row = responsibility.data() + i * n;
        double* a_row = A.data() + i * n;
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) {
                a_row[k] = pos_sum[k];
            } else {
                double sum = pos_sum[k] - std::max(0.0, r_row[k]);
                a_row[k] = std::min(0.0, responsibility[k * n + k] + sum);
            }
        }
    }
    return A;
}

std::vector<double> damp(const std::vector<double>& prev,
                         const std::vector<double>& fresh, double gamma) {
    if (!(gamma >= 0.5 && gamma < 1.0))
        throw ParameterError("damp: damping factor must be in [0.5, 1)");
    if (prev.size() != fresh.size())
        throw ParameterError("damp: matrix dimensions differ");
    std::vector<double> out(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i)
        out[i] = gamma * prev[i] + (1.0 - gamma) * fresh[i];
    return out;
}

namespace {

std::vector<std::size_t> candidate_exemplars(const std::vector<double>& R,
                                             const std::vector<double>& A,
                                             std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n; ++k)
        if (A[k * n + k] + R[k * n + k] > 0.0) out.push_back(k);
    return out;
}

}  // namespace

ClusterResult extract_clusters(const std::vector<double>& responsibility,
                               const std::vector<double>& availability,
                               const SimilarityMatrix& S) {
    const std::size_t n = S.n;
    ClusterResult result;
    if (n == 0) return result;
    if (n == 1) {
        result.exemplars = {0};
        result.labels = {0};
        result.net_similarity = S.preference(0);
        return result;
    }

    std::vector<std::size_t> exemplars = candidate_exemplars(responsibility, availability, n);
    if (exemplars.empty()) {
        // No point accumulated positive evidence; fall back to the column of
        // the globally largest a + r entry.
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                double v = availability[i * n + k] + responsibility[i * n + k];
                if (v > best) {
                    best = v;
                    best_k = k;
                }
            }
        exemplars = {best_k};
    }

    result.exemplars = exemplars;
    result.labels.resize(n);
    std::vector<bool> is_exemplar(n, false);
    for (std::size_t k : exemplars) is_exemplar[k] = true;

    for (std::size_t i = 0; i < n; ++i) {
        if (is_exemplar[i]) {
            result.labels[i] = i;
            continue;
        }
        std::size_t best_k = exemplars.front();
        double best_s = S.at(i, best_k);
        for (std::size_t k : exemplars) {
            double v = S.at(i, k);
            if (v > best_s) {
                best_s = v;
                best_k = k;
            }
        }
        result.labels[i] = best_k;
    }

    double net = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (!is_exemplar[i]) net += S.at(i, result.labels[i]);
    for (std::size_t k : exemplars) net += S.preference(k);
    result.net_similarity = net;
    return result;
}

ClusterResult run_ap(const SimilarityMatrix& S, const ApOptions& opts,
                     std::vector<IterationTracePoint>* trace) {
    const std::size_t n = S.n;
    for (double v : S.s)
        if (!std::isfinite(v))
            throw InputError("run_ap: similarity matrix contains non-finite entries");
    if (!(opts.gamma >= 0.5 && opts.gamma < 1.0))
        throw ParameterError("run_ap: damping factor must be in [0.5, 1)");
    if (opts.max_iter < 1) throw ParameterError("run_ap: max_iter must be >= 1");
    if (opts.stable_window < 1) throw ParameterError("run_ap: stable_window must be >= 1");

    if (n <= 1) {
        ClusterResult trivial;
        trivial.converged = true;
        if (n == 1) {
            trivial.exemplars = {0};
            trivial.labels = {0};
            trivial.net_similarity = S.preference(0);
        }
        return trivial;
    }

    MessageState state;
    state.n = n;
    state.responsibility.assign(n * n, 0.0);
    state.availability.assign(n * n, 0.0);

    std::vector<std::size_t> prev_set;
    bool have_prev_set = false;
    std::size_t run_length = 0;  // consecutive iterations observing the same set
    bool converged = false;

    while (state.iteration < opts.max_iter) {
        state.responsibility =
            damp(state.responsibility, update_responsibilities(S, state.availability),
                 opts.gamma);
        state.availability =
            damp(state.availability, update_availabilities(state.responsibility, n),
                 opts.gamma);
        ++state.iteration;

        std::vector<std::size_t> current =
            candidate_exemplars(state.responsibility, state.availability, n);
        if (current.empty()) {
            // Messages have not surfaced any exemplar yet (typical while
            // heavily damped updates warm up); there is nothing to hold
            // stable, so the window must not start counting.
            run_length = 0;
        } else if (have_prev_set && current == prev_set) {
            ++run_length;
        } else {
            run_length = 1;
        }
        prev_set = std::move(current);
        have_prev_set = true;

        if (trace) {
            ClusterResult snap =
                extract_clusters(state.responsibility, state.availability, S);
            trace->push_back({state.iteration, snap.cluster_count(), snap.net_similarity});
        }

        if (run_length >= opts.stable_window) {
            converged = true;
            break;
        }
    }

    ClusterResult result = extract_clusters(state.responsibility, state.availability, S);
    result.iterations_run = state.iteration;
    result.converged = converged;
    return result;
}

}  // namespace aquaclust
