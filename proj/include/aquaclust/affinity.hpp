#pragma once

#include <cstddef>
#include <vector>

#include "aquaclust/gower.hpp"

namespace aquaclust {

// Responsibility / availability messages of one iteration.
struct MessageState {
    std::size_t n = 0;
    std::vector<double> responsibility;  // row-major n*n
    std::vector<double> availability;    // row-major n*n, starts at zero
    std::size_t iteration = 0;
};

struct ClusterResult {
    std::vector<std::size_t> exemplars;  // ascending record indices
    std::vector<std::size_t> labels;     // per record: its exemplar's index
    std::size_t iterations_run = 0;
    bool converged = false;
    // Sum of member-to-exemplar similarities plus the exemplar preferences.
    double net_similarity = 0.0;

    std::size_t cluster_count() const { return exemplars.size(); }
};

/// One responsibility sweep: r_ik = s_ik - max_{k' != k}(a_ik' + s_ik').
std::vector<double> update_responsibilities(const SimilarityMatrix& S,
                                            const std::vector<double>& availability);

/// One availability sweep:
///   a_ik = min(0, r_kk + sum_{i' not in {i,k}} max(0, r_i'k))   (i != k)
///   a_kk = sum_{i' != k} max(0, r_i'k)
std::vector<double> update_availabilities(const std::vector<double>& responsibility,
                                          std::size_t n);

/// Entrywise gamma * prev + (1 - gamma) * fresh with gamma in [0.5, 1).
std::vector<double> damp(const std::vector<double>& prev,
                         const std::vector<double>& fresh, double gamma);

/// Reads the converged messages: candidate exemplars are the points with
/// positive a_kk + r_kk; every other point joins its most similar exemplar
/// (ties to the lowest index). An empty candidate set falls back to the
/// column of the largest a + r entry as the lone exemplar.
ClusterResult extract_clusters(const std::vector<double>& responsibility,
                               const std::vector<double>& availability,
                               const SimilarityMatrix& S);

struct ApOptions {
    double gamma = 0.6;
    std::size_t max_iter = 1000;
    // Iterations the candidate exemplar set must stay unchanged to declare
    // convergence.
    std::size_t stable_window = 15;
};

struct IterationTracePoint {
    std::size_t iteration;
    std::size_t exemplar_count;
    double net_similarity;
};

/// Damped message passing to convergence (or max_iter): each iteration
/// refreshes R from (S, A), damps it, then refreshes A from the damped R and
/// damps that too. Deterministic for fixed inputs.
ClusterResult run_ap(const SimilarityMatrix& S, const ApOptions& opts = {},
                     std::vector<IterationTracePoint>* trace = nullptr);

}  // namespace aquaclust
