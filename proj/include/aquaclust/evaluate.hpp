#pragma once

#include <cstddef>
#include <vector>

#include "aquaclust/affinity.hpp"
#include "aquaclust/gower.hpp"

namespace aquaclust {

// Pooled silhouette over all record pairs: d1 is the mean dissimilarity of
// same-cluster pairs, d2 the mean of cross-cluster pairs, and the score is
// (d2 - d1) / max(d1, d2). Returns 0 when there are no cross pairs (single
// cluster) or when both means are 0.
double silhouette_global(const DissimilarityMatrix& D,
                         const std::vector<std::size_t>& labels);

// Standard per-point silhouette, averaged. Singleton points score 0.
// Diagnostic only; selection always uses silhouette_global.
double silhouette_mean(const DissimilarityMatrix& D,
                       const std::vector<std::size_t>& labels);

struct SweepEntry {
    double gamma = 0.0;
    double silhouette = 0.0;
    std::size_t cluster_count = 0;
    bool converged = false;
};

struct SweepResult {
    std::vector<SweepEntry> entries;  // ordered by gamma ascending
    std::size_t best_index = 0;       // max silhouette, ties to smaller gamma
    ClusterResult best_clustering;

    double best_gamma() const { return entries[best_index].gamma; }
};

// {0.5, 0.6, 0.7, 0.8, 0.9}
std::vector<double> default_gamma_grid();

// Runs run_ap once per gamma (other options shared), scores each clustering
// with silhouette_global. workers > 1 runs the gammas concurrently; results
// are identical regardless of worker count.
SweepResult damping_sweep(const SimilarityMatrix& S, const DissimilarityMatrix& D,
                          const std::vector<double>& gamma_grid,
                          const ApOptions& base = {}, std::size_t workers = 1);

}  // namespace aquaclust
