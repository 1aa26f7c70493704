#include "aquaclust/evaluate.hpp"

#include <algorithm>
#include <future>
#include <limits>
#include <map>

#include "aquaclust/errors.hpp"

namespace aquaclust {

double silhouette_global(const DissimilarityMatrix& D,
                         const std::vector<std::size_t>& labels) {
    const std::size_t n = D.n;
    if (labels.size() != n)
        throw InputError("silhouette_global: labels length does not match matrix");
    if (n < 2) throw ParameterError("silhouette_global: need at least 2 records");

    double within_sum = 0.0, cross_sum = 0.0;
    std::size_t within_cnt = 0, cross_cnt = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (labels[i] == labels[j]) {
                within_sum += D.at(i, j);
                ++within_cnt;
            } else {
                cross_sum += D.at(i, j);
                ++cross_cnt;
            }
        }

    if (cross_cnt == 0) return 0.0;
    double d1 = within_cnt ? within_sum / static_cast<double>(within_cnt) : 0.0;
    double d2 = cross_sum / static_cast<double>(cross_cnt);
    double denom = std::max(d1, d2);
    if (denom == 0.0) return 0.0;
    return (d2 - d1) / denom;
}

double silhouette_mean(const DissimilarityMatrix& D,
                       const std::vector<std::size_t>& labels) {
    const std::size_t n = D.n;
    if (labels.size() != n)
        throw InputError("silhouette_mean: labels length does not match matrix");
    if (n < 2) throw ParameterError("silhouette_mean: need at least 2 records");

    std::map<std::size_t, std::size_t> sizes;
    for (std::size_t l : labels) ++sizes[l];
    if (sizes.size() < 2) return 0.0;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;  // singleton scores 0
        std::map<std::size_t, double> sums;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[labels[j]] += D.at(i, j);
        double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [l, s] : sums)
            if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
        double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

std::vector<double> default_gamma_grid() { return {0.5, 0.6, 0.7, 0.8, 0.9}; }

SweepResult damping_sweep(const SimilarityMatrix& S, const DissimilarityMatrix& D,
                          const std::vector<double>& gamma_grid,
                          const ApOptions& base, std::size_t workers) {
    if (gamma_grid.empty()) throw ParameterError("damping_sweep: empty gamma grid");
    for (double g : gamma_grid)
        if (!(g >= 0.5 && g < 1.0))
            throw ParameterError("damping_sweep: damping factor must be in [0.5, 1)");
    if (S.n != D.n) throw ParameterError("damping_sweep: matrix dimensions differ");

    std::vector<double> grid = gamma_grid;
    std::sort(grid.begin(), grid.end());

    auto run_one = [&](double gamma) {
        ApOptions opts = base;
        opts.gamma = gamma;
        return run_ap(S, opts);
    };

    std::vector<ClusterResult> results(grid.size());
    if (workers <= 1 || grid.size() == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) results[i] = run_one(grid[i]);
    } else {
        std::vector<std::future<ClusterResult>> futures;
        futures.reserve(grid.size());
        for (double g : grid)
            futures.push_back(std::async(std::launch::async, run_one, g));
        for (std::size_t i = 0; i < grid.size(); ++i) results[i] = futures[i].get();
    }

    SweepResult sweep;
    sweep.entries.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepEntry e;
        e.gamma = grid[i];
        e.silhouette = silhouette_global(D, results[i].labels);
        e.cluster_count = results[i].cluster_count();
        e.converged = results[i].converged;
        sweep.entries.push_back(e);
    }

    sweep.best_index = 0;
    for (std::size_t i = 1; i < sweep.entries.size(); ++i)
        if (sweep.entries[i].silhouette > sweep.entries[sweep.best_index].silhouette)
            sweep.best_index = i;
    sweep.best_clustering = std::move(results[sweep.best_index]);
    return sweep;
}

}  // namespace aquaclust
