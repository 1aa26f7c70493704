#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aquaclust/dataset.hpp"

namespace aquaclust {

// Dense symmetric pairwise dissimilarity, entries in [0, 1], zero diagonal.
struct DissimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> d;  // row-major n*n

    double at(std::size_t i, std::size_t j) const { return d[i * n + j]; }
    double& at(std::size_t i, std::size_t j) { return d[i * n + j]; }
};

// Negated dissimilarity with the preference on the diagonal.
struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> s;  // row-major n*n, diagonal holds the preferences

    double at(std::size_t i, std::size_t j) const { return s[i * n + j]; }
    double& at(std::size_t i, std::size_t j) { return s[i * n + j]; }
    double preference(std::size_t k) const { return at(k, k); }
};

/// Range-normalized Manhattan distance |x_i - x_j| / range.
/// A constant attribute (range 0) contributes 0.
double numeric_dissim(double x_i, double x_j, double range);

/// Dice dissimilarity (FP + FN) / (2 TP + FP + FN) over paired binary
/// dummies, where TP counts (1,1) pairs and FP/FN the mismatched ones.
/// Two all-zero vectors have no evidence either way; that degenerate case
/// returns 0 and sets *matching_absent when the caller asks for it.
double dice_dissim(std::span<const std::uint8_t> dummies_i,
                   std::span<const std::uint8_t> dummies_j,
                   bool* matching_absent = nullptr);

enum class DiceMode {
    // One Dice value per source attribute (Eq-per-attribute reading;
    // exact 0/1 for one-hot groups).
    PerAttribute,
    // A single Dice over the concatenated dummy vector, weighted in the
    // mean by the number of categorical attributes it stands in for.
    Concatenated,
};

/// Gower distance between records i and j: the mean of per-attribute
/// dissimilarities over the active (non-constant) attributes.
double gower_pair(const Dataset& d, const EncodedMatrix& enc, std::size_t i,
                  std::size_t j, DiceMode mode = DiceMode::PerAttribute);

/// Full pairwise Gower matrix. Throws ParameterError when the schema has no
/// active attribute.
DissimilarityMatrix gower_matrix(const Dataset& d, const EncodedMatrix& enc,
                                 DiceMode mode = DiceMode::PerAttribute);

/// Converts distances to similarities s_ij = theta * d_ij (theta < 0) and
/// writes the preferences on the diagonal: the supplied per-point values, or
/// the median of the off-diagonal similarities when none are given (even
/// count -> mean of the two middle values).
SimilarityMatrix to_similarity(const DissimilarityMatrix& D, double theta = -1.0,
                               const std::optional<std::vector<double>>& preferences = {});

}  // namespace aquaclust
