#include "aquaclust/gower.hpp"

#include <algorithm>
#include <cmath>

#include "aquaclust/errors.hpp"

namespace aquaclust {

double numeric_dissim(double x_i, double x_j, double range) {
    if (range == 0.0) return 0.0;
    return std::abs(x_i - x_j) / range;
}

double dice_dissim(std::span<const std::uint8_t> dummies_i,
                   std::span<const std::uint8_t> dummies_j, bool* matching_absent) {
    if (dummies_i.size() != dummies_j.size())
        throw ParameterError("dice_dissim: dummy vectors differ in length");
    std::size_t tp = 0, mismatch = 0;
    for (std::size_t c = 0; c < dummies_i.size(); ++c) {
        if (dummies_i[c] && dummies_j[c]) ++tp;
        else if (dummies_i[c] != dummies_j[c]) ++mismatch;
    }
    if (matching_absent) *matching_absent = false;
    std::size_t denom = 2 * tp + mismatch;
    if (denom == 0) {
        if (matching_absent) *matching_absent = true;
        return 0.0;
    }
    return static_cast<double>(mismatch) / static_cast<double>(denom);
}

namespace {

struct ActiveAttributes {
    std::vector<std::size_t> numeric;  // schema indices
    std::vector<const EncodedMatrix::Group*> categorical;
};

ActiveAttributes find_active(const Dataset& d, const EncodedMatrix& enc) {
    ActiveAttributes act;
    for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
        const Attribute& attr = d.schema.attributes[a];
        if (attr.is_constant()) continue;
        if (attr.kind == AttributeKind::Numeric) act.numeric.push_back(a);
    }
    for (const auto& g : enc.groups)
        if (g.categories.size() >= 2) act.categorical.push_back(&g);
    return act;
}

double pair_distance(const Dataset& d, const EncodedMatrix& enc,
                     const ActiveAttributes& act, std::size_t i, std::size_t j,
                     DiceMode mode) {
    double sum = 0.0;
    for (std::size_t a : act.numeric) {
        const Attribute& attr = d.schema.attributes[a];
        sum += numeric_dissim(d.records[i].num(a), d.records[j].num(a), attr.range());
    }
    std::size_t n_active = act.numeric.size() + act.categorical.size();
    if (!act.categorical.empty()) {
        if (mode == DiceMode::PerAttribute) {
            for (const EncodedMatrix::Group* g : act.categorical)
                sum += dice_dissim(enc.group_row(*g, i), enc.group_row(*g, j));
        } else {
            // One Dice across all dummies, standing in for every categorical
            // attribute with the same total weight as the per-attribute mode.
            double dice = dice_dissim(enc.row(i), enc.row(j));
            sum += dice * static_cast<double>(act.categorical.size());
        }
    }
    return sum / static_cast<double>(n_active);
}

}  // namespace

double gower_pair(const Dataset& d, const EncodedMatrix& enc, std::size_t i,
                  std::size_t j, DiceMode mode) {
    ActiveAttributes act = find_active(d, enc);
    if (act.numeric.empty() && act.categorical.empty())
        throw ParameterError("gower: no active (non-constant) attributes");
    return pair_distance(d, enc, act, i, j, mode);
}

DissimilarityMatrix gower_matrix(const Dataset& d, const EncodedMatrix& enc,
                                 DiceMode mode) {
    ActiveAttributes act = find_active(d, enc);
    if (act.numeric.empty() && act.categorical.empty())
        throw ParameterError("gower: no active (non-constant) attributes");

    DissimilarityMatrix D;
    D.n = d.records.size();
    D.d.assign(D.n * D.n, 0.0);
    for (std::size_t i = 0; i < D.n; ++i) {
        for (std::size_t j = i + 1; j < D.n; ++j) {
            double dist = pair_distance(d, enc, act, i, j, mode);
            D.at(i, j) = dist;
            D.at(j, i) = dist;
        }
    }
    return D;
}

SimilarityMatrix to_similarity(const DissimilarityMatrix& D, double theta,
                               const std::optional<std::vector<double>>& preferences) {
    if (theta >= 0.0)
        throw ParameterError("to_similarity: theta must be negative");
    if (preferences && preferences->size() != D.n)
        throw ParameterError("to_similarity: preference count does not match matrix size");

    SimilarityMatrix S;
    S.n = D.n;
    S.s.assign(S.n * S.n, 0.0);
    for (std::size_t i = 0; i < S.n; ++i)
        for (std::size_t j = 0; j < S.n; ++j)
            if (i != j) S.at(i, j) = theta * D.at(i, j);

    if (preferences) {
        for (std::size_t k = 0; k < S.n; ++k) S.at(k, k) = (*preferences)[k];
        return S;
    }

    // Median of the off-diagonal similarities (upper triangle is enough by
    // symmetry); even count -> mean of the two middle values.
    std::vector<double> off;
    off.reserve(S.n * (S.n - 1) / 2);
    for (std::size_t i = 0; i < S.n; ++i)
        for (std::size_t j = i + 1; j < S.n; ++j) off.push_back(S.at(i, j));
    double median = 0.0;
    if (!off.empty()) {
        std::sort(off.begin(), off.end());
        std::size_t m = off.size();
        median = (m % 2) ? off[m / 2] : 0.5 * (off[m / 2 - 1] + off[m / 2]);
    }
    for (std::size_t k = 0; k < S.n; ++k) S.at(k, k) = median;
    return S;
}

}  // namespace aquaclust
