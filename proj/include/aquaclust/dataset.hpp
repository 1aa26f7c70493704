#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aquaclust {

enum class AttributeKind { Numeric, Categorical };

struct Attribute {
    std::string name;
    AttributeKind kind = AttributeKind::Categorical;
    // Numeric attributes: observed [min, max] in attribute units.
    double min = 0.0;
    double max = 0.0;
    // Categorical attributes: observed category set, first-appearance order.
    std::vector<std::string> categories;

    double range() const { return max - min; }
    bool is_constant() const;
};

struct AttributeSchema {
    std::vector<Attribute> attributes;

    std::optional<std::size_t> index_of(std::string_view name) const;
    // Trimmed, case-insensitive lookup (CSV header matching).
    std::optional<std::size_t> index_of_loose(std::string_view name) const;
};

struct GeoPoint {
    double latitude = 0.0;
    double longitude = 0.0;
};

// One attribute value: number for numeric attributes, token for categorical.
using Value = std::variant<double, std::string>;

struct ColoniaRecord {
    std::string id;
    std::string name;
    std::string state;
    std::string county;
    std::vector<Value> values;  // positionally aligned with the schema
    std::optional<GeoPoint> location;

    double num(std::size_t attr) const { return std::get<double>(values[attr]); }
    const std::string& cat(std::size_t attr) const { return std::get<std::string>(values[attr]); }
};

enum class Stage { Raw, Normalized, Filtered };

struct RemovedRecord {
    std::string id;
    std::size_t source_row = 0;  // 1-based data row in the input file
    std::string reason;
};

// An attribute dropped from a (sub)schema because every record shares one
// value; the value is kept as text so profiles and reports can restore it.
struct ConstantAttribute {
    std::string name;
    AttributeKind kind = AttributeKind::Categorical;
    std::string value;
};

struct Dataset {
    AttributeSchema schema;
    std::vector<ColoniaRecord> records;
    Stage stage = Stage::Raw;
    // Attributes dropped because they are constant within this (sub)dataset.
    std::vector<ConstantAttribute> constants;
    // Records excluded so far, with reasons (loader misses + filter noise).
    std::vector<RemovedRecord> removed;
    // Names of attributes that hold normalized ratios (range pinned to [0,1]).
    std::vector<std::string> ratio_attributes;

    std::size_t size() const { return records.size(); }
};

// Explicit column declaration for load_dataset. Range/categories are filled
// from the data when not declared; declared categories are enforced.
struct AttributeSpec {
    std::string name;
    AttributeKind kind = AttributeKind::Categorical;
    std::vector<std::string> categories;  // optional closed category set
};

struct SchemaPolicy {
    // Empty -> infer every unrecognized column from the data
    // (all values numeric -> numeric, otherwise categorical).
    std::vector<AttributeSpec> declared;

    static SchemaPolicy infer() { return {}; }
    static SchemaPolicy explicit_schema(std::vector<AttributeSpec> specs) {
        return {std::move(specs)};
    }
};

/// Canonicalizes yes/no tokens: {y, yes} -> "Y", {n, no} -> "N",
/// {partial} -> "Partial" (case-insensitive); other tokens are trimmed as-is.
std::string canonical_token(std::string_view raw);

/// Loads a CSV with a header row into a raw Dataset.
///
/// Columns named id/name/state/county/latitude/longitude (tolerant, case-
/// insensitive) become record metadata; everything else is an attribute per
/// the schema policy. Records missing a value in any schema attribute are
/// excluded and reported in Dataset::removed. A non-missing, non-numeric
/// token in a numeric column is a ParseError naming the row.
Dataset load_dataset(const std::string& path, const SchemaPolicy& policy = {});
Dataset load_dataset_text(std::string_view csv_text, const SchemaPolicy& policy = {});

/// Replaces each count attribute by count / denominator and drops records
/// with denominator <= 0 or any ratio outside [0, 1] (reported as noise).
/// Count-attribute ranges become [0, 1]; stage becomes Filtered.
/// Calling it again on its own output is the identity.
Dataset normalize_and_filter(const Dataset& d,
                             const std::vector<std::string>& count_attrs,
                             const std::string& denominator_attr);

/// Splits on a categorical attribute. Subset schemas drop attributes that are
/// constant within the subset (recorded in Dataset::constants, including the
/// split attribute itself).
std::map<std::string, Dataset> partition_by(const Dataset& d, const std::string& attr);

// Binary dummy expansion of the categorical attributes, one group of columns
// per source attribute so the Dice distance stays computable per attribute.
struct EncodedMatrix {
    struct Group {
        std::string attribute;
        std::size_t attr_index = 0;   // index in the source schema
        std::size_t offset = 0;       // first column of this group
        std::vector<std::string> categories;

        std::size_t width() const { return categories.size(); }
    };

    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> data;  // row-major
    std::vector<Group> groups;
    std::vector<std::string> column_names;  // "<attr>_<value>"

    std::span<const std::uint8_t> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }
    std::span<const std::uint8_t> group_row(const Group& g, std::size_t r) const {
        return {data.data() + r * cols + g.offset, g.width()};
    }
    /// Recovers the original (attribute, token) pairs of a row.
    std::vector<std::pair<std::string, std::string>> decode(std::size_t r) const;
};

/// One-hot encodes the categorical attributes of a filtered dataset.
EncodedMatrix encode_categorical(const Dataset& d);

}  // namespace aquaclust
