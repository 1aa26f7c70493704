#include "aquaclust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "aquaclust/csv.hpp"
#include "aquaclust/errors.hpp"

namespace aquaclust {

namespace {

const std::set<std::string> kMissingTokens = {"", "na", "n/a", "nan", "null", "none"};

bool is_missing(const std::string& trimmed) {
    return kMissingTokens.count(csv::lower(trimmed)) > 0;
}

bool parse_number(const std::string& token, double& out) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

struct MetaColumns {
    std::optional<std::size_t> id, name, state, county, lat, lon;

    bool is_meta(std::size_t col) const {
        for (auto m : {id, name, state, county, lat, lon})
            if (m && *m == col) return true;
        return false;
    }
};

MetaColumns find_meta_columns(const std::vector<std::string>& header) {
    MetaColumns meta;
    auto match = [&](std::initializer_list<const char*> names) -> std::optional<std::size_t> {
        for (std::size_t c = 0; c < header.size(); ++c) {
            std::string h = csv::lower(csv::trim(header[c]));
            for (const char* n : names)
                if (h == n) return c;
        }
        return std::nullopt;
    };
    meta.id = match({"id", "record id"});
    meta.name = match({"name", "colonia name", "colonia"});
    meta.state = match({"state"});
    meta.county = match({"county"});
    meta.lat = match({"latitude", "lat"});
    meta.lon = match({"longitude", "lon", "lng", "long"});
    return meta;
}

}  // namespace

bool Attribute::is_constant() const {
    if (kind == AttributeKind::Numeric) return min == max;
    return categories.size() < 2;
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == name) return i;
    return std::nullopt;
}

std::optional<std::size_t> AttributeSchema::index_of_loose(std::string_view name) const {
    std::string want = csv::lower(csv::trim(name));
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (csv::lower(csv::trim(attributes[i].name)) == want) return i;
    return std::nullopt;
}

std::string canonical_token(std::string_view raw) {
    std::string t = csv::trim(raw);
    std::string l = csv::lower(t);
    if (l == "y" || l == "yes") return "Y";
    if (l == "n" || l == "no") return "N";
    if (l == "partial") return "Partial";
    return t;
}

Dataset load_dataset_text(std::string_view csv_text, const SchemaPolicy& policy) {
    csv::Table table = csv::parse(csv_text);
    MetaColumns meta = find_meta_columns(table.header);

    // Map schema attributes onto header columns.
    struct Column {
        std::size_t col;
        Attribute attr;
        std::vector<std::string> declared_categories;
    };
    std::vector<Column> columns;

    auto find_column = [&](std::string_view name) -> std::optional<std::size_t> {
        std::string want = csv::lower(csv::trim(name));
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (csv::lower(csv::trim(table.header[c])) == want) return c;
        return std::nullopt;
    };

    if (!policy.declared.empty()) {
        for (const AttributeSpec& spec : policy.declared) {
            auto col = find_column(spec.name);
            if (!col) throw SchemaError("missing column: " + spec.name);
            Attribute attr;
            attr.name = spec.name;
            attr.kind = spec.kind;
            columns.push_back({*col, std::move(attr), spec.categories});
        }
    } else {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (meta.is_meta(c)) continue;
            Attribute attr;
            attr.name = csv::trim(table.header[c]);
            // Numeric when every non-missing value parses as a number.
            bool numeric = true;
            bool any_value = false;
            for (const auto& row : table.rows) {
                if (c >= row.size()) continue;
                std::string t = csv::trim(row[c]);
                if (is_missing(t)) continue;
                any_value = true;
                double v;
                if (!parse_number(t, v)) {
                    numeric = false;
                    break;
                }
            }
            attr.kind = (numeric && any_value) ? AttributeKind::Numeric
                                               : AttributeKind::Categorical;
            columns.push_back({c, std::move(attr), {}});
        }
    }

    Dataset d;
    d.stage = Stage::Raw;

    std::vector<bool> range_started(columns.size(), false);

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t source_row = r + 1;

        ColoniaRecord rec;
        auto cell = [&](std::optional<std::size_t> c) -> std::string {
            return (c && *c < row.size()) ? csv::trim(row[*c]) : std::string();
        };
        rec.id = cell(meta.id);
        if (rec.id.empty()) rec.id = std::to_string(source_row);
        rec.name = cell(meta.name);
        rec.state = cell(meta.state);
        rec.county = cell(meta.county);
        {
            std::string lat = cell(meta.lat), lon = cell(meta.lon);
            double la, lo;
            if (!lat.empty() && !lon.empty() && parse_number(lat, la) && parse_number(lon, lo))
                rec.location = GeoPoint{la, lo};
        }

        std::string missing_attr;
        rec.values.reserve(columns.size());
        for (const Column& col : columns) {
            std::string token =
                col.col < row.size() ? csv::trim(row[col.col]) : std::string();
            if (is_missing(token)) {
                missing_attr = col.attr.name;
                break;
            }
            if (col.attr.kind == AttributeKind::Numeric) {
                double v;
                if (!parse_number(token, v))
                    throw ParseError("row " + std::to_string(source_row) +
                                     ": non-numeric value '" + token +
                                     "' in numeric column '" + col.attr.name + "'");
                rec.values.emplace_back(v);
            } else {
                rec.values.emplace_back(canonical_token(token));
            }
        }
        if (!missing_attr.empty()) {
            d.removed.push_back(
                {rec.id, source_row, "missing value in '" + missing_attr + "'"});
            continue;
        }

        // Fold the record into the observed ranges / category sets.
        for (std::size_t a = 0; a < columns.size(); ++a) {
            Attribute& attr = columns[a].attr;
            if (attr.kind == AttributeKind::Numeric) {
                double v = std::get<double>(rec.values[a]);
                if (!range_started[a]) {
                    attr.min = attr.max = v;
                    range_started[a] = true;
                } else {
                    attr.min = std::min(attr.min, v);
                    attr.max = std::max(attr.max, v);
                }
            } else {
                const std::string& tok = std::get<std::string>(rec.values[a]);
                if (!columns[a].declared_categories.empty()) {
                    const auto& decl = columns[a].declared_categories;
                    if (std::find(decl.begin(), decl.end(), tok) == decl.end())
                        throw SchemaError("row " + std::to_string(source_row) +
                                          ": value '" + tok +
                                          "' not in declared category set of '" +
                                          attr.name + "'");
                }
                if (std::find(attr.categories.begin(), attr.categories.end(), tok) ==
                    attr.categories.end())
                    attr.categories.push_back(tok);
            }
        }
        d.records.push_back(std::move(rec));
    }

    for (Column& col : columns) d.schema.attributes.push_back(std::move(col.attr));
    return d;
}

Dataset load_dataset(const std::string& path, const SchemaPolicy& policy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_dataset_text(buf.str(), policy);
}

Dataset normalize_and_filter(const Dataset& d,
                             const std::vector<std::string>& count_attrs,
                             const std::string& denominator_attr) {
    if (d.stage == Stage::Filtered) return d;  // idempotent on its own output

    auto den_idx = d.schema.index_of_loose(denominator_attr);
    if (!den_idx)
        throw SchemaError("denominator attribute missing: " + denominator_attr);
    if (d.schema.attributes[*den_idx].kind != AttributeKind::Numeric)
        throw SchemaError("denominator attribute is not numeric: " + denominator_attr);

    std::vector<std::size_t> count_idx;
    for (const auto& name : count_attrs) {
        auto idx = d.schema.index_of_loose(name);
        if (!idx) throw SchemaError("count attribute missing: " + name);
        if (d.schema.attributes[*idx].kind != AttributeKind::Numeric)
            throw SchemaError("count attribute is not numeric: " + name);
        count_idx.push_back(*idx);
    }

    Dataset out;
    out.schema = d.schema;
    out.constants = d.constants;
    out.removed = d.removed;
    out.stage = Stage::Filtered;

    const std::string& den_name = d.schema.attributes[*den_idx].name;
    for (const ColoniaRecord& rec : d.records) {
        double den = rec.num(*den_idx);
        if (den <= 0.0) {
            out.removed.push_back({rec.id, 0, "denominator '" + den_name + "' <= 0"});
            continue;
        }
        ColoniaRecord copy = rec;
        std::string bad_attr;
        for (std::size_t idx : count_idx) {
            double ratio = rec.num(idx) / den;
            if (ratio > 1.0 || ratio < 0.0) {
                bad_attr = d.schema.attributes[idx].name;
                break;
            }
            copy.values[idx] = ratio;
        }
        if (!bad_attr.empty()) {
            out.removed.push_back(
                {rec.id, 0, "abnormal normalized value in '" + bad_attr + "'"});
            continue;
        }
        out.records.push_back(std::move(copy));
    }

    for (std::size_t idx : count_idx) {
        out.schema.attributes[idx].min = 0.0;
        out.schema.attributes[idx].max = 1.0;
        out.ratio_attributes.push_back(d.schema.attributes[idx].name);
    }
    return out;
}

std::map<std::string, Dataset> partition_by(const Dataset& d, const std::string& attr) {
    auto idx = d.schema.index_of_loose(attr);
    if (!idx) throw SchemaError("partition attribute not in schema: " + attr);
    if (d.schema.attributes[*idx].kind != AttributeKind::Categorical)
        throw SchemaError("partition attribute is not categorical: " + attr);

    std::map<std::string, std::vector<const ColoniaRecord*>> groups;
    for (const ColoniaRecord& rec : d.records) groups[rec.cat(*idx)].push_back(&rec);

    std::map<std::string, Dataset> out;
    for (auto& [value, members] : groups) {
        Dataset sub;
        sub.stage = d.stage;
        sub.constants = d.constants;

        // Find attributes that are constant within this subset.
        std::vector<bool> keep(d.schema.attributes.size(), true);
        for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
            const Attribute& src = d.schema.attributes[a];
            bool constant = true;
            for (std::size_t m = 1; m < members.size() && constant; ++m)
                constant = (members[m]->values[a] == members[0]->values[a]);
            if (constant && !members.empty()) {
                keep[a] = false;
                std::string text =
                    src.kind == AttributeKind::Numeric
                        ? csv::format_double(members[0]->num(a))
                        : members[0]->cat(a);
                sub.constants.push_back({src.name, src.kind, text});
            }
        }

        for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
            if (!keep[a]) continue;
            Attribute attr_copy = d.schema.attributes[a];
            if (attr_copy.kind == AttributeKind::Categorical) {
                // Restrict the category set to what this subset observes.
                attr_copy.categories.clear();
                for (const ColoniaRecord* rec : members) {
                    const std::string& tok = rec->cat(a);
                    if (std::find(attr_copy.categories.begin(), attr_copy.categories.end(),
                                  tok) == attr_copy.categories.end())
                        attr_copy.categories.push_back(tok);
                }
            }
            sub.schema.attributes.push_back(std::move(attr_copy));
        }

        for (const std::string& ratio : d.ratio_attributes)
            if (sub.schema.index_of(ratio)) sub.ratio_attributes.push_back(ratio);

        for (const ColoniaRecord* rec : members) {
            ColoniaRecord copy;
            copy.id = rec->id;
            copy.name = rec->name;
            copy.state = rec->state;
            copy.county = rec->county;
            copy.location = rec->location;
            for (std::size_t a = 0; a < d.schema.attributes.size(); ++a)
                if (keep[a]) copy.values.push_back(rec->values[a]);
            sub.records.push_back(std::move(copy));
        }
        out.emplace(value, std::move(sub));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> EncodedMatrix::decode(std::size_t r) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Group& g : groups) {
        auto dummies = group_row(g, r);
        for (std::size_t c = 0; c < dummies.size(); ++c)
            if (dummies[c]) out.emplace_back(g.attribute, g.categories[c]);
    }
    return out;
}

EncodedMatrix encode_categorical(const Dataset& d) {
    if (d.stage != Stage::Filtered)
        throw ParameterError("encode_categorical requires a filtered dataset");

    EncodedMatrix enc;
    enc.rows = d.records.size();
    std::size_t offset = 0;
    for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
        const Attribute& attr = d.schema.attributes[a];
        if (attr.kind != AttributeKind::Categorical) continue;
        EncodedMatrix::Group g;
        g.attribute = attr.name;
        g.attr_index = a;
        g.offset = offset;
        g.categories = attr.categories;
        offset += g.width();
        for (const std::string& cat : g.categories)
            enc.column_names.push_back(attr.name + "_" + cat);
        enc.groups.push_back(std::move(g));
    }
    enc.cols = offset;
    enc.data.assign(enc.rows * enc.cols, 0);

    for (std::size_t r = 0; r < enc.rows; ++r) {
        for (const EncodedMatrix::Group& g : enc.groups) {
            const std::string& tok = d.records[r].cat(g.attr_index);
            auto it = std::find(g.categories.begin(), g.categories.end(), tok);
            if (it == g.categories.end())
                throw SchemaError("value '" + tok + "' not in category set of '" +
                                  g.attribute + "'");
            enc.data[r * enc.cols + g.offset +
                     static_cast<std::size_t>(it - g.categories.begin())] = 1;
        }
    }
    return enc;
}

}  // namespace aquaclust
