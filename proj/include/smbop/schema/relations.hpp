#pragma once

#include <string>
#include <vector>

#include "smbop/schema/schema.hpp"

namespace smbop {

/// Relation tags between positions of the joint (utterance ++ DB constants)
/// sequence. Exactly one tag per ordered pair; the first matching definition
/// in this order wins.
enum class RelationTag : std::uint8_t {
    ColumnOfTable,   // i is a column of table j
    TableOfColumn,   // i is the table of column j
    SameTableCols,   // two distinct columns of one table
    ForeignKey,      // column i has a foreign key onto column j
    PrimaryKeyOf,    // column i is the primary key referenced by column j
    ExactMatch,      // token equals the constant's name or one of its parts
    PartialMatch,    // shared prefix >= 4 chars, or token inside the name
    Self,
    Default,
};

inline constexpr int kNumRelationTags = 9;

namespace detail {

inline std::vector<std::string> name_parts(const std::string& name) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : name) {
        if (c == '_' || c == '.') {
            if (!cur.empty()) parts.push_back(cur);
            cur.clear();
        } else {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

inline std::size_t common_prefix(const std::string& a, const std::string& b) {
    std::size_t n = std::min(a.size(), b.size());
    std::size_t i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}

}  // namespace detail

/// Square tag matrix over (|utterance| + |constants|) positions, row-major.
struct RelationMatrix {
    int n = 0;
    std::vector<RelationTag> tags;

    RelationTag at(int i, int j) const {
        return tags[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(j)];
    }
};

/// Computes the relation tag for every ordered position pair. Token/constant
/// match tags compare the lowercase token against the constant's short name
/// (table name, or column name without its table) and the name's '_' parts.
inline RelationMatrix compute_relations(const std::vector<std::string>& utterance,
                                        const Schema& schema) {
    int nt = static_cast<int>(utterance.size());
    int nc = schema.n_constants();
    int n = nt + nc;
    RelationMatrix m;
    m.n = n;
    m.tags.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), RelationTag::Default);

    // short names and parts per constant
    std::vector<std::string> shortname(static_cast<std::size_t>(nc));
    std::vector<std::vector<std::string>> parts(static_cast<std::size_t>(nc));
    for (int c = 0; c < nc; ++c) {
        std::string name =
            schema.constant_is_table(c)
                ? schema.tables[static_cast<std::size_t>(c)]
                : schema.columns[static_cast<std::size_t>(schema.column_of_constant(c))].name;
        std::string lower;
        for (char ch : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        shortname[static_cast<std::size_t>(c)] = lower;
        parts[static_cast<std::size_t>(c)] = detail::name_parts(lower);
    }

    auto match_tag = [&](const std::string& tok, int c) -> RelationTag {
        const std::string& name = shortname[static_cast<std::size_t>(c)];
        if (tok == name) return RelationTag::ExactMatch;
        for (const auto& p : parts[static_cast<std::size_t>(c)])
            if (tok == p) return RelationTag::ExactMatch;
        if (detail::common_prefix(tok, name) >= 4) return RelationTag::PartialMatch;
        if (tok.size() >= 2 && name.find(tok) != std::string::npos) return RelationTag::PartialMatch;
        return RelationTag::Default;
    };

    auto set = [&](int i, int j, RelationTag t) {
        m.tags[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(j)] = t;
    };

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            bool i_tok = i < nt, j_tok = j < nt;
            int ci = i - nt, cj = j - nt;
            RelationTag tag = RelationTag::Default;
            if (!i_tok && !j_tok) {
                bool i_table = schema.constant_is_table(ci);
                bool j_table = schema.constant_is_table(cj);
                if (!i_table && j_table &&
                    schema.columns[static_cast<std::size_t>(schema.column_of_constant(ci))].table ==
                        cj) {
                    tag = RelationTag::ColumnOfTable;
                } else if (i_table && !j_table &&
                           schema.columns[static_cast<std::size_t>(schema.column_of_constant(cj))]
                                   .table == ci) {
                    tag = RelationTag::TableOfColumn;
                } else if (!i_table && !j_table && ci != cj) {
                    int colI = schema.column_of_constant(ci);
                    int colJ = schema.column_of_constant(cj);
                    if (schema.columns[static_cast<std::size_t>(colI)].table ==
                        schema.columns[static_cast<std::size_t>(colJ)].table)
                        tag = RelationTag::SameTableCols;
                    else if (schema.foreign_keys.count({colI, colJ}))
                        tag = RelationTag::ForeignKey;
                    else if (schema.foreign_keys.count({colJ, colI}))
                        tag = RelationTag::PrimaryKeyOf;
                }
            } else if (i_tok != j_tok) {
                const std::string& tok = utterance[static_cast<std::size_t>(i_tok ? i : j)];
                tag = match_tag(tok, i_tok ? cj : ci);
            }
            if (tag == RelationTag::Default && i == j) tag = RelationTag::Self;
            set(i, j, tag);
        }
    }
    return m;
}

}  // namespace smbop
