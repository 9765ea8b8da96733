#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smbop/common.hpp"

namespace smbop {

struct Column {
    int table = 0;
    std::string name;
    std::string type_tag;  // declared type, carried through but not interpreted
};

/// A database schema. Tables and columns together form the DB-constant
/// vocabulary: constant i is tables[i] for i < |tables| and a column
/// otherwise, in file order.
struct Schema {
    std::vector<std::string> tables;
    std::vector<Column> columns;
    std::set<int> primary_keys;                    // column indices
    std::set<std::pair<int, int>> foreign_keys;    // (fk column, pk column)

    int n_tables() const { return static_cast<int>(tables.size()); }
    int n_columns() const { return static_cast<int>(columns.size()); }
    int n_constants() const { return n_tables() + n_columns(); }

    bool constant_is_table(int c) const { return c < n_tables(); }
    int column_of_constant(int c) const { return c - n_tables(); }
    int constant_of_column(int col) const { return n_tables() + col; }

    std::string qualified_column(int col) const {
        return tables[static_cast<std::size_t>(columns[static_cast<std::size_t>(col)].table)] +
               "." + columns[static_cast<std::size_t>(col)].name;
    }

    /// Name of constant c as it appears in tree leaves.
    std::string constant_name(int c) const {
        return constant_is_table(c) ? tables[static_cast<std::size_t>(c)]
                                    : qualified_column(column_of_constant(c));
    }

    std::optional<int> find_table(const std::string& name) const {
        for (int i = 0; i < n_tables(); ++i)
            if (tables[static_cast<std::size_t>(i)] == name) return i;
        return std::nullopt;
    }

    std::optional<int> find_column(int table, const std::string& name) const {
        for (int i = 0; i < n_columns(); ++i) {
            const auto& c = columns[static_cast<std::size_t>(i)];
            if (c.table == table && c.name == name) return i;
        }
        return std::nullopt;
    }

    void validate() const {
        std::set<std::string> tnames(tables.begin(), tables.end());
        if (tnames.size() != tables.size()) throw ParseError("duplicate table name");
        std::set<std::pair<int, std::string>> cnames;
        for (const auto& c : columns) {
            if (c.table < 0 || c.table >= n_tables())
                throw ParseError("column table index out of range");
            if (!cnames.insert({c.table, c.name}).second)
                throw ParseError("duplicate column " + c.name);
        }
        for (int pk : primary_keys)
            if (pk < 0 || pk >= n_columns()) throw ParseError("primary key index out of range");
        for (auto [a, b] : foreign_keys)
            if (a < 0 || a >= n_columns() || b < 0 || b >= n_columns())
                throw ParseError("foreign key index out of range");
    }
};

inline nlohmann::json schema_to_json(const Schema& s) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : s.columns) cols.push_back({c.table, c.name, c.type_tag});
    nlohmann::json fks = nlohmann::json::array();
    for (auto [a, b] : s.foreign_keys) fks.push_back({a, b});
    return {{"tables", s.tables},
            {"columns", cols},
            {"primary_keys", std::vector<int>(s.primary_keys.begin(), s.primary_keys.end())},
            {"foreign_keys", fks}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
    Schema s;
    try {
        s.tables = j.at("tables").get<std::vector<std::string>>();
        for (const auto& c : j.at("columns")) {
            Column col;
            col.table = c.at(0).get<int>();
            col.name = c.at(1).get<std::string>();
            if (c.size() > 2) col.type_tag = c.at(2).get<std::string>();
            s.columns.push_back(std::move(col));
        }
        for (const auto& pk : j.value("primary_keys", nlohmann::json::array()))
            s.primary_keys.insert(pk.get<int>());
        for (const auto& fk : j.value("foreign_keys", nlohmann::json::array()))
            s.foreign_keys.insert({fk.at(0).get<int>(), fk.at(1).get<int>()});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("schema json: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace smbop
