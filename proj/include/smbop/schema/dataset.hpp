#pragma once

#include <fstream>
#include <memory>
#include <sstream>

#include "smbop/ra/transform.hpp"
#include "smbop/schema/schema.hpp"
#include "smbop/sql/build.hpp"
#include "smbop/sql/parse.hpp"

namespace smbop {

/// Lowercase word split on anything that is not a letter or digit. '*' is
/// kept as its own token so star can be referenced from utterances.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
            if (ch == '*') out.push_back("*");
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct Example {
    std::vector<std::string> utterance;
    std::shared_ptr<const Schema> schema;
    std::string gold_sql;
    ra::RaTree gold_tree;      // unbalanced, as transpiled from gold_sql
    ra::RaTree gold_balanced;  // balance(gold_tree)
};

/// Builds a validated Example from raw fields: parses and transpiles the SQL,
/// balances the gold tree, and checks the root is a Relation.
inline Example make_example(std::vector<std::string> utterance,
                            std::shared_ptr<const Schema> schema, std::string sql) {
    Example ex;
    ex.utterance = std::move(utterance);
    ex.schema = std::move(schema);
    ex.gold_sql = std::move(sql);
    sql::SqlAst ast = sql::parse_sql(ex.gold_sql, *ex.schema);
    ex.gold_tree = sql::sql_to_ra(ast);
    if (ra::infer_type(ex.gold_tree) != ra::SemanticType::Relation)
        throw NotReturnable("gold query");
    ex.gold_balanced = ra::balance(ex.gold_tree);
    return ex;
}

inline nlohmann::json example_to_json(const Example& ex) {
    std::string utt;
    for (std::size_t i = 0; i < ex.utterance.size(); ++i) {
        if (i) utt += ' ';
        utt += ex.utterance[i];
    }
    return {{"utterance", utt}, {"sql", ex.gold_sql}, {"schema", schema_to_json(*ex.schema)}};
}

/// Reads a JSON-lines dataset, validating every record eagerly. Failures name
/// the offending record index.
inline std::vector<Example> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<Example> out;
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            auto schema = std::make_shared<Schema>(schema_from_json(j.at("schema")));
            out.push_back(make_example(tokenize(j.at("utterance").get<std::string>()), schema,
                                       j.at("sql").get<std::string>()));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(record, e.what());
        } catch (const ValidationError&) {
            throw;
        } catch (const Error& e) {
            throw ValidationError(record, e.what());
        }
        ++record;
    }
    return out;
}

inline void save_dataset(const std::vector<Example>& examples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& ex : examples) out << example_to_json(ex).dump() << "\n";
}

}  // namespace smbop
