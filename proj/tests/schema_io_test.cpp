#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <map>

#include "smbop/schema/dataset.hpp"
#include "smbop/schema/relations.hpp"
#include "smbop/schema/synthetic.hpp"

using namespace smbop;

namespace {

std::string write_temp(const std::string& content) {
    std::string path = ::testing::TempDir() + "smbop_dataset_test.jsonl";
    std::ofstream out(path);
    out << content;
    return path;
}

const char* kActorRecord =
    R"({"utterance": "what are the names of actors older than 60", "sql": "SELECT name FROM actor WHERE age >= 60", "schema": {"tables": ["actor"], "columns": [[0, "name", "text"], [0, "age", "number"]], "primary_keys": [], "foreign_keys": []}})";

}  // namespace

TEST(LoadDataset, FigureRecord) {
    auto examples = load_dataset(write_temp(std::string(kActorRecord) + "\n"));
    ASSERT_EQ(examples.size(), 1u);
    const Example& ex = examples[0];
    EXPECT_EQ(ex.utterance.front(), "what");
    EXPECT_EQ(ra::serialize(ex.gold_balanced),
              "(project (keep (keep actor.name)) (select (ge actor.age value) (keep actor)))");
    EXPECT_TRUE(ra::structural_equal(ra::balance(ex.gold_tree), ex.gold_balanced));
}

TEST(LoadDataset, EmptyFile) { EXPECT_TRUE(load_dataset(write_temp("")).empty()); }

TEST(LoadDataset, MissingColumnFails) {
    std::string line =
        R"({"utterance": "x", "sql": "SELECT missing FROM actor", "schema": {"tables": ["actor"], "columns": [[0, "name", "text"]], "primary_keys": [], "foreign_keys": []}})";
    EXPECT_THROW(load_dataset(write_temp(line + "\n")), ValidationError);
}

TEST(LoadDataset, BadSchemaIndexFails) {
    std::string line =
        R"({"utterance": "x", "sql": "SELECT name FROM actor", "schema": {"tables": ["actor"], "columns": [[3, "name", "text"]], "primary_keys": [], "foreign_keys": []}})";
    EXPECT_THROW(load_dataset(write_temp(line + "\n")), ValidationError);
}

TEST(SaveDataset, RoundTrip) {
    auto examples = gen_synthetic(5, 20, {4});
    std::string path = ::testing::TempDir() + "smbop_roundtrip.jsonl";
    save_dataset(examples, path);
    auto loaded = load_dataset(path);
    ASSERT_EQ(loaded.size(), examples.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        EXPECT_EQ(loaded[i].utterance, examples[i].utterance);
        EXPECT_TRUE(ra::structural_equal(loaded[i].gold_tree, examples[i].gold_tree));
    }
}

TEST(GenSynthetic, DeterministicInSeed) {
    auto a = gen_synthetic(7, 30, {4});
    auto b = gen_synthetic(7, 30, {4});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].gold_sql, b[i].gold_sql);
        EXPECT_EQ(a[i].utterance, b[i].utterance);
        EXPECT_EQ(schema_to_json(*a[i].schema).dump(), schema_to_json(*b[i].schema).dump());
    }
    auto c = gen_synthetic(8, 30, {4});
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i].gold_sql != c[i].gold_sql;
    EXPECT_TRUE(any_diff);
}

TEST(GenSynthetic, SchemasWellFormed) {
    auto examples = gen_synthetic(9, 100, {5});
    for (const auto& ex : examples) {
        EXPECT_GE(ex.schema->n_tables(), 2);
        EXPECT_LE(ex.schema->n_tables(), 5);
        EXPECT_GE(ex.schema->foreign_keys.size(), 1u);
        ex.schema->validate();
    }
}

TEST(GenSynthetic, HeightHistogramCoversRange) {
    const int max_h = 6;
    auto examples = gen_synthetic(10, 1000, {max_h});
    std::map<int, int> hist;
    for (const auto& ex : examples) hist[ex.gold_tree->height()]++;
    for (int h = 1; h <= max_h; ++h) EXPECT_GT(hist[h], 0) << "height " << h;
    for (auto [h, n] : hist) EXPECT_LE(h, max_h);
}

TEST(GenSynthetic, AllValidAndRoundTrip) {
    auto examples = gen_synthetic(11, 1000, {5});
    for (const auto& ex : examples) {
        EXPECT_EQ(ra::infer_type(ex.gold_tree), ra::SemanticType::Relation);
        auto back = sql::sql_to_ra(sql::parse_sql(sql::ra_to_sql(ex.gold_tree), *ex.schema));
        EXPECT_TRUE(ra::equivalent(back, ex.gold_tree));
    }
}

TEST(ComputeRelations, Dimensions) {
    auto examples = gen_synthetic(12, 5, {3});
    for (const auto& ex : examples) {
        auto m = compute_relations(ex.utterance, *ex.schema);
        int n = static_cast<int>(ex.utterance.size()) + ex.schema->n_constants();
        EXPECT_EQ(m.n, n);
        EXPECT_EQ(m.tags.size(), static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) EXPECT_EQ(m.at(i, i), RelationTag::Self);
    }
}

TEST(ComputeRelations, TagRules) {
    Schema s;
    s.tables = {"actor", "film"};
    s.columns = {{0, "age", "number"}, {0, "film_id", "number"}, {1, "id", "number"}};
    s.primary_keys = {2};
    s.foreign_keys = {{1, 2}};
    s.validate();
    std::vector<std::string> utt = {"actors", "age", "films"};
    auto m = compute_relations(utt, s);
    int nt = 3;
    int c_actor = nt + 0, c_film = nt + 1, c_age = nt + 2, c_film_id = nt + 3, c_id = nt + 4;
    (void)c_film;

    EXPECT_EQ(m.at(c_age, c_actor), RelationTag::ColumnOfTable);
    EXPECT_EQ(m.at(c_actor, c_age), RelationTag::TableOfColumn);
    EXPECT_EQ(m.at(c_age, c_film_id), RelationTag::SameTableCols);
    EXPECT_EQ(m.at(c_film_id, c_id), RelationTag::ForeignKey);
    EXPECT_EQ(m.at(c_id, c_film_id), RelationTag::PrimaryKeyOf);
    // token "age" matches column age exactly; "actors" is a partial match of
    // table actor (shared prefix >= 4); unrelated pairs default
    EXPECT_EQ(m.at(1, c_age), RelationTag::ExactMatch);
    EXPECT_EQ(m.at(c_age, 1), RelationTag::ExactMatch);
    EXPECT_EQ(m.at(0, c_actor), RelationTag::PartialMatch);
    EXPECT_EQ(m.at(0, c_age), RelationTag::Default);
    EXPECT_EQ(m.at(c_age, c_id), RelationTag::Default);
    // name parts: token "film" exact-matches column film_id through its part
    std::vector<std::string> utt2 = {"film"};
    auto m2 = compute_relations(utt2, s);
    EXPECT_EQ(m2.at(0, 1 + 2 + 1), RelationTag::ExactMatch);
}

TEST(Tokenize, LowercasePunctuationSplit) {
    EXPECT_EQ(tokenize("What are the actor's names?"),
              (std::vector<std::string>{"what", "are", "the", "actor", "s", "names"}));
    EXPECT_EQ(tokenize("loser_name"), (std::vector<std::string>{"loser", "name"}));
    EXPECT_EQ(tokenize("count(*)"), (std::vector<std::string>{"count", "*"}));
}
