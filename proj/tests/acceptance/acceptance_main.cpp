// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
// Each criterion enforces its stated tolerance and runtime budget.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smbop/cli/cli.hpp"
#include "smbop/eval/report.hpp"
#include "smbop/model/train_loop.hpp"
#include "smbop/nn/gradcheck.hpp"
#include "smbop/schema/synthetic.hpp"

using namespace smbop;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - t0)
               .count() /
           1000.0;
}

std::string temp_dir() {
    std::string dir = std::filesystem::temp_directory_path() / "smbop_acceptance";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Model desk_model(const std::vector<Example>& data, std::uint64_t seed) {
    return Model(ModelConfig::desk(), build_vocab(data), seed);
}

OracleScorer make_oracle(const GoldInfo& gold) {
    OracleScorer o;
    auto slices = std::make_shared<std::vector<std::unordered_set<Digest, DigestHash>>>();
    for (const auto& level : gold.slices)
        slices->push_back(std::unordered_set<Digest, DigestHash>(level.begin(), level.end()));
    auto consts =
        std::make_shared<std::unordered_set<int>>(gold.gold_consts.begin(), gold.gold_consts.end());
    Digest gd = gold.digest;
    o.constant_score = [consts](int c) { return consts->count(c) ? 10.0 : -10.0; };
    o.frontier_score = [slices](int level, const Digest& dg) {
        return level < static_cast<int>(slices->size()) &&
                       (*slices)[static_cast<std::size_t>(level)].count(dg)
                   ? 10.0
                   : -10.0;
    };
    o.rerank_score = [gd](const Digest& dg) { return dg == gd ? 10.0 : -10.0; };
    return o;
}

// --- criterion 1: paper-tree golden suite -------------------------------------

struct Golden {
    std::string sql;
    std::string unbalanced;
    std::string balanced;
    Schema schema;
};

std::vector<Golden> golden_suite() {
    Schema actor;
    actor.tables = {"actor"};
    actor.columns = {{0, "name", "text"}, {0, "age", "number"}};
    Schema flights;
    flights.tables = {"flights", "airports"};
    flights.columns = {{0, "destairport", "text"}, {1, "airportcode", "text"}, {1, "city", "text"}};
    flights.foreign_keys = {{0, 1}};
    Schema transcripts;
    transcripts.tables = {"transcripts"};
    transcripts.columns = {{0, "transcript_date", "time"}, {0, "other_details", "text"}};
    Schema pets;
    pets.tables = {"student", "has_pet", "pets"};
    pets.columns = {{0, "stuid", "number"}, {0, "sex", "text"},     {1, "stuid", "number"},
                    {1, "petid", "number"}, {2, "petid", "number"}, {2, "pettype", "text"}};
    pets.foreign_keys = {{2, 0}, {3, 4}};
    Schema matches;
    matches.tables = {"matches"};
    matches.columns = {{0, "loser_name", "text"}};

    return {
        {"SELECT name FROM actor WHERE age >= 60",
         "(project actor.name (select (ge actor.age value) actor))",
         "(project (keep (keep actor.name)) (select (ge actor.age value) (keep actor)))", actor},
        {"SELECT COUNT( * ) FROM flights JOIN airports ON flights.destairport = "
         "airports.airportcode WHERE airports.city = 'value'",
         "(project (agg_count *) (select (and (eq flights.destairport airports.airportcode) "
         "(eq airports.city value)) (product flights airports)))",
         "(project (keep (keep (agg_count *))) (select (and (eq flights.destairport "
         "airports.airportcode) (eq airports.city value)) (keep (product flights airports))))",
         flights},
        {"SELECT transcripts.transcript_date , transcripts.other_details FROM transcripts "
         "ORDER BY transcripts.transcript_date ASC LIMIT 'value'",
         "(limit value (orderby_asc transcripts.transcript_date (project (cunion "
         "transcripts.transcript_date transcripts.other_details) transcripts)))",
         "(limit (keep (keep (keep value))) (orderby_asc (keep (keep "
         "transcripts.transcript_date)) (project (cunion transcripts.transcript_date "
         "transcripts.other_details) (keep transcripts))))",
         transcripts},
        {"SELECT COUNT( * ) FROM student JOIN has_pet ON student.stuid = has_pet.stuid JOIN "
         "pets ON has_pet.petid = pets.petid WHERE student.sex = 'value' AND pets.pettype = "
         "'value'",
         "(project (agg_count *) (select (and (and (eq student.stuid has_pet.stuid) (eq "
         "has_pet.petid pets.petid)) (and (eq student.sex value) (eq pets.pettype value))) "
         "(product (product student has_pet) pets)))",
         "(project (keep (keep (keep (agg_count *)))) (select (and (and (eq student.stuid "
         "has_pet.stuid) (eq has_pet.petid pets.petid)) (and (eq student.sex value) (eq "
         "pets.pettype value))) (keep (product (product student has_pet) (keep pets)))))",
         pets},
        {"SELECT COUNT( DISTINCT matches.loser_name ) FROM matches",
         "(project (agg_count (distinct matches.loser_name)) matches)",
         "(project (agg_count (distinct matches.loser_name)) (keep (keep matches)))", matches},
    };
}

bool criterion1(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    for (const auto& g : golden_suite()) {
        ra::RaTree t = sql::sql_to_ra(sql::parse_sql(g.sql, g.schema));
        ok &= ra::serialize(t) == g.unbalanced;
        ok &= ra::serialize(ra::balance(t)) == g.balanced;
        ra::RaTree back = sql::sql_to_ra(sql::parse_sql(sql::ra_to_sql(t), g.schema));
        ok &= ra::equivalent(back, t);
    }
    double dt = seconds_since(t0);
    detail = "5 trees, " + std::to_string(dt) + "s";
    return ok && dt < 1.0;
}

// --- criterion 2: property suite ------------------------------------------------

bool criterion2(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    auto examples = gen_synthetic(2024, 1000, {6});
    Rng rng(77);
    bool ok = true;
    std::function<ra::RaTree(const ra::RaTree&)> sprinkle = [&](const ra::RaTree& t) -> ra::RaTree {
        ra::RaTree out;
        if (t->is_leaf()) out = t;
        else if (t->kind() == ra::RaNode::Kind::Unary) out = ra::unary(t->op(), sprinkle(t->left()));
        else out = ra::binary(t->op(), sprinkle(t->left()), sprinkle(t->right()));
        while (rng.coin(0.15)) out = ra::keep(out);
        return out;
    };
    std::function<ra::RaTree(const ra::RaTree&)> swap_some = [&](const ra::RaTree& t) -> ra::RaTree {
        if (t->is_leaf()) return t;
        if (t->kind() == ra::RaNode::Kind::Unary) return ra::unary(t->op(), swap_some(t->left()));
        ra::RaTree l = swap_some(t->left());
        ra::RaTree r = swap_some(t->right());
        if (ra::is_commutative(t->op()) && rng.coin(0.5)) std::swap(l, r);
        return ra::binary(t->op(), std::move(l), std::move(r));
    };
    for (const auto& ex : examples) {
        ra::RaTree b = ra::balance(ex.gold_tree);
        ok &= ra::structural_equal(ra::strip_keep(b), ex.gold_tree);
        ok &= ra::is_balanced(b);
        ok &= b->height() == ex.gold_tree->height();
        Digest dg = ra::canonical_digest(ex.gold_tree);
        ok &= ra::canonical_digest(sprinkle(ex.gold_tree)) == dg;
        ok &= ra::canonical_digest(swap_some(ex.gold_tree)) == dg;
        ra::RaTree back = sql::sql_to_ra(sql::parse_sql(sql::ra_to_sql(ex.gold_tree), *ex.schema));
        ok &= ra::canonical_digest(back) == dg;
    }
    double dt = seconds_since(t0);
    detail = "1000 trees, " + std::to_string(dt) + "s";
    return ok && dt < 30.0;
}

// --- criterion 3: frontier bound ------------------------------------------------

bool criterion3(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(33);
    bool ok = true;
    bool near_bound = false;
    for (int K : {1, 2, 4, 8}) {
        int bound = K * ra::kNumUnaryOps + K * K * ra::kNumBinaryOps;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<ra::SemanticType> types;
            for (int i = 0; i < K; ++i) {
                double r = rng.next_double();
                types.push_back(r < 0.35   ? ra::SemanticType::Constant
                                : r < 0.6  ? ra::SemanticType::Relation
                                : r < 0.85 ? ra::SemanticType::Predicate
                                           : ra::SemanticType::ConstantSet);
            }
            ok &= frontier_count(types) <= bound;
        }
        // every item type-compatible with every slot: the bound is attained
        std::vector<ra::SemanticType> anys(static_cast<std::size_t>(K), ra::SemanticType::Any);
        int full = frontier_count(anys);
        ok &= full <= bound;
        near_bound |= full >= bound - bound / 10;
    }
    double dt = seconds_since(t0);
    detail = std::to_string(dt) + "s";
    return ok && near_bound && dt < 10.0;
}

// --- criterion 4: oracle decode ---------------------------------------------------

bool criterion4(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    auto data = gen_synthetic(404, 200, {6});
    Model model = desk_model(data, 1);
    int em = 0, bem = 0;
    bool recall_ok = true;
    for (const auto& ex : data) {
        GoldInfo gold = make_gold_info(ex);
        OracleScorer oracle = make_oracle(gold);
        DecodeOptions opt;
        opt.cfg.beam_size = 30;
        opt.cfg.steps = 9;
        opt.oracle = &oracle;
        DecodeResult r = decode(model, ex, opt);
        TraceView v = trace_view(r);
        em += eval::exact_match(v, gold.digest) ? 1 : 0;
        bem += eval::beam_em(v, gold.digest) ? 1 : 0;
        for (int t = 0; t < static_cast<int>(gold.slices.size()); ++t)
            recall_ok &= eval::z_recall(v, gold.slices, t);
    }
    double dt = seconds_since(t0);
    detail = "em=" + std::to_string(em) + "/200 bem=" + std::to_string(bem) + "/200, " +
             std::to_string(dt) + "s";
    return em == 200 && bem == 200 && recall_ok && dt < 60.0;
}

// --- criterion 5: gradient checks -------------------------------------------------

bool criterion5(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string worst;
    for (const auto& [op, tol] : nn::grad_check_ops()) {
        nn::GradCheckResult r = nn::grad_check(op, 0);
        if (!r.ok()) {
            ok = false;
            worst += " " + op;
        }
    }
    double dt = seconds_since(t0);
    detail = std::to_string(dt) + "s" + (worst.empty() ? "" : " failing:" + worst);
    return ok && dt < 60.0;
}

// --- criterion 6: teacher-forcing invariant ------------------------------------------

bool criterion6(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    auto data = gen_synthetic(606, 100, {5});
    Model model = desk_model(data, 2);
    TrainConfig tc = TrainConfig::desk();
    DecoderConfig cfg;
    cfg.beam_size = tc.k_train;
    bool ok = true;
    for (const auto& ex : data) {
        GoldInfo gold = make_gold_info(ex, 9);
        DecodeOptions opt;
        opt.cfg = cfg;
        opt.gold = &gold.slices;
        DecodeResult trace = decode(model, ex, opt);  // throws if gold is missing
        for (std::size_t t = 0; t < gold.slices.size(); ++t) {
            std::unordered_set<Digest, DigestHash> beam;
            for (const auto& item : trace.beams[t].items) beam.insert(item.digest);
            for (const auto& dg : gold.slices[t]) ok &= beam.count(dg) > 0;
        }
        LossParts loss = compute_losses(trace, gold, tc, cfg);
        ok &= std::isfinite(loss.search);
    }
    double dt = seconds_since(t0);
    detail = "100 examples, " + std::to_string(dt) + "s";
    return ok;
}

// --- criterion 7: desk-scale overfit + ablations --------------------------------------

bool criterion7(std::string& detail) {
    auto t0 = std::chrono::steady_clock::now();
    auto data = gen_synthetic(42, 50, {5});
    TrainConfig tc = TrainConfig::desk();  // lr 1.86e-4, batch 16, K=8, <=2000 steps
    tc.eval_interval = 100;
    tc.t_train = 9;
    DecoderConfig dc;
    dc.beam_size = 8;
    dc.steps = 9;
    Model model(ModelConfig::desk(), build_vocab(data), tc.seed);
    double reached = 0.0;
    TrainOutcome out = train(model, data, &data, tc, dc, 1, "",
                             [&](const TrainMetricsRow& row) {
                                 reached = std::max(reached, row.dev_em);
                                 std::printf("  [overfit] step %d train_em=%.3f bem=%.3f (%.0fs)\n",
                                             row.step, row.dev_em, row.dev_bem, seconds_since(t0));
                                 std::fflush(stdout);
                                 return row.dev_em < 0.95;
                             });
    bool overfit_ok = reached >= 0.95;
    double overfit_time = seconds_since(t0);

    // ablation configs run to completion on the same setup (short smoke runs;
    // no numeric comparison)
    bool ablations_ok = true;
    for (const std::string flags : {"no_reranker", "no_beam_cntx", "no_rerank_cntx", "cntx_rep"}) {
        try {
            DecoderConfig ac;
            ac.beam_size = 8;
            ac.steps = 9;
            if (flags == "no_reranker") ac.no_reranker = true;
            if (flags == "no_beam_cntx") ac.no_beam_cntx = true;
            if (flags == "no_rerank_cntx") ac.no_rerank_cntx = true;
            if (flags == "cntx_rep") ac.cntx_rep = true;
            TrainConfig atc = tc;
            atc.max_steps = 40;
            atc.eval_interval = 40;
            Model amodel(ModelConfig::desk(), build_vocab(data), 5);
            train(amodel, data, &data, atc, ac, 1, "");
        } catch (const std::exception& e) {
            ablations_ok = false;
            detail += std::string(" ablation ") + flags + " failed: " + e.what();
        }
    }
    detail = "train_em=" + std::to_string(reached) + " after " + std::to_string(out.steps_run) +
             " steps, " + std::to_string(overfit_time) + "s; ablations " +
             (ablations_ok ? "completed" : "FAILED") + detail;
    return overfit_ok && ablations_ok && overfit_time < 1800.0;
}

// --- criterion 8: determinism across runs and thread counts ------------------------------

bool criterion8(std::string& detail) {
    std::string dir = temp_dir();
    auto data = gen_synthetic(808, 12, {4});
    save_dataset(data, dir + "/det.jsonl");

    auto train_once = [&](int threads, const std::string& tag) {
        Model model = desk_model(data, 9);
        TrainConfig tc = TrainConfig::desk();
        tc.max_steps = 20;
        tc.eval_interval = 10;
        tc.k_train = 6;
        tc.t_train = 6;
        DecoderConfig dc;
        dc.beam_size = 6;
        dc.steps = 5;
        train(model, data, &data, tc, dc, threads, dir + "/metrics_" + tag + ".csv");
        model.save(dir + "/model_" + tag + ".ckpt");
    };
    train_once(1, "t1");
    train_once(4, "t4");
    bool train_same = slurp(dir + "/model_t1.ckpt") == slurp(dir + "/model_t4.ckpt") &&
                      slurp(dir + "/metrics_t1.csv") == slurp(dir + "/metrics_t4.csv");

    Model model = Model::load(dir + "/model_t1.ckpt");
    auto decode_once = [&](int threads, const std::string& tag) {
        std::vector<nlohmann::json> traces(data.size());
        parallel_for(data.size(), threads, [&](std::size_t i) {
            DecodeOptions opt;
            opt.cfg.beam_size = 6;
            opt.cfg.steps = 5;
            traces[i] = trace_to_json(decode(model, data[i], opt));
        });
        write_traces(traces, dir + "/traces_" + tag + ".jsonl");
    };
    decode_once(1, "d1");
    decode_once(1, "d1b");
    decode_once(4, "d4");
    bool decode_same = slurp(dir + "/traces_d1.jsonl") == slurp(dir + "/traces_d1b.jsonl") &&
                       slurp(dir + "/traces_d1.jsonl") == slurp(dir + "/traces_d4.jsonl");

    detail = std::string("train ") + (train_same ? "identical" : "DIFFERS") + ", decode " +
             (decode_same ? "identical" : "DIFFERS");
    return train_same && decode_same;
}

// --- criterion 9: metric implications ---------------------------------------------------

bool criterion9(std::string& detail) {
    auto data = gen_synthetic(909, 40, {4});
    Model model = desk_model(data, 4);
    std::vector<TraceView> traces;
    DecodeOptions opt;
    opt.cfg.beam_size = 8;
    opt.cfg.steps = 6;
    for (const auto& ex : data) traces.push_back(trace_view(decode(model, ex, opt)));
    std::string dir = temp_dir() + "/report9";
    eval::EvalReport report = eval::analysis_report(traces, data, dir);

    bool ok = report.records.size() == data.size();
    double em = 0, bem = 0, z0 = 0;
    std::map<int, std::array<int, 3>> by_height;
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        const auto& rec = report.records[i];
        if (rec.em) ok &= rec.bem;  // EM implies BEM
        em += rec.em ? 1 : 0;
        bem += rec.bem ? 1 : 0;
        z0 += rec.z_recall.empty() ? 0 : rec.z_recall[0];
        auto& h = by_height[rec.gold_height];
        h[0]++;
        h[1] += rec.em ? 1 : 0;
        h[2] += rec.bem ? 1 : 0;
    }
    double n = static_cast<double>(report.records.size());
    ok &= report.em == em / n && report.bem == bem / n && report.z0_recall == z0 / n;
    ok &= report.by_height.size() == by_height.size();
    for (const auto& [h, v] : by_height) {
        auto it = report.by_height.find(h);
        ok &= it != report.by_height.end() && it->second == v;
    }
    detail = "em=" + std::to_string(report.em) + " bem=" + std::to_string(report.bem);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria = {
        {1, "paper-tree golden suite", criterion1},
        {2, "property suite (1000 random trees)", criterion2},
        {3, "frontier bound", criterion3},
        {4, "oracle decode (200 examples)", criterion4},
        {5, "gradient checks", criterion5},
        {6, "teacher-forcing invariant (100-example epoch)", criterion6},
        {7, "desk-scale overfit + ablations", criterion7},
        {8, "determinism across runs and thread counts", criterion8},
        {9, "metric implications and aggregate recomputation", criterion9},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    bool all_ok = true;
    for (auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    detail.c_str());
        std::fflush(stdout);
        all_ok &= ok;
    }
    return all_ok ? 0 : 1;
}
