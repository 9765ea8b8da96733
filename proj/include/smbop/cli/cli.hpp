#pragma once

#include <CLI11.hpp>
#include <iostream>

#include "smbop/eval/report.hpp"
#include "smbop/model/train_loop.hpp"
#include "smbop/nn/gradcheck.hpp"
#include "smbop/schema/synthetic.hpp"

namespace smbop::cli {

namespace detail {

inline std::uint64_t env_seed() {
    const char* env = std::getenv("SMBOP_SEED");
    if (!env) return 1;
    try {
        return static_cast<std::uint64_t>(std::stoull(env));
    } catch (...) {
        return 1;
    }
}

inline void print_resolved(const std::string& cmd, const nlohmann::json& cfg) {
    std::cerr << "[" << cmd << "] resolved config: " << cfg.dump() << "\n";
}

inline nlohmann::json load_config_file(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config json: ") + e.what());
    }
}

inline DecoderConfig parse_ablations(DecoderConfig cfg, const std::string& ablate) {
    std::stringstream ss(ablate);
    std::string flag;
    while (std::getline(ss, flag, ',')) {
        if (flag.empty()) continue;
        if (flag == "no_reranker") cfg.no_reranker = true;
        else if (flag == "no_beam_cntx") cfg.no_beam_cntx = true;
        else if (flag == "no_rerank_cntx") cfg.no_rerank_cntx = true;
        else if (flag == "cntx_rep") cfg.cntx_rep = true;
        else throw Error("unknown ablation flag: " + flag);
    }
    return cfg;
}

inline OracleScorer make_oracle(const GoldInfo& gold) {
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

}  // namespace detail

/// Entry point behind the smbop binary. Returns the process exit code:
/// 0 success, 1 error, 2 input validation failure.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"semi-autoregressive bottom-up text-to-SQL parser"};
    app.require_subcommand(1);

    // --- transpile -----------------------------------------------------------
    auto* transpile = app.add_subcommand("transpile", "translate between SQL and tree text");
    std::string to_lang, schema_path, in_path;
    bool do_balance = false;
    transpile->add_option("--to", to_lang, "target: ra or sql")
        ->required()
        ->check(CLI::IsMember({"ra", "sql"}));
    transpile->add_option("--schema", schema_path, "schema JSON file (required for --to ra)");
    transpile->add_option("--in", in_path, "input file, one query per line (default stdin)");
    transpile->add_flag("--balance", do_balance, "balance trees before printing");

    // --- gen -----------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    std::uint64_t gen_seed = detail::env_seed();
    int gen_n = 100, gen_max_height = 5;
    std::string gen_out;
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--n", gen_n, "number of examples")->required();
    gen->add_option("--max-height", gen_max_height, "maximum tree height");
    gen->add_option("--out", gen_out, "output JSONL path")->required();

    // --- train ---------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "teacher-forced training");
    std::string train_data, train_dev, train_config, train_ckpt, train_metrics;
    std::string preset = "desk";
    double lr_flag = -1.0;
    int batch_flag = -1, steps_flag = -1, k_flag = -1, threads = 1, eval_interval_flag = -1;
    std::uint64_t train_seed = 0;
    bool train_seed_set = false;
    std::string train_ablate;
    train_cmd->add_option("--data", train_data, "training JSONL")->required();
    train_cmd->add_option("--dev", train_dev, "dev JSONL for early stopping");
    train_cmd->add_option("--config", train_config, "JSON config file (flags win)");
    train_cmd->add_option("--out-ckpt", train_ckpt, "checkpoint output path")->required();
    train_cmd->add_option("--metrics-out", train_metrics, "metrics CSV path");
    train_cmd->add_option("--preset", preset, "model preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    train_cmd->add_option("--lr", lr_flag, "learning rate");
    train_cmd->add_option("--batch", batch_flag, "batch size");
    train_cmd->add_option("--steps", steps_flag, "max optimizer steps");
    train_cmd->add_option("--k", k_flag, "training beam size");
    train_cmd->add_option("--eval-interval", eval_interval_flag, "steps between evals");
    train_cmd->add_option("--seed", train_seed, "seed")->each([&](const std::string&) {
        train_seed_set = true;
    });
    train_cmd->add_option("--ablate", train_ablate, "comma list of ablation flags");
    train_cmd->add_option("--threads", threads, "worker threads");

    // --- decode ----------------------------------------------------------------
    auto* decode_cmd = app.add_subcommand("decode", "beam decode a dataset");
    std::string dec_data, dec_ckpt, dec_traces, dec_ablate;
    int dec_k = 30, dec_t = 9, dec_threads = 1;
    decode_cmd->add_option("--data", dec_data, "JSONL dataset")->required();
    decode_cmd->add_option("--ckpt", dec_ckpt, "model checkpoint")->required();
    decode_cmd->add_option("--k", dec_k, "beam size");
    decode_cmd->add_option("--t", dec_t, "decoding steps");
    decode_cmd->add_option("--ablate", dec_ablate, "comma list of ablation flags");
    decode_cmd->add_option("--trace-out", dec_traces, "trace JSONL output")->required();
    decode_cmd->add_option("--threads", dec_threads, "worker threads");

    // --- eval ------------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "compute metrics from traces");
    std::string eval_traces, eval_data, eval_report;
    eval_cmd->add_option("--traces", eval_traces, "trace JSONL")->required();
    eval_cmd->add_option("--data", eval_data, "gold JSONL dataset")->required();
    eval_cmd->add_option("--report-out", eval_report, "report directory")->required();

    // --- gradcheck ---------------------------------------------------------------
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    std::string grad_op;
    std::uint64_t grad_seed = detail::env_seed();
    grad_cmd->add_option("--op", grad_op, "check a single op");
    grad_cmd->add_option("--seed", grad_seed, "rng seed");

    // --- oracle-decode -------------------------------------------------------------
    auto* oracle_cmd = app.add_subcommand("oracle-decode", "decode with per-example oracles");
    std::string oracle_data;
    int oracle_k = 30, oracle_t = 9, oracle_threads = 1;
    oracle_cmd->add_option("--data", oracle_data, "JSONL dataset")->required();
    oracle_cmd->add_option("--k", oracle_k, "beam size");
    oracle_cmd->add_option("--t", oracle_t, "decoding steps");
    oracle_cmd->add_option("--threads", oracle_threads, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (*transpile) {
            if (to_lang == "ra" && schema_path.empty())
                throw Error("--to ra requires --schema");
            std::shared_ptr<Schema> schema;
            if (!schema_path.empty()) {
                std::ifstream in(schema_path);
                if (!in) throw Error("cannot open " + schema_path);
                schema = std::make_shared<Schema>(schema_from_json(nlohmann::json::parse(in)));
            }
            detail::print_resolved("transpile",
                                   {{"to", to_lang}, {"balance", do_balance}});
            std::ifstream file;
            std::istream* in = &std::cin;
            if (!in_path.empty()) {
                file.open(in_path);
                if (!file) throw Error("cannot open " + in_path);
                in = &file;
            }
            std::string line;
            int lineno = 0;
            bool any_failed = false;
            while (std::getline(*in, line)) {
                ++lineno;
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                try {
                    if (to_lang == "ra") {
                        ra::RaTree t = sql::sql_to_ra(sql::parse_sql(line, *schema));
                        if (do_balance) t = ra::balance(t);
                        std::cout << ra::serialize(t) << "\n";
                    } else {
                        ra::RaTree t = ra::parse_tree(line);
                        std::cout << sql::ra_to_sql(do_balance ? ra::balance(t) : t) << "\n";
                    }
                } catch (const Error& e) {
                    std::cerr << "line " << lineno << ": " << e.what() << "\n";
                    any_failed = true;
                }
            }
            return any_failed ? 1 : 0;
        }

        if (*gen) {
            detail::print_resolved(
                "gen", {{"seed", gen_seed}, {"n", gen_n}, {"max_height", gen_max_height}});
            auto examples = gen_synthetic(gen_seed, gen_n, {gen_max_height});
            save_dataset(examples, gen_out);
            std::cerr << "wrote " << examples.size() << " examples to " << gen_out << "\n";
            return 0;
        }

        if (*train_cmd) {
            nlohmann::json file_cfg = detail::load_config_file(train_config);
            ModelConfig mc = preset == "paper" ? ModelConfig::paper_default() : ModelConfig::desk();
            if (file_cfg.contains("model")) from_json_opt(file_cfg["model"], mc);
            TrainConfig tc = TrainConfig::desk();
            if (file_cfg.contains("train")) from_json_opt(file_cfg["train"], tc);
            DecoderConfig dc;
            if (file_cfg.contains("decoder")) from_json_opt(file_cfg["decoder"], dc);
            dc = detail::parse_ablations(dc, train_ablate);
            if (lr_flag >= 0) tc.lr = lr_flag;
            if (batch_flag > 0) tc.batch_size = batch_flag;
            if (steps_flag > 0) tc.max_steps = steps_flag;
            if (k_flag > 0) tc.k_train = k_flag;
            if (eval_interval_flag > 0) tc.eval_interval = eval_interval_flag;
            if (train_seed_set) tc.seed = train_seed;
            else if (!file_cfg.contains("train") || !file_cfg["train"].contains("seed"))
                tc.seed = detail::env_seed();
            detail::print_resolved("train", {{"model", to_json(mc)},
                                             {"train", to_json(tc)},
                                             {"decoder", to_json(dc)},
                                             {"threads", threads}});
            auto data = load_dataset(train_data);
            std::vector<Example> dev;
            if (!train_dev.empty()) dev = load_dataset(train_dev);
            Model model(mc, build_vocab(data), tc.seed);
            TrainOutcome out = train(model, data, train_dev.empty() ? nullptr : &dev, tc, dc,
                                     threads, train_metrics);
            model.save(train_ckpt);
            std::cerr << "trained " << out.steps_run << " steps";
            if (out.best_dev_em >= 0) std::cerr << ", best dev EM " << out.best_dev_em;
            std::cerr << (out.early_stopped ? " (early stop)" : "") << "; checkpoint at "
                      << train_ckpt << "\n";
            return 0;
        }

        if (*decode_cmd) {
            Model model = Model::load(dec_ckpt);
            DecoderConfig dc;
            dc.beam_size = dec_k;
            dc.steps = dec_t;
            dc = detail::parse_ablations(dc, dec_ablate);
            detail::print_resolved("decode", {{"decoder", to_json(dc)},
                                              {"model", to_json(model.cfg)},
                                              {"threads", dec_threads}});
            auto data = load_dataset(dec_data);
            std::vector<nlohmann::json> traces(data.size());
            parallel_for(data.size(), dec_threads, [&](std::size_t i) {
                DecodeOptions opt;
                opt.cfg = dc;
                traces[i] = trace_to_json(decode(model, data[i], opt));
            });
            write_traces(traces, dec_traces);
            std::cerr << "wrote " << traces.size() << " traces to " << dec_traces << "\n";
            return 0;
        }

        if (*eval_cmd) {
            detail::print_resolved("eval", {{"traces", eval_traces}, {"data", eval_data}});
            auto traces = read_traces(eval_traces);
            auto data = load_dataset(eval_data);
            eval::EvalReport report = eval::analysis_report(traces, data, eval_report);
            std::cout << "n=" << report.records.size() << " em=" << report.em
                      << " bem=" << report.bem << " z0_recall=" << report.z0_recall << "\n";
            return 0;
        }

        if (*grad_cmd) {
            detail::print_resolved("gradcheck", {{"seed", grad_seed}, {"op", grad_op}});
            bool all_ok = true;
            auto run_one = [&](const std::string& op) {
                nn::GradCheckResult r = nn::grad_check(op, grad_seed);
                std::printf("%-12s max_rel_err=%.3e tolerance=%.0e %s\n", r.op.c_str(),
                            r.max_rel_err, r.tolerance, r.ok() ? "pass" : "FAIL");
                all_ok &= r.ok();
            };
            if (!grad_op.empty()) run_one(grad_op);
            else
                for (const auto& [op, tol] : nn::grad_check_ops()) run_one(op);
            return all_ok ? 0 : 1;
        }

        if (*oracle_cmd) {
            detail::print_resolved("oracle-decode",
                                   {{"k", oracle_k}, {"t", oracle_t}, {"threads", oracle_threads}});
            auto data = load_dataset(oracle_data);
            ModelConfig mc = ModelConfig::desk();
            Model model(mc, build_vocab(data), 1);
            std::vector<TraceView> traces(data.size());
            std::vector<GoldInfo> golds(data.size());
            parallel_for(data.size(), oracle_threads, [&](std::size_t i) {
                golds[i] = make_gold_info(data[i]);
                OracleScorer oracle = detail::make_oracle(golds[i]);
                DecodeOptions opt;
                opt.cfg.beam_size = oracle_k;
                opt.cfg.steps = oracle_t;
                opt.oracle = &oracle;
                traces[i] = trace_view(decode(model, data[i], opt));
            });
            eval::EvalReport report = eval::evaluate(traces, data);
            double zt_all = 1.0;
            for (const auto& [t, v] : report.recall_by_step)
                zt_all = std::min(zt_all, static_cast<double>(v[1]) / v[0]);
            std::cout << "n=" << report.records.size() << " em=" << report.em
                      << " bem=" << report.bem << " z0_recall=" << report.z0_recall
                      << " min_zt_recall=" << zt_all << "\n";
            return report.em == 1.0 ? 0 : 1;
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace smbop::cli
