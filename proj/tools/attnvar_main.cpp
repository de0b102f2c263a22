// SPDX-License-Identifier: Apache-2.0
#include "attnvar/config.hpp"
#include "attnvar/data.hpp"
#include "attnvar/harness.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

namespace fs = std::filesystem;
using namespace attnvar;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<data::Example> load_split(const std::string& path) {
    return data::read_corpus(path);
}

int run_gen_data(const std::string& out, data::TaskConfig task, int n_train, int n_val,
                 int n_test) {
    task.num_examples = n_train + n_val + n_test;
    const std::vector<data::Example> all = data::synth_task_generate(task);
    fs::create_directories(out);
    auto slice = [&](int begin, int count) {
        return std::vector<data::Example>(all.begin() + begin, all.begin() + begin + count);
    };
    data::write_corpus((fs::path(out) / "train.txt").string(), slice(0, n_train), task);
    data::write_corpus((fs::path(out) / "val.txt").string(), slice(n_train, n_val), task);
    data::write_corpus((fs::path(out) / "test.txt").string(), slice(n_train + n_val, n_test),
                       task);
    std::cout << "wrote " << n_train << "/" << n_val << "/" << n_test
              << " train/val/test examples to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pointer-generator summarizer with attention-variance optimization"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic salient-copy corpus");
    std::string gen_out;
    data::TaskConfig task;
    int n_train = 2000, n_val = 200, n_test = 200;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", task.seed, "generator seed");
    gen->add_option("--train", n_train, "training examples");
    gen->add_option("--val", n_val, "validation examples");
    gen->add_option("--test", n_test, "test examples");
    gen->add_option("--min-source", task.min_source_len, "minimum source length");
    gen->add_option("--max-source", task.max_source_len, "maximum source length");
    gen->add_option("--min-segment", task.min_segment_len, "minimum segment length");
    gen->add_option("--max-segment", task.max_segment_len, "maximum segment length");
    gen->add_option("--min-target", task.min_target_len, "minimum target length");
    gen->add_option("--max-target", task.max_target_len, "maximum target length");
    gen->add_option("--salient", task.salient_fraction, "salient segment fraction");
    gen->add_option("--oov", task.oov_rate, "rare-token rate inside salient segments");
    gen->add_option("--distractor", task.distractor_repeat_rate,
                    "probability a distractor segment is duplicated");
    gen->add_option("--word-pool", task.word_pool, "base word pool size");

    // train
    auto* tr = app.add_subcommand("train", "two-phase training run");
    std::string tr_config, tr_train, tr_val, tr_out;
    std::uint64_t tr_seed = 0;
    tr->add_option("--config", tr_config, "key=value config file (defaults when omitted)");
    tr->add_option("--train", tr_train, "training corpus")->required();
    tr->add_option("--val", tr_val, "validation corpus");
    tr->add_option("--out", tr_out, "artifact directory")->required();
    tr->add_option("--seed", tr_seed, "override the config seed (nonzero)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "beam-decode a split and report metrics");
    std::string ev_ckpt, ev_vocab, ev_corpus, ev_out, ev_block = "config";
    std::string ev_model = "model", ev_split = "test";
    int ev_beam = 0, ev_max_len = 0;
    ev->add_option("--ckpt", ev_ckpt)->required();
    ev->add_option("--vocab", ev_vocab)->required();
    ev->add_option("--corpus", ev_corpus)->required();
    ev->add_option("--out", ev_out, "directory for metrics.csv and decoded.txt")->required();
    ev->add_option("--beam", ev_beam, "beam size (0 = checkpoint config)");
    ev->add_option("--max-len", ev_max_len, "decode length cap (0 = checkpoint config)");
    ev->add_option("--block", ev_block, "trigram blocking: on, off, or config")
        ->check(CLI::IsMember({"on", "off", "config"}));
    ev->add_option("--model", ev_model, "model column in metrics.csv");
    ev->add_option("--split", ev_split, "split column in metrics.csv");

    // decode
    auto* de = app.add_subcommand("decode", "beam-decode a split to text");
    std::string de_ckpt, de_vocab, de_corpus, de_out;
    std::string de_block = "config";
    int de_beam = 0, de_max_len = 0;
    de->add_option("--ckpt", de_ckpt)->required();
    de->add_option("--vocab", de_vocab)->required();
    de->add_option("--corpus", de_corpus)->required();
    de->add_option("--out", de_out, "output file (stdout when omitted)");
    de->add_option("--beam", de_beam);
    de->add_option("--max-len", de_max_len);
    de->add_option("--block", de_block)->check(CLI::IsMember({"on", "off", "config"}));

    // analyze
    auto* an = app.add_subcommand("analyze", "dump per-step attention matrices and stats");
    std::string an_ckpt, an_vocab, an_corpus, an_out;
    int an_max_len = 0;
    an->add_option("--ckpt", an_ckpt)->required();
    an->add_option("--vocab", an_vocab)->required();
    an->add_option("--corpus", an_corpus)->required();
    an->add_option("--out", an_out)->required();
    an->add_option("--max-len", an_max_len, "decode length cap (0 = checkpoint config)");

    // ablation
    auto* ab = app.add_subcommand("ablation", "train and compare the four model variants");
    std::string ab_config, ab_train, ab_val, ab_test, ab_out;
    ab->add_option("--config", ab_config, "base config file (defaults when omitted)");
    ab->add_option("--train", ab_train)->required();
    ab->add_option("--val", ab_val)->required();
    ab->add_option("--test", ab_test)->required();
    ab->add_option("--out", ab_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_data(gen_out, task, n_train, n_val, n_test);

        if (tr->parsed()) {
            TrainConfig cfg = tr_config.empty() ? TrainConfig{} : parse_config_file(tr_config);
            if (tr_seed != 0) cfg.seed = tr_seed;
            const auto t0 = std::chrono::steady_clock::now();
            harness::TrainResult res = harness::train(
                cfg, load_split(tr_train),
                tr_val.empty() ? std::vector<data::Example>{} : load_split(tr_val), tr_out);
            std::cout << "trained " << res.iterations_run << " iterations in " << std::fixed
                      << seconds_since(t0) << " s; artifacts in " << tr_out << "\n";
            return 0;
        }

        auto block_flag = [](const std::string& v) { return v == "config" ? -1 : v == "on"; };

        if (ev->parsed()) {
            harness::EvalOverrides ov{ev_beam, ev_max_len, block_flag(ev_block)};
            const auto t0 = std::chrono::steady_clock::now();
            harness::EvalResult res = harness::evaluate_checkpoint(
                ev_ckpt, ev_vocab, load_split(ev_corpus), ov, ev_model, ev_split);
            harness::write_eval(ev_out, res);
            std::printf("%s/%s: rouge1=%.4f rouge2=%.4f rougeL=%.4f dup3=%.4f (%.2f s)\n",
                        res.row.model.c_str(), res.row.split.c_str(), res.row.rouge1,
                        res.row.rouge2, res.row.rougeL, res.row.dup3, seconds_since(t0));
            return 0;
        }

        if (de->parsed()) {
            harness::EvalOverrides ov{de_beam, de_max_len, block_flag(de_block)};
            harness::EvalResult res = harness::evaluate_checkpoint(
                de_ckpt, de_vocab, load_split(de_corpus), ov, "model", "decode");
            if (de_out.empty()) {
                for (const std::string& line : res.decoded_lines) std::cout << line << "\n";
            } else {
                std::ofstream f(de_out, std::ios::binary);
                if (!f) throw std::runtime_error("decode: cannot open " + de_out);
                for (const std::string& line : res.decoded_lines) f << line << "\n";
            }
            return 0;
        }

        if (an->parsed()) {
            const auto summaries = harness::analyze_checkpoint(an_ckpt, an_vocab,
                                                               load_split(an_corpus), an_max_len,
                                                               an_out);
            std::cout << "analyzed " << summaries.size() << " examples into " << an_out << "\n";
            return 0;
        }

        if (ab->parsed()) {
            TrainConfig cfg = ab_config.empty() ? TrainConfig{} : parse_config_file(ab_config);
            const auto t0 = std::chrono::steady_clock::now();
            const auto rows = harness::run_ablation(cfg, load_split(ab_train), load_split(ab_val),
                                                    load_split(ab_test), ab_out);
            harness::write_ablation_csv((fs::path(ab_out) / "ablation.csv").string(), rows);
            std::cout << "ablation over " << cfg.seeds.size() << " seeds finished in "
                      << std::fixed << seconds_since(t0) << " s; table in " << ab_out
                      << "/ablation.csv\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
