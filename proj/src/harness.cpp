// SPDX-License-Identifier: Apache-2.0
#include "attnvar/harness.hpp"

#include "attnvar/checkpoint.hpp"
#include "attnvar/decoding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

namespace attnvar::harness {
namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Shortest decimal form that round-trips the exact double.
std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::logic_error("harness: number formatting failed");
    return std::string(buf, end);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("harness: cannot open " + path);
    f << text;
}

std::vector<int> strip_bos_eos(const std::vector<int>& target_ids) {
    if (target_ids.size() < 2) throw std::invalid_argument("target must carry BOS and EOS");
    return std::vector<int>(target_ids.begin() + 1, target_ids.end() - 1);
}

std::string join(const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += tokens[i];
    }
    return s;
}

} // namespace

Adagrad::Adagrad(std::vector<ad::Parameter*> params, double lr, double acc_init)
    : params_(std::move(params)), lr_(lr) {
    acc_.reserve(params_.size());
    for (const ad::Parameter* p : params_)
        acc_.push_back(Mat::Constant(p->value.rows(), p->value.cols(), acc_init));
}

double Adagrad::step(double clip_norm) {
    double sq = 0.0;
    for (const ad::Parameter* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ad::Parameter& p = *params_[i];
        const Mat g = p.grad * scale;
        acc_[i].array() += g.array().square();
        p.value.array() -= lr_ * g.array() / acc_[i].array().sqrt();
        p.grad.setZero();
    }
    return norm;
}

void ensure_finite(const losses::LossBreakdown& b, int iteration) {
    if (std::isfinite(b.mle) && std::isfinite(b.local) && std::isfinite(b.global) &&
        std::isfinite(b.mixed))
        return;
    throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iteration) +
                             ": mle=" + fmt(b.mle) + " local=" + fmt(b.local) +
                             " global=" + fmt(b.global) + " mixed=" + fmt(b.mixed));
}

double validation_mle(model::ModelParams& params, std::span<const data::ExtendedExample> examples,
                      model::GateForm form) {
    if (examples.empty()) throw std::invalid_argument("validation_mle: empty example set");
    double sum = 0.0;
    for (const data::ExtendedExample& ex : examples) {
        auto enc = model::encode_value(params, ex.source_ids);
        model::ValueState st = enc.init;
        int prev = ex.target_ids.front();
        losses::DecodeTrace trace;
        const int n_oov = static_cast<int>(ex.oovs.size());
        for (std::size_t t = 1; t < ex.target_ids.size(); ++t) {
            auto so = model::decode_step_value(params, prev, st, enc.states, ex.source_ext_ids,
                                               n_oov, form);
            const int gold = ex.target_ids[t];
            trace.gold_logp.push_back(std::log(std::max(so.final_dist(0, gold), 1e-12)));
            trace.refined.push_back(so.refined);
            st = std::move(so.state);
            prev = gold;
        }
        sum += losses::mle_value(trace);
    }
    return sum / static_cast<double>(examples.size());
}

ReplayTrace replay(model::ModelParams& params, const data::ExtendedExample& ex,
                   std::span<const int> emitted, model::GateForm form) {
    auto enc = model::encode_value(params, ex.source_ids);
    model::ValueState st = enc.init;
    int prev = data::kBos;
    const int n_oov = static_cast<int>(ex.oovs.size());
    ReplayTrace out;
    for (std::size_t t = 0; t <= emitted.size(); ++t) {
        auto so =
            model::decode_step_value(params, prev, st, enc.states, ex.source_ext_ids, n_oov, form);
        const int tok = t < emitted.size() ? emitted[t] : data::kEos;
        out.trace.refined.push_back(so.refined);
        out.trace.gold_logp.push_back(std::log(std::max(so.final_dist(0, tok), 1e-12)));
        out.attn.push_back(so.attn);
        out.gate.push_back(so.gate);
        out.renorm.push_back(so.renorm);
        st = std::move(so.state);
        prev = tok;
    }
    return out;
}

TrainResult train(const TrainConfig& cfg_in, const std::vector<data::Example>& train_set,
                  const std::vector<data::Example>& val_set, const std::string& out_dir) {
    cfg_in.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training corpus");
    fs::create_directories(out_dir);

    data::Vocabulary vocab = data::build_vocab(train_set, cfg_in.vocab);
    TrainConfig cfg = cfg_in;
    cfg.vocab_fingerprint = vocab.fingerprint();
    const std::string echo = cfg.echo();
    write_text((fs::path(out_dir) / "config.echo").string(), echo);
    data::write_vocab((fs::path(out_dir) / "vocab.txt").string(), vocab);

    std::vector<data::ExtendedExample> train_enc, val_enc;
    train_enc.reserve(train_set.size());
    for (const data::Example& ex : train_set) train_enc.push_back(data::encode_example(ex, vocab));
    for (const data::Example& ex : val_set) val_enc.push_back(data::encode_example(ex, vocab));
    const std::size_t val_n = val_enc.empty() ? 0
                              : cfg.val_examples == 0
                                  ? val_enc.size()
                                  : std::min(val_enc.size(), static_cast<std::size_t>(cfg.val_examples));
    const std::span<const data::ExtendedExample> val_sub(val_enc.data(), val_n);

    const model::GateForm form = model::gate_form_from(cfg.gate_form);
    model::ModelParams params = model::init_model(vocab.size(), cfg.embed, cfg.hidden, cfg.seed);
    Adagrad opt(params.all(), cfg.lr, cfg.acc_init);

    // Batch stream: reshuffled every pass over the training set.
    std::vector<data::Batch> batches;
    std::size_t cursor = 0;
    std::uint64_t epoch = 0;
    auto next_batch = [&]() -> const data::Batch& {
        if (cursor >= batches.size()) {
            batches = data::make_batches(train_enc, cfg.batch,
                                         splitmix64(cfg.seed) ^ splitmix64(epoch));
            ++epoch;
            cursor = 0;
        }
        return batches[cursor++];
    };

    std::vector<RunLogRow> log;
    std::string log_text = "# seed=" + std::to_string(cfg.seed) + "\n# config\n";
    {
        std::size_t start = 0;
        while (start < echo.size()) {
            const std::size_t nl = echo.find('\n', start);
            log_text += "# " + echo.substr(start, nl - start) + "\n";
            start = nl + 1;
        }
    }
    log_text += "# end config\niter,phase,mle,local,global,mixed,val_mle,val_rouge1\n";

    int global_iter = 0;
    auto run_phase = [&](const char* phase, int budget, bool mixed_objective) {
        double best_val = std::numeric_limits<double>::infinity();
        int bad = 0;
        for (int i = 0; i < budget; ++i) {
            ++global_iter;
            const data::Batch& batch = next_batch();
            ad::Graph g;
            ad::Var mle_sum, local_sum, global_sum, mixed_sum;
            for (const data::ExtendedExample& ex : batch.items) {
                model::ExampleForward fwd = model::forward_example(g, params, ex, form);
                losses::LossNodes ln = losses::mixed_loss(fwd.gold_probs, fwd.refined, cfg.lambda1,
                                                          cfg.lambda2, cfg.eps);
                mle_sum = mle_sum.valid() ? ad::add(mle_sum, ln.mle) : ln.mle;
                local_sum = local_sum.valid() ? ad::add(local_sum, ln.local) : ln.local;
                global_sum = global_sum.valid() ? ad::add(global_sum, ln.global) : ln.global;
                mixed_sum = mixed_sum.valid() ? ad::add(mixed_sum, ln.mixed) : ln.mixed;
            }
            const double inv = 1.0 / static_cast<double>(batch.items.size());
            ad::Var mle_mean = ad::scale(mle_sum, inv);
            ad::Var local_mean = ad::scale(local_sum, inv);
            ad::Var global_mean = ad::scale(global_sum, inv);
            ad::Var mixed_mean = ad::scale(mixed_sum, inv);

            RunLogRow row;
            row.iter = global_iter;
            row.phase = phase;
            row.loss.mle = mle_mean.scalar();
            row.loss.local = local_mean.scalar();
            row.loss.global = global_mean.scalar();
            row.loss.mixed = mixed_mean.scalar();
            row.loss.lambda1 = cfg.lambda1;
            row.loss.lambda2 = cfg.lambda2;
            ensure_finite(row.loss, global_iter);

            g.backward(mixed_objective ? mixed_mean : mle_mean);
            opt.step(cfg.clip_norm);

            if (val_n > 0 && global_iter % cfg.val_interval == 0) {
                row.validated = true;
                row.val_mle = validation_mle(params, val_sub, form);
                double rouge_sum = 0.0;
                for (const data::ExtendedExample& ex : val_sub) {
                    const std::vector<int> hyp =
                        decoding::greedy_decode(params, ex, form, cfg.max_decode_len);
                    rouge_sum += metrics::rouge_n(hyp, strip_bos_eos(ex.target_ids), 1).f1;
                }
                row.val_rouge1 = rouge_sum / static_cast<double>(val_n);
            }

            log_text += std::to_string(row.iter);
            log_text += ',';
            log_text += phase;
            log_text += ',' + fmt(row.loss.mle) + ',' + fmt(row.loss.local) + ',' +
                        fmt(row.loss.global) + ',' + fmt(row.loss.mixed) + ',';
            if (row.validated) log_text += fmt(row.val_mle);
            log_text += ',';
            if (row.validated) log_text += fmt(row.val_rouge1);
            log_text += '\n';
            log.push_back(row);

            if (row.validated) {
                if (row.val_mle < best_val) {
                    best_val = row.val_mle;
                    bad = 0;
                } else if (++bad >= cfg.patience) {
                    log_text += std::string("# early-stop phase=") + phase +
                                " iter=" + std::to_string(global_iter) +
                                " best_val_mle=" + fmt(best_val) + "\n";
                    return;
                }
            }
        }
    };

    // On abort, flush the partial log and tag the error with the iteration so
    // failures are diagnosable from the run directory.
    auto guarded_phase = [&](const char* phase, int budget, bool mixed_objective) {
        try {
            run_phase(phase, budget, mixed_objective);
        } catch (const std::exception& e) {
            // global_iter is bumped at the top of each iteration, so it names
            // the iteration that failed.
            log_text += std::string("# abort phase=") + phase +
                        " iter=" + std::to_string(global_iter) + " error=" + e.what() + "\n";
            write_text((fs::path(out_dir) / "run.log").string(), log_text);
            throw std::runtime_error("training aborted at iteration " +
                                     std::to_string(global_iter) + ": " + e.what());
        }
    };

    guarded_phase("pretrain", cfg.pretrain_iters, false);
    const std::string p1 = (fs::path(out_dir) / "ckpt_phase1.bin").string();
    ckpt::save(p1, echo, std::as_const(params).all());

    guarded_phase("finetune", cfg.finetune_iters, true);
    const std::string pf = (fs::path(out_dir) / "ckpt_final.bin").string();
    ckpt::save(pf, echo, std::as_const(params).all());

    write_text((fs::path(out_dir) / "run.log").string(), log_text);

    return TrainResult{std::move(params), std::move(vocab), std::move(log),
                       echo,              p1,               pf,
                       global_iter};
}

metrics::MetricsRow summarize_text(const std::vector<std::vector<int>>& decoded,
                                   const std::vector<std::vector<int>>& references,
                                   std::string model_name, std::string split_name) {
    if (decoded.size() != references.size())
        throw std::invalid_argument("summarize_text: decoded/reference count mismatch");
    metrics::MetricsRow row;
    row.model = std::move(model_name);
    row.split = std::move(split_name);
    if (decoded.empty()) return row;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        row.rouge1 += metrics::rouge_n(decoded[i], references[i], 1).f1;
        row.rouge2 += metrics::rouge_n(decoded[i], references[i], 2).f1;
        row.rougeL += metrics::rouge_l(decoded[i], references[i]).f1;
        row.dup1 += metrics::duplication_rate(decoded[i], 1);
        row.dup2 += metrics::duplication_rate(decoded[i], 2);
        row.dup3 += metrics::duplication_rate(decoded[i], 3);
        row.dup4 += metrics::duplication_rate(decoded[i], 4);
    }
    const double n = static_cast<double>(decoded.size());
    row.rouge1 /= n;
    row.rouge2 /= n;
    row.rougeL /= n;
    row.dup1 /= n;
    row.dup2 /= n;
    row.dup3 /= n;
    row.dup4 /= n;
    return row;
}

EvalResult evaluate_model(model::ModelParams& params, const data::Vocabulary& vocab,
                          const std::vector<data::Example>& split_examples, model::GateForm form,
                          int beam, int max_len, bool block_trigrams, std::string model_name,
                          std::string split_name) {
    EvalResult out;
    std::vector<std::vector<int>> refs;
    std::vector<double> step_variances;
    double g_mean_sum = 0.0;
    for (const data::Example& raw : split_examples) {
        const data::ExtendedExample ex = data::encode_example(raw, vocab);
        const decoding::BeamResult r =
            decoding::beam_search(params, ex, form, beam, max_len, block_trigrams);
        out.decoded.push_back(r.tokens);
        out.decoded_lines.push_back(join(decoding::render_tokens(r.tokens, vocab, ex.oovs)));
        refs.push_back(strip_bos_eos(ex.target_ids));

        // Re-run the chosen hypothesis to recover its attention trace. The
        // trailing EOS step exists only when the beam actually emitted EOS.
        ReplayTrace tr = replay(params, ex, r.tokens, form);
        if (r.steps == static_cast<int>(r.tokens.size())) {
            tr.trace.refined.pop_back();
            tr.trace.gold_logp.pop_back();
        }
        for (const Mat& rrow : tr.trace.refined)
            step_variances.push_back(losses::variance_around_median(rrow));
        g_mean_sum += losses::global_g(tr.trace.refined).mean();
    }
    out.row = summarize_text(out.decoded, refs, std::move(model_name), std::move(split_name));
    if (!step_variances.empty()) {
        double s = 0.0;
        for (double v : step_variances) s += v;
        out.row.mean_local_variance = s / static_cast<double>(step_variances.size());
    }
    if (!split_examples.empty())
        out.row.mean_global_g = g_mean_sum / static_cast<double>(split_examples.size());
    return out;
}

namespace {

struct LoadedCheckpoint {
    TrainConfig cfg;
    data::Vocabulary vocab;
    model::ModelParams params;
};

LoadedCheckpoint load_for_inference(const std::string& ckpt_path, const std::string& vocab_path) {
    const ckpt::Checkpoint c = ckpt::load(ckpt_path);
    TrainConfig cfg = parse_config_text(c.config_echo);
    data::Vocabulary vocab = data::read_vocab(vocab_path);
    if (vocab.fingerprint() != cfg.vocab_fingerprint)
        throw std::runtime_error("evaluate: vocabulary mismatch: checkpoint was trained with "
                                 "fingerprint " +
                                 std::to_string(cfg.vocab_fingerprint) + ", " + vocab_path +
                                 " has " + std::to_string(vocab.fingerprint()));
    model::ModelParams params(vocab.size(), cfg.embed, cfg.hidden);
    ckpt::restore(c, params.all());
    return LoadedCheckpoint{std::move(cfg), std::move(vocab), std::move(params)};
}

} // namespace

EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& vocab_path,
                               const std::vector<data::Example>& split_examples,
                               const EvalOverrides& ov, std::string model_name,
                               std::string split_name) {
    LoadedCheckpoint lc = load_for_inference(ckpt_path, vocab_path);
    const int beam = ov.beam > 0 ? ov.beam : lc.cfg.beam;
    const int max_len = ov.max_len > 0 ? ov.max_len : lc.cfg.max_decode_len;
    const bool block = ov.block_trigrams < 0 ? lc.cfg.block_trigrams : ov.block_trigrams != 0;
    return evaluate_model(lc.params, lc.vocab, split_examples,
                          model::gate_form_from(lc.cfg.gate_form), beam, max_len, block,
                          std::move(model_name), std::move(split_name));
}

void write_eval(const std::string& out_dir, const EvalResult& result) {
    fs::create_directories(out_dir);
    metrics::write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), {result.row});
    std::string text;
    for (const std::string& line : result.decoded_lines) text += line + "\n";
    write_text((fs::path(out_dir) / "decoded.txt").string(), text);
}

std::vector<AnalyzeSummary> analyze_model(model::ModelParams& params,
                                          const data::Vocabulary& vocab,
                                          const std::vector<data::Example>& split_examples,
                                          model::GateForm form, int max_len,
                                          const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<AnalyzeSummary> out;
    std::string stats_csv = "example,steps,source_len,mean_step_variance,mean_gate,mean_g\n";
    for (std::size_t idx = 0; idx < split_examples.size(); ++idx) {
        const data::ExtendedExample ex = data::encode_example(split_examples[idx], vocab);
        auto enc = model::encode_value(params, ex.source_ids);
        model::ValueState st = enc.init;
        int prev = data::kBos;
        const int n_oov = static_cast<int>(ex.oovs.size());

        AnalyzeSummary summary;
        losses::DecodeTrace trace;
        std::vector<Mat> attn_rows, gate_rows, renorm_rows;
        for (int step = 0; step < max_len; ++step) {
            auto so = model::decode_step_value(params, prev, st, enc.states, ex.source_ext_ids,
                                               n_oov, form);
            attn_rows.push_back(so.attn);
            gate_rows.push_back(so.gate);
            trace.refined.push_back(so.refined);
            renorm_rows.push_back(so.renorm);
            int best = 0;
            for (Eigen::Index t = 1; t < so.final_dist.cols(); ++t)
                if (so.final_dist(0, t) > so.final_dist(0, best)) best = static_cast<int>(t);
            if (best == data::kEos) break;
            summary.decoded.push_back(best);
            st = std::move(so.state);
            prev = best;
        }
        summary.stats = metrics::attention_stats(trace, gate_rows);
        summary.steps = static_cast<int>(trace.steps());
        summary.source_len = static_cast<int>(ex.source_ids.size());

        const Eigen::Index cols = trace.source_len();
        auto matrix_block = [&](const char* name, const std::vector<Mat>& rows) {
            std::string s = std::string("matrix ") + name + ' ' + std::to_string(rows.size()) +
                            ' ' + std::to_string(cols) + '\n';
            for (const Mat& r : rows) {
                for (Eigen::Index j = 0; j < r.cols(); ++j) {
                    if (j) s += ' ';
                    s += fmt(r(0, j));
                }
                s += '\n';
            }
            return s;
        };
        auto vector_block = [&](const char* name, const auto& get, std::size_t n) {
            std::string s = std::string("stats ") + name + ' ' + std::to_string(n) + '\n';
            for (std::size_t j = 0; j < n; ++j) {
                if (j) s += ' ';
                s += fmt(get(j));
            }
            s += '\n';
            return s;
        };

        std::string dump = "example " + std::to_string(idx) + "\nsteps " +
                           std::to_string(summary.steps) + "\nsource " + std::to_string(cols) +
                           '\n';
        dump += matrix_block("a", attn_rows);
        dump += matrix_block("r", gate_rows);
        dump += matrix_block("ar", trace.refined);
        dump += matrix_block("atilde", renorm_rows);
        const metrics::AttentionStats& stats = summary.stats;
        dump += vector_block(
            "step_variance", [&](std::size_t j) { return stats.step_variance[j]; },
            stats.step_variance.size());
        dump += vector_block(
            "gate_mean", [&](std::size_t j) { return stats.step_gate_mean[j]; },
            stats.step_gate_mean.size());
        dump += vector_block(
            "accumulated",
            [&](std::size_t j) { return stats.accumulated(0, static_cast<Eigen::Index>(j)); },
            static_cast<std::size_t>(stats.accumulated.cols()));
        dump += vector_block(
            "g", [&](std::size_t j) { return stats.g(0, static_cast<Eigen::Index>(j)); },
            static_cast<std::size_t>(stats.g.cols()));
        write_text((fs::path(out_dir) / ("example_" + std::to_string(idx) + ".txt")).string(),
                   dump);

        double var_mean = 0.0, gate_mean = 0.0;
        for (double v : stats.step_variance) var_mean += v;
        for (double v : stats.step_gate_mean) gate_mean += v;
        var_mean /= static_cast<double>(stats.step_variance.size());
        gate_mean /= static_cast<double>(stats.step_gate_mean.size());
        stats_csv += std::to_string(idx) + ',' + std::to_string(summary.steps) + ',' +
                     std::to_string(summary.source_len) + ',' + fmt(var_mean) + ',' +
                     fmt(gate_mean) + ',' + fmt(stats.g.mean()) + '\n';
        out.push_back(std::move(summary));
    }
    write_text((fs::path(out_dir) / "stats.csv").string(), stats_csv);
    return out;
}

std::vector<AnalyzeSummary> analyze_checkpoint(const std::string& ckpt_path,
                                               const std::string& vocab_path,
                                               const std::vector<data::Example>& split_examples,
                                               int max_len, const std::string& out_dir) {
    LoadedCheckpoint lc = load_for_inference(ckpt_path, vocab_path);
    const int effective = max_len > 0 ? max_len : lc.cfg.max_decode_len;
    return analyze_model(lc.params, lc.vocab, split_examples,
                         model::gate_form_from(lc.cfg.gate_form), effective, out_dir);
}

std::vector<AblationRow> run_ablation(const TrainConfig& cfg,
                                      const std::vector<data::Example>& train_set,
                                      const std::vector<data::Example>& val_set,
                                      const std::vector<data::Example>& test_set,
                                      const std::string& out_dir) {
    cfg.validate();
    struct Variant {
        const char* name;
        const char* dir;
        bool aru, ll, lg;
    };
    const Variant variants[] = {
        {"pgn", "pgn", false, false, false},
        {"pgn+aru", "pgn_aru", true, false, false},
        {"pgn+aru+ll", "pgn_aru_ll", true, true, false},
        {"pgn+aru+ll+lg", "pgn_aru_ll_lg", true, true, true},
    };
    const std::string aru_form = cfg.gate_form == "off" ? "content" : cfg.gate_form;

    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        metrics::MetricsRow mean;
        mean.model = v.name;
        mean.split = "test";
        for (const std::uint64_t seed : cfg.seeds) {
            TrainConfig run_cfg = cfg;
            run_cfg.seed = seed;
            run_cfg.gate_form = v.aru ? aru_form : "off";
            run_cfg.lambda1 = v.ll ? cfg.lambda1 : 0.0;
            run_cfg.lambda2 = v.lg ? cfg.lambda2 : 0.0;
            const std::string run_dir =
                (fs::path(out_dir) / v.dir / ("seed" + std::to_string(seed))).string();
            TrainResult tr = train(run_cfg, train_set, val_set, run_dir);
            EvalResult er = evaluate_model(tr.params, tr.vocab, test_set,
                                           model::gate_form_from(run_cfg.gate_form), cfg.beam,
                                           cfg.max_decode_len, cfg.block_trigrams, v.name, "test");
            write_eval(run_dir, er);
            rows.push_back(AblationRow{v.name, seed, false, er.row});

            mean.rouge1 += er.row.rouge1;
            mean.rouge2 += er.row.rouge2;
            mean.rougeL += er.row.rougeL;
            mean.dup1 += er.row.dup1;
            mean.dup2 += er.row.dup2;
            mean.dup3 += er.row.dup3;
            mean.dup4 += er.row.dup4;
            mean.mean_local_variance += er.row.mean_local_variance;
            mean.mean_global_g += er.row.mean_global_g;
        }
        const double n_seeds = static_cast<double>(cfg.seeds.size());
        mean.rouge1 /= n_seeds;
        mean.rouge2 /= n_seeds;
        mean.rougeL /= n_seeds;
        mean.dup1 /= n_seeds;
        mean.dup2 /= n_seeds;
        mean.dup3 /= n_seeds;
        mean.dup4 /= n_seeds;
        mean.mean_local_variance /= n_seeds;
        mean.mean_global_g /= n_seeds;
        rows.push_back(AblationRow{v.name, 0, true, mean});
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::string text = "variant,seed,rouge1,rouge2,rougeL,dup1,dup2,dup3,dup4,"
                       "mean_local_variance,mean_global_g\n";
    for (const AblationRow& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                      r.metrics.rouge1, r.metrics.rouge2, r.metrics.rougeL, r.metrics.dup1,
                      r.metrics.dup2, r.metrics.dup3, r.metrics.dup4,
                      r.metrics.mean_local_variance, r.metrics.mean_global_g);
        text += r.variant + ',' + (r.is_mean ? "mean" : std::to_string(r.seed)) + ',' + buf + '\n';
    }
    write_text(path, text);
}

} // namespace attnvar::harness
