// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/config.hpp"
#include "attnvar/data.hpp"
#include "attnvar/losses.hpp"
#include "attnvar/metrics.hpp"
#include "attnvar/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace attnvar::harness {

/// Adagrad with per-coordinate accumulators. step() applies a global-norm
/// clip to the raw gradients, folds the clipped gradients into the
/// accumulators, updates the parameters, and zeroes the gradients.
class Adagrad {
public:
    Adagrad(std::vector<ad::Parameter*> params, double lr, double acc_init);

    /// Returns the pre-clip global gradient norm.
    double step(double clip_norm);

    const Mat& accumulator(std::size_t i) const { return acc_[i]; }

private:
    std::vector<ad::Parameter*> params_;
    std::vector<Mat> acc_;
    double lr_;
};

/// Throws std::runtime_error naming the iteration and every loss component
/// when any component is non-finite.
void ensure_finite(const losses::LossBreakdown& b, int iteration);

struct RunLogRow {
    int iter = 0; // 1-based, strictly increasing across both phases
    std::string phase;
    losses::LossBreakdown loss;
    bool validated = false;
    double val_mle = 0.0;
    double val_rouge1 = 0.0;
};

struct TrainResult {
    model::ModelParams params;
    data::Vocabulary vocab;
    std::vector<RunLogRow> log;
    std::string config_echo;
    std::string ckpt_phase1;
    std::string ckpt_final;
    int iterations_run = 0;
};

/// Two-phase training: phase 1 minimizes the MLE loss alone, phase 2
/// continues from the phase-1 parameters on the mixed objective. Writes
/// config.echo, vocab.txt, run.log, ckpt_phase1.bin, ckpt_final.bin into
/// out_dir. Every artifact byte is a pure function of (config, corpus).
TrainResult train(const TrainConfig& cfg, const std::vector<data::Example>& train_set,
                  const std::vector<data::Example>& val_set, const std::string& out_dir);

/// Mean teacher-forced MLE loss over the given encoded examples.
double validation_mle(model::ModelParams& params, std::span<const data::ExtendedExample> examples,
                      model::GateForm form);

/// Replay of a fixed emitted token sequence through the decoder, collecting
/// the per-step attention trace. One extra step past the last token covers
/// the EOS decision, so an emission of length L yields L+1 rows.
struct ReplayTrace {
    losses::DecodeTrace trace; // refined rows; gold_logp of the replayed tokens
    std::vector<Mat> attn, gate, renorm;
};
ReplayTrace replay(model::ModelParams& params, const data::ExtendedExample& ex,
                   std::span<const int> emitted, model::GateForm form);

/// ROUGE/duplication means over a decoded corpus; attention columns left 0.
metrics::MetricsRow summarize_text(const std::vector<std::vector<int>>& decoded,
                                   const std::vector<std::vector<int>>& references,
                                   std::string model_name, std::string split_name);

struct EvalResult {
    metrics::MetricsRow row;
    std::vector<std::vector<int>> decoded;  // extended-vocab ids per example
    std::vector<std::string> decoded_lines; // rendered surface form per example
};

EvalResult evaluate_model(model::ModelParams& params, const data::Vocabulary& vocab,
                          const std::vector<data::Example>& split_examples, model::GateForm form,
                          int beam, int max_len, bool block_trigrams, std::string model_name,
                          std::string split_name);

/// Optional overrides for checkpoint-driven evaluation; zero/negative fields
/// fall back to the checkpoint's embedded config.
struct EvalOverrides {
    int beam = 0;
    int max_len = 0;
    int block_trigrams = -1; // -1 config, 0 off, 1 on
};

/// Loads a checkpoint, verifies the vocabulary fingerprint against the
/// embedded config, and evaluates. Throws on vocabulary mismatch.
EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& vocab_path,
                               const std::vector<data::Example>& split_examples,
                               const EvalOverrides& ov, std::string model_name,
                               std::string split_name);

/// Writes metrics.csv and decoded.txt into out_dir.
void write_eval(const std::string& out_dir, const EvalResult& result);

struct AnalyzeSummary {
    std::vector<int> decoded; // greedy emission, EOS excluded
    metrics::AttentionStats stats;
    int steps = 0;
    int source_len = 0;
};

/// Greedy-decodes each example, dumping per-step a, r, a^r, and renormalized
/// attention matrices (one file per example, shortest round-trip decimals)
/// plus a stats.csv summary into out_dir.
std::vector<AnalyzeSummary> analyze_model(model::ModelParams& params,
                                          const data::Vocabulary& vocab,
                                          const std::vector<data::Example>& split_examples,
                                          model::GateForm form, int max_len,
                                          const std::string& out_dir);

std::vector<AnalyzeSummary> analyze_checkpoint(const std::string& ckpt_path,
                                               const std::string& vocab_path,
                                               const std::vector<data::Example>& split_examples,
                                               int max_len, const std::string& out_dir);

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    bool is_mean = false;
    metrics::MetricsRow metrics;
};

/// Trains and evaluates the four incremental variants — plain PGN, +ARU,
/// +ARU+local loss, +ARU+both losses — over every seed in cfg.seeds, with
/// per-variant mean rows appended. Artifacts land in out_dir/<variant>/seed<N>.
std::vector<AblationRow> run_ablation(const TrainConfig& cfg,
                                      const std::vector<data::Example>& train_set,
                                      const std::vector<data::Example>& val_set,
                                      const std::vector<data::Example>& test_set,
                                      const std::string& out_dir);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

} // namespace attnvar::harness
