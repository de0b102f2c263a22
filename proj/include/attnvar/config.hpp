// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attnvar {

/// Flat key=value run configuration. `echo()` renders every key in a fixed
/// order with shortest round-trip number formatting, so parse(echo(c)) == c
/// and identical configs produce identical artifact headers.
struct TrainConfig {
    int hidden = 32;
    int embed = 32;
    int vocab = 200;
    int batch = 8;
    double lr = 0.15;
    double acc_init = 0.1;
    int pretrain_iters = 1500;
    int finetune_iters = 500;
    double lambda1 = 0.3;
    double lambda2 = 0.1;
    double eps = 1e-6;
    std::string gate_form = "content"; // content | broadcast | off
    int beam = 4;
    // Twice the default task's mean target length (targets are 5-20 tokens).
    int max_decode_len = 24;
    bool block_trigrams = true;
    double clip_norm = 2.0;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3}; // multi-seed runs (ablation)
    int val_interval = 100;
    int val_examples = 64; // per-validation cap; 0 = whole validation split
    int patience = 5;      // early stop after this many non-improving validations
    // Bound at training time to the vocabulary the checkpoint was built with;
    // evaluation refuses a vocabulary whose fingerprint differs.
    std::uint64_t vocab_fingerprint = 0;

    void validate() const; // throws std::invalid_argument
    std::string echo() const;
};

TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);

} // namespace attnvar
