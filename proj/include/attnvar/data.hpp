// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace attnvar::data {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kNumReserved = 4;

// Saliency markers wrap segments the target must reproduce. In-vocabulary,
// never emitted into targets.
inline constexpr const char* kSalOpen = "<sal>";
inline constexpr const char* kSalClose = "</sal>";

struct Example {
    std::vector<std::string> source;
    std::vector<std::string> target;
};

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens); // full id->token table

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int id(const std::string& token) const; // kUnk when absent
    bool contains(const std::string& token) const;
    const std::string& token(int id) const; // throws on out-of-range
    std::uint64_t fingerprint() const;      // FNV-1a over the id->token table

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

/// Keeps the most frequent V-4 tokens after the reserved four; ties broken
/// lexicographically, ids assigned in descending-count order.
Vocabulary build_vocab(const std::vector<Example>& corpus, int v);

struct SourceEncoding {
    std::vector<int> ids;      // in-vocab ids, OOVs mapped to kUnk
    std::vector<int> ext_ids;  // OOVs numbered V, V+1, ... by first occurrence
    std::vector<std::string> oovs;
};
SourceEncoding encode_source(const std::vector<std::string>& tokens, const Vocabulary& vocab);

struct ExtendedExample {
    std::vector<std::string> source_tokens;
    std::vector<int> source_ids;
    std::vector<int> source_ext_ids;
    std::vector<std::string> oovs;
    std::vector<int> target_ids; // BOS ... EOS under the extended vocab
};
ExtendedExample encode_example(const Example& ex, const Vocabulary& vocab);

/// Surface form of an extended-vocab id given the example's OOV list.
const std::string& render_token(int id, const Vocabulary& vocab,
                                const std::vector<std::string>& oovs);

struct TaskConfig {
    std::uint64_t seed = 1;
    int num_examples = 2000;
    int min_source_len = 20;
    int max_source_len = 60;
    int min_segment_len = 3;
    int max_segment_len = 6;
    // Examples are redrawn until the target lands in this window, so the
    // default config really does produce 5-20 token targets.
    int min_target_len = 5;
    int max_target_len = 20;
    double salient_fraction = 0.25;
    double oov_rate = 0.15;
    double distractor_repeat_rate = 0.0;
    // Base word pool; sized so pool + the two markers fill V-4 = 196 slots
    // at the default V=200, keeping rare tokens out of the vocabulary.
    int word_pool = 194;
};

/// Deterministic synthetic salient-copy corpus. Each source is a list of
/// segments, a salient subset wrapped in <sal>...</sal>; the target is the
/// salient segments' tokens in source order. Per-example generation depends
/// only on (seed, index).
std::vector<Example> synth_task_generate(const TaskConfig& cfg);

struct Batch {
    std::vector<ExtendedExample> items;
    // Padded to the batch max with kPad; masks are 1 for real tokens.
    std::vector<std::vector<int>> src_ids, src_ext_ids, tgt_ids;
    Mat src_mask; // B x max_src
    Mat tgt_mask; // B x max_tgt
};

std::vector<Batch> make_batches(const std::vector<ExtendedExample>& examples, int batch_size,
                                std::uint64_t seed);

// One example per line: source TAB target, tokens space-separated. write_corpus
// also emits a key=value sidecar at path + ".meta" echoing the config.
void write_corpus(const std::string& path, const std::vector<Example>& examples,
                  const TaskConfig& cfg);
std::vector<Example> read_corpus(const std::string& path);

// One token per line in id order, reserved ids included.
void write_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocab(const std::string& path);

} // namespace attnvar::data
