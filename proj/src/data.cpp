// SPDX-License-Identifier: Apache-2.0
#include "attnvar/data.hpp"

#include "attnvar/rng.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace attnvar::data {

namespace {
const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<bos>", "<eos>"};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
} // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
    for (int i = 0; i < static_cast<int>(id_to_token_.size()); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], i).second)
            throw std::invalid_argument("Vocabulary: duplicate token " + id_to_token_[i]);
    }
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("Vocabulary::token: id out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 0x100000001B3ull;
    };
    for (const std::string& t : id_to_token_) {
        for (char c : t) mix(static_cast<unsigned char>(c));
        mix('\n');
    }
    return h;
}

Vocabulary build_vocab(const std::vector<Example>& corpus, int v) {
    if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    if (v <= kNumReserved) throw std::invalid_argument("build_vocab: V must exceed reserved ids");

    std::map<std::string, std::int64_t> counts; // ordered: lexicographic tie-break for free
    for (const Example& ex : corpus) {
        for (const std::string& t : ex.source) ++counts[t];
        for (const std::string& t : ex.target) ++counts[t];
    }

    std::vector<std::pair<std::string, std::int64_t>> by_count(counts.begin(), counts.end());
    std::stable_sort(by_count.begin(), by_count.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> table = kReserved;
    const std::size_t keep = static_cast<std::size_t>(v - kNumReserved);
    for (std::size_t i = 0; i < by_count.size() && i < keep; ++i)
        table.push_back(by_count[i].first);
    return Vocabulary(std::move(table));
}

SourceEncoding encode_source(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    if (tokens.empty()) throw std::invalid_argument("encode_source: empty source");
    SourceEncoding enc;
    enc.ids.reserve(tokens.size());
    enc.ext_ids.reserve(tokens.size());
    for (const std::string& t : tokens) {
        if (vocab.contains(t)) {
            int id = vocab.id(t);
            enc.ids.push_back(id);
            enc.ext_ids.push_back(id);
            continue;
        }
        enc.ids.push_back(kUnk);
        auto it = std::find(enc.oovs.begin(), enc.oovs.end(), t);
        int slot = it == enc.oovs.end() ? static_cast<int>(enc.oovs.size())
                                        : static_cast<int>(it - enc.oovs.begin());
        if (it == enc.oovs.end()) enc.oovs.push_back(t);
        enc.ext_ids.push_back(vocab.size() + slot);
    }
    return enc;
}

ExtendedExample encode_example(const Example& ex, const Vocabulary& vocab) {
    ExtendedExample out;
    out.source_tokens = ex.source;
    SourceEncoding enc = encode_source(ex.source, vocab);
    out.source_ids = std::move(enc.ids);
    out.source_ext_ids = std::move(enc.ext_ids);
    out.oovs = std::move(enc.oovs);

    out.target_ids.push_back(kBos);
    for (const std::string& t : ex.target) {
        if (vocab.contains(t)) {
            out.target_ids.push_back(vocab.id(t));
        } else {
            auto it = std::find(out.oovs.begin(), out.oovs.end(), t);
            out.target_ids.push_back(it == out.oovs.end()
                                         ? kUnk
                                         : vocab.size() + static_cast<int>(it - out.oovs.begin()));
        }
    }
    out.target_ids.push_back(kEos);
    return out;
}

const std::string& render_token(int id, const Vocabulary& vocab,
                                const std::vector<std::string>& oovs) {
    if (id < vocab.size()) return vocab.token(id);
    const std::size_t slot = static_cast<std::size_t>(id - vocab.size());
    if (slot >= oovs.size()) throw std::out_of_range("render_token: extended id beyond OOV list");
    return oovs[slot];
}

std::vector<Example> synth_task_generate(const TaskConfig& cfg) {
    if (cfg.num_examples <= 0) throw std::invalid_argument("synth: num_examples must be positive");
    if (!(cfg.salient_fraction > 0.0))
        throw std::invalid_argument("synth: salient fraction 0 would produce empty targets");
    if (cfg.salient_fraction > 1.0 || cfg.oov_rate < 0.0 || cfg.oov_rate > 1.0 ||
        cfg.distractor_repeat_rate < 0.0 || cfg.distractor_repeat_rate > 1.0)
        throw std::invalid_argument("synth: rates must lie in [0,1]");
    if (cfg.min_source_len > cfg.max_source_len || cfg.min_segment_len > cfg.max_segment_len ||
        cfg.min_segment_len < 1)
        throw std::invalid_argument("synth: empty length range");
    if (cfg.min_target_len > cfg.max_target_len || cfg.min_target_len < 1)
        throw std::invalid_argument("synth: empty target length range");
    if (cfg.word_pool < 1) throw std::invalid_argument("synth: word pool must be positive");

    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(cfg.num_examples));
    for (int idx = 0; idx < cfg.num_examples; ++idx) {
        Rng rng(splitmix64(cfg.seed) ^ splitmix64(static_cast<std::uint64_t>(idx) + 1));

        struct Segment {
            std::vector<std::string> tokens;
            bool salient = false;
            bool duplicated = false;
        };

        // Redraw the whole example until the salient token count fits the
        // target window; the per-(seed, index) stream keeps this deterministic.
        Example ex;
        for (int attempt = 0;; ++attempt) {
            if (attempt == 10000)
                throw std::invalid_argument(
                    "synth: target length bounds unsatisfiable for this config");
            std::vector<Segment> segments;
            const int want = rng.range(cfg.min_source_len, cfg.max_source_len);
            int total = 0;
            while (total < want) {
                Segment seg;
                const int len = rng.range(cfg.min_segment_len, cfg.max_segment_len);
                seg.salient = rng.bernoulli(cfg.salient_fraction);
                for (int i = 0; i < len; ++i) {
                    if (seg.salient && rng.bernoulli(cfg.oov_rate)) {
                        seg.tokens.push_back("rare" + std::to_string(rng.range(0, 999999)));
                    } else {
                        seg.tokens.push_back("w" + std::to_string(rng.range(0, cfg.word_pool - 1)));
                    }
                }
                if (!seg.salient) seg.duplicated = rng.bernoulli(cfg.distractor_repeat_rate);
                total += len;
                segments.push_back(std::move(seg));
            }
            bool any_salient = false;
            for (const Segment& s : segments) any_salient |= s.salient;
            if (!any_salient) {
                Segment& s = segments[static_cast<std::size_t>(
                    rng.range(0, static_cast<int>(segments.size()) - 1))];
                s.salient = true;
                s.duplicated = false;
            }
            int salient_tokens = 0;
            for (const Segment& s : segments)
                if (s.salient) salient_tokens += static_cast<int>(s.tokens.size());
            if (salient_tokens < cfg.min_target_len || salient_tokens > cfg.max_target_len)
                continue;

            for (const Segment& s : segments) {
                if (s.salient) {
                    ex.source.push_back(kSalOpen);
                    ex.source.insert(ex.source.end(), s.tokens.begin(), s.tokens.end());
                    ex.source.push_back(kSalClose);
                    ex.target.insert(ex.target.end(), s.tokens.begin(), s.tokens.end());
                } else {
                    ex.source.insert(ex.source.end(), s.tokens.begin(), s.tokens.end());
                    if (s.duplicated)
                        ex.source.insert(ex.source.end(), s.tokens.begin(), s.tokens.end());
                }
            }
            break;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Batch> make_batches(const std::vector<ExtendedExample>& examples, int batch_size,
                                std::uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        Batch b;
        std::size_t max_src = 0, max_tgt = 0;
        for (std::size_t i = start; i < end; ++i) {
            b.items.push_back(examples[order[i]]);
            max_src = std::max(max_src, b.items.back().source_ext_ids.size());
            max_tgt = std::max(max_tgt, b.items.back().target_ids.size());
        }
        const Eigen::Index rows = static_cast<Eigen::Index>(b.items.size());
        b.src_mask = Mat::Zero(rows, static_cast<Eigen::Index>(max_src));
        b.tgt_mask = Mat::Zero(rows, static_cast<Eigen::Index>(max_tgt));
        for (std::size_t r = 0; r < b.items.size(); ++r) {
            const ExtendedExample& ex = b.items[r];
            std::vector<int> src = ex.source_ids, ext = ex.source_ext_ids, tgt = ex.target_ids;
            src.resize(max_src, kPad);
            ext.resize(max_src, kPad);
            tgt.resize(max_tgt, kPad);
            for (std::size_t c = 0; c < ex.source_ids.size(); ++c)
                b.src_mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
            for (std::size_t c = 0; c < ex.target_ids.size(); ++c)
                b.tgt_mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
            b.src_ids.push_back(std::move(src));
            b.src_ext_ids.push_back(std::move(ext));
            b.tgt_ids.push_back(std::move(tgt));
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

namespace {
std::string join(const std::vector<std::string>& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += tokens[i];
    }
    return s;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}
} // namespace

void write_corpus(const std::string& path, const std::vector<Example>& examples,
                  const TaskConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_corpus: cannot open " + path);
    for (const Example& ex : examples) f << join(ex.source) << '\t' << join(ex.target) << '\n';

    std::ofstream meta(path + ".meta");
    if (!meta) throw std::runtime_error("write_corpus: cannot open " + path + ".meta");
    meta << "seed=" << cfg.seed << '\n'
         << "num_examples=" << cfg.num_examples << '\n'
         << "min_source_len=" << cfg.min_source_len << '\n'
         << "max_source_len=" << cfg.max_source_len << '\n'
         << "min_segment_len=" << cfg.min_segment_len << '\n'
         << "max_segment_len=" << cfg.max_segment_len << '\n'
         << "salient_fraction=" << cfg.salient_fraction << '\n'
         << "oov_rate=" << cfg.oov_rate << '\n'
         << "distractor_repeat_rate=" << cfg.distractor_repeat_rate << '\n'
         << "word_pool=" << cfg.word_pool << '\n';
}

std::vector<Example> read_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_corpus: cannot open " + path);
    std::vector<Example> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("read_corpus: missing tab separator in " + path);
        Example ex;
        ex.source = split_ws(line.substr(0, tab));
        ex.target = split_ws(line.substr(tab + 1));
        out.push_back(std::move(ex));
    }
    return out;
}

void write_vocab(const std::string& path, const Vocabulary& vocab) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_vocab: cannot open " + path);
    for (int id = 0; id < vocab.size(); ++id) f << vocab.token(id) << '\n';
}

Vocabulary read_vocab(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_vocab: cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw std::runtime_error("read_vocab: empty token line in " + path);
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
}

} // namespace attnvar::data
