// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attnvar/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

using namespace attnvar;
using namespace attnvar::data;

namespace {
std::vector<std::string> toks(std::initializer_list<const char*> ts) {
    return {ts.begin(), ts.end()};
}
} // namespace

TEST_CASE("build_vocab keeps reserved ids and frequency order") {
    std::vector<Example> corpus{
        {toks({"b", "b", "b", "a", "a", "c"}), toks({"a"})},
    };
    Vocabulary v = build_vocab(corpus, 10);
    CHECK(v.token(kPad) == "<pad>");
    CHECK(v.token(kUnk) == "<unk>");
    CHECK(v.token(kBos) == "<bos>");
    CHECK(v.token(kEos) == "<eos>");
    CHECK(v.size() == 7); // 4 reserved + 3 distinct tokens
    CHECK(v.id("a") == 4); // a and b tie at count 3; lexicographic break
    CHECK(v.id("b") == 5);
    CHECK(v.id("c") == 6);
}

TEST_CASE("build_vocab tie-break is lexicographic") {
    std::vector<Example> corpus{{toks({"zz", "aa"}), toks({})}};
    Vocabulary v = build_vocab(corpus, 10);
    CHECK(v.id("aa") == 4);
    CHECK(v.id("zz") == 5);

    // truncation keeps the most frequent
    std::vector<Example> big{{toks({"x", "x", "y", "y", "y", "z"}), toks({})}};
    Vocabulary w = build_vocab(big, 6); // room for 2
    CHECK(w.contains("y"));
    CHECK(w.contains("x"));
    CHECK(!w.contains("z"));
    CHECK_THROWS_AS(build_vocab({}, 10), std::invalid_argument);
    CHECK_THROWS_AS(build_vocab(corpus, 4), std::invalid_argument);
}

TEST_CASE("encode_source numbers OOVs by first occurrence") {
    Vocabulary v({"<pad>", "<unk>", "<bos>", "<eos>", "x"});
    const int V = v.size();

    SourceEncoding all_in = encode_source(toks({"x", "x"}), v);
    CHECK(all_in.oovs.empty());
    CHECK(all_in.ids == all_in.ext_ids);

    SourceEncoding one = encode_source(toks({"x", "q", "x"}), v);
    CHECK(one.ext_ids == std::vector<int>{v.id("x"), V, v.id("x")});
    CHECK(one.ids == std::vector<int>{v.id("x"), kUnk, v.id("x")});
    CHECK(one.oovs == std::vector<std::string>{"q"});

    SourceEncoding two = encode_source(toks({"q", "r", "q"}), v);
    CHECK(two.ext_ids == std::vector<int>{V, V + 1, V});
    CHECK(two.oovs == std::vector<std::string>{"q", "r"});
}

TEST_CASE("extended ids render back to the original source") {
    Vocabulary v({"<pad>", "<unk>", "<bos>", "<eos>", "x", "y"});
    std::vector<std::string> src = toks({"x", "q", "y", "r", "q"});
    SourceEncoding enc = encode_source(src, v);
    for (std::size_t i = 0; i < src.size(); ++i)
        CHECK(render_token(enc.ext_ids[i], v, enc.oovs) == src[i]);
}

TEST_CASE("encode_example maps target through source OOVs") {
    Vocabulary v({"<pad>", "<unk>", "<bos>", "<eos>", "x"});
    const int V = v.size();
    Example ex{toks({"x", "q", "x"}), toks({"q", "x", "zz"})};
    ExtendedExample e = encode_example(ex, v);
    // BOS, q->V (copied), x, zz->UNK (absent from source), EOS
    CHECK(e.target_ids == std::vector<int>{kBos, V, v.id("x"), kUnk, kEos});
}

TEST_CASE("synthetic corpus is deterministic and marker-consistent") {
    TaskConfig cfg;
    cfg.seed = 99;
    cfg.num_examples = 40;
    cfg.oov_rate = 0.1;
    cfg.distractor_repeat_rate = 0.3;
    std::vector<Example> a = synth_task_generate(cfg);
    std::vector<Example> b = synth_task_generate(cfg);
    REQUIRE(a.size() == 40);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].source == b[i].source);
        CHECK(a[i].target == b[i].target);
    }

    // independent re-scan: target must equal the in-marker spans, in order
    for (const Example& ex : a) {
        std::vector<std::string> expect;
        bool inside = false;
        for (const std::string& t : ex.source) {
            if (t == kSalOpen) {
                inside = true;
            } else if (t == kSalClose) {
                inside = false;
            } else if (inside) {
                expect.push_back(t);
            }
        }
        CHECK(ex.target == expect);
        CHECK(!ex.target.empty());
        // target lengths honor the configured window
        CHECK(ex.target.size() >= static_cast<std::size_t>(cfg.min_target_len));
        CHECK(ex.target.size() <= static_cast<std::size_t>(cfg.max_target_len));
        // markers never leak into targets
        for (const std::string& t : ex.target) {
            CHECK(t != kSalOpen);
            CHECK(t != kSalClose);
        }
    }
}

TEST_CASE("unsatisfiable target window is rejected") {
    TaskConfig cfg;
    cfg.num_examples = 1;
    cfg.min_target_len = 1;
    cfg.max_target_len = 2; // below the minimum segment length: no example fits
    CHECK_THROWS_AS(synth_task_generate(cfg), std::invalid_argument);
    cfg.min_target_len = 4;
    cfg.max_target_len = 2;
    CHECK_THROWS_AS(synth_task_generate(cfg), std::invalid_argument);
}

TEST_CASE("salient fraction 1 copies the whole source minus markers") {
    TaskConfig cfg;
    cfg.seed = 3;
    cfg.num_examples = 10;
    cfg.salient_fraction = 1.0;
    cfg.oov_rate = 0.0;
    cfg.max_target_len = cfg.max_source_len; // all-salient targets fill the source
    for (const Example& ex : synth_task_generate(cfg)) {
        std::vector<std::string> stripped;
        for (const std::string& t : ex.source)
            if (t != kSalOpen && t != kSalClose) stripped.push_back(t);
        CHECK(ex.target == stripped);
    }
    TaskConfig bad = cfg;
    bad.salient_fraction = 0.0;
    CHECK_THROWS_AS(synth_task_generate(bad), std::invalid_argument);
}

TEST_CASE("synthetic targets are always copyable") {
    TaskConfig cfg;
    cfg.seed = 17;
    cfg.num_examples = 200;
    cfg.oov_rate = 0.15;
    std::vector<Example> corpus = synth_task_generate(cfg);
    Vocabulary v = build_vocab(corpus, 200);
    for (const Example& ex : corpus) {
        ExtendedExample e = encode_example(ex, v);
        for (int id : e.target_ids) CHECK(id != kUnk);
    }
}

TEST_CASE("rare tokens stay out of a corpus-built vocabulary") {
    TaskConfig cfg;
    cfg.seed = 5;
    cfg.num_examples = 500;
    cfg.oov_rate = 0.08;
    std::vector<Example> corpus = synth_task_generate(cfg);
    Vocabulary v = build_vocab(corpus, 200);
    CHECK(v.contains(kSalOpen));
    CHECK(v.contains(kSalClose));
    for (int i = 0; i < v.size(); ++i)
        CHECK(v.token(i).rfind("rare", 0) == std::string::npos);
    // every base word made the cut
    int base = 0;
    for (int i = 0; i < v.size(); ++i) base += v.token(i).rfind("w", 0) == 0;
    CHECK(base == cfg.word_pool);
}

TEST_CASE("batches shuffle, pad, and preserve the multiset") {
    Vocabulary v({"<pad>", "<unk>", "<bos>", "<eos>", "x", "y"});
    std::vector<ExtendedExample> exs;
    for (int n = 1; n <= 7; ++n) {
        Example e;
        for (int i = 0; i < n; ++i) e.source.push_back(i % 2 ? "x" : "y");
        e.target = {"x"};
        exs.push_back(encode_example(e, v));
    }
    std::vector<Batch> batches = make_batches(exs, 3, 11);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].items.size() == 3);
    CHECK(batches[2].items.size() == 1);

    std::multiset<std::size_t> seen, want;
    for (const ExtendedExample& e : exs) want.insert(e.source_ids.size());
    for (const Batch& b : batches) {
        const std::size_t max_src = b.src_ids.front().size();
        for (std::size_t r = 0; r < b.items.size(); ++r) {
            seen.insert(b.items[r].source_ids.size());
            CHECK(b.src_ids[r].size() == max_src);
            CHECK(b.src_mask.row(static_cast<Eigen::Index>(r)).sum() ==
                  static_cast<double>(b.items[r].source_ids.size()));
            // PAD beyond the true length
            for (std::size_t c = b.items[r].source_ids.size(); c < max_src; ++c)
                CHECK(b.src_ids[r][c] == kPad);
        }
    }
    CHECK(seen == want);

    std::vector<Batch> single = make_batches(exs, 1, 11);
    CHECK(single.size() == 7);
    for (const Batch& b : single)
        CHECK(b.src_ids.front().size() == b.items.front().source_ids.size());

    // two lengths in one batch: mask sums are the true lengths
    std::vector<ExtendedExample> pair{exs[2], exs[4]}; // lengths 3 and 5
    Batch b = make_batches(pair, 2, 1).front();
    CHECK(b.src_mask.rowwise().sum().minCoeff() == 3.0);
    CHECK(b.src_mask.rowwise().sum().maxCoeff() == 5.0);
    CHECK(b.src_ids.front().size() == 5);
}

TEST_CASE("corpus round-trips through disk with a config sidecar") {
    TaskConfig cfg;
    cfg.seed = 21;
    cfg.num_examples = 25;
    std::vector<Example> corpus = synth_task_generate(cfg);
    const std::string path = "test_corpus_tmp.tsv";
    write_corpus(path, corpus, cfg);
    std::vector<Example> back = read_corpus(path);
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back[i].source == corpus[i].source);
        CHECK(back[i].target == corpus[i].target);
    }
    std::ifstream meta(path + ".meta");
    REQUIRE(meta.good());
    std::string first;
    std::getline(meta, first);
    CHECK(first == "seed=21");
    meta.close();
    std::remove(path.c_str());
    std::remove((path + ".meta").c_str());
}

TEST_CASE("vocabulary fingerprint is order-sensitive and stable") {
    Vocabulary a({"<pad>", "<unk>", "<bos>", "<eos>", "x", "y"});
    Vocabulary b({"<pad>", "<unk>", "<bos>", "<eos>", "y", "x"});
    Vocabulary c({"<pad>", "<unk>", "<bos>", "<eos>", "x", "y"});
    CHECK(a.fingerprint() == c.fingerprint());
    CHECK(a.fingerprint() != b.fingerprint());
}
