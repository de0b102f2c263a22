// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/data.hpp"
#include "attnvar/model.hpp"
#include "attnvar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

namespace attnvar::decoding {

/// Trigrams are packed into 21-bit lanes, capping extended-vocab ids at 2^21.
std::uint64_t pack_trigram(int a, int b, int c);

struct Hypothesis {
    std::vector<int> tokens; // emitted extended-vocab ids, EOS excluded
    double logp = 0.0;       // sum of per-step token log-probabilities
    std::unordered_set<std::uint64_t> trigrams;

    void append(int token, double token_logp);
};

/// True iff the hypothesis already contains the trigram (last two tokens,
/// candidate). Sequences shorter than two tokens block nothing.
bool trigram_blocked(const Hypothesis& hyp, int candidate);

struct BeamResult {
    std::vector<int> tokens; // EOS excluded
    double logp = 0.0;
    int steps = 0;           // EOS counted when emitted
    double norm_logp = -std::numeric_limits<double>::infinity();
    bool fallback_used = false; // a fully-blocked step was forced through
};

/// Beam search over a step function: step(state, prev_token) must advance the
/// decoder and return {next_state, probabilities over candidate ids}. Blocked
/// candidates score -inf; if a step blocks everything, the single best blocked
/// candidate is forced through and flagged. Hypotheses finish on EOS or at
/// max_len; ranking is by logp / steps. With blocking off, the greedy chain is
/// tracked alongside the beam and always reaches the finished pool, so the
/// result is never worse than greedy decoding.
template <typename State, typename Step>
BeamResult beam_core(const State& init, int bos, int eos, int beam_size, int max_len,
                     bool block_trigrams, Step&& step) {
    if (beam_size < 1) throw std::invalid_argument("beam_core: beam size must be >= 1");
    if (max_len < 1) throw std::invalid_argument("beam_core: max length must be >= 1");

    struct Live {
        Hypothesis hyp;
        State state;
        int prev;
    };
    struct Finished {
        Hypothesis hyp;
        int steps;
        bool fallback;
    };
    std::vector<Finished> pool;
    auto finish = [&pool](Hypothesis hyp, int steps, bool fallback) {
        pool.push_back({std::move(hyp), steps, fallback});
    };

    auto token_logp = [](double prob) { return std::log(std::max(prob, 1e-12)); };

    if (!block_trigrams) {
        // protected greedy chain: guarantees beam >= greedy under ranking
        State s = init;
        Hypothesis hyp;
        int prev = bos;
        for (int level = 1; level <= max_len; ++level) {
            auto [next, probs] = step(s, prev);
            int best = 0;
            for (Eigen::Index t = 1; t < probs.cols(); ++t)
                if (probs(0, t) > probs(0, best)) best = static_cast<int>(t);
            const double lp = token_logp(probs(0, best));
            if (best == eos) {
                hyp.logp += lp;
                const int steps = static_cast<int>(hyp.tokens.size()) + 1;
                finish(std::move(hyp), steps, false);
                break;
            }
            hyp.append(best, lp);
            s = std::move(next);
            prev = best;
            if (level == max_len) {
                const int steps = static_cast<int>(hyp.tokens.size());
                finish(std::move(hyp), steps, false);
            }
        }
    }

    std::vector<Live> beam;
    beam.push_back({Hypothesis{}, init, bos});
    bool fallback_used = false;

    struct Cand {
        std::size_t src;
        int token;
        double total;
        double tok_logp;
    };

    for (int level = 1; level <= max_len && !beam.empty(); ++level) {
        std::vector<State> next_states;
        next_states.reserve(beam.size());
        std::vector<Cand> cands;
        bool have_blocked = false;
        Cand best_blocked{0, 0, -std::numeric_limits<double>::infinity(), 0.0};
        for (std::size_t i = 0; i < beam.size(); ++i) {
            auto [next, probs] = step(beam[i].state, beam[i].prev);
            next_states.push_back(std::move(next));
            for (Eigen::Index t = 0; t < probs.cols(); ++t) {
                const int tok = static_cast<int>(t);
                const double lp = token_logp(probs(0, t));
                const Cand cand{i, tok, beam[i].hyp.logp + lp, lp};
                if (block_trigrams && trigram_blocked(beam[i].hyp, tok)) {
                    have_blocked = true;
                    if (cand.total > best_blocked.total ||
                        (cand.total == best_blocked.total && cand.token < best_blocked.token))
                        best_blocked = cand;
                    continue;
                }
                cands.push_back(cand);
            }
        }
        if (cands.empty()) {
            if (!have_blocked) break; // nothing scoreable at all
            cands.push_back(best_blocked);
            fallback_used = true;
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.total != b.total) return a.total > b.total;
            if (a.token != b.token) return a.token < b.token;
            return a.src < b.src;
        });
        if (static_cast<int>(cands.size()) > beam_size) cands.resize(static_cast<std::size_t>(beam_size));

        std::vector<Live> next_beam;
        for (const Cand& c : cands) {
            Hypothesis hyp = beam[c.src].hyp;
            if (c.token == eos) {
                hyp.logp += c.tok_logp;
                const int steps = static_cast<int>(hyp.tokens.size()) + 1;
                finish(std::move(hyp), steps, fallback_used);
                continue;
            }
            hyp.append(c.token, c.tok_logp);
            if (level == max_len) {
                const int steps = static_cast<int>(hyp.tokens.size());
                finish(std::move(hyp), steps, fallback_used);
                continue;
            }
            next_beam.push_back({std::move(hyp), next_states[c.src], c.token});
        }
        beam = std::move(next_beam);
    }

    if (pool.empty()) throw std::logic_error("beam_core: empty hypothesis pool");
    const Finished* best = &pool.front();
    auto norm = [](const Finished& f) { return f.hyp.logp / std::max(1, f.steps); };
    for (const Finished& f : pool) {
        const double a = norm(f), b = norm(*best);
        if (a > b || (a == b && (f.steps < best->steps ||
                                 (f.steps == best->steps && f.hyp.tokens < best->hyp.tokens))))
            best = &f;
    }
    BeamResult out;
    out.tokens = best->hyp.tokens;
    out.logp = best->hyp.logp;
    out.steps = best->steps;
    out.norm_logp = norm(*best);
    out.fallback_used = best->fallback;
    return out;
}

/// Beam search over a trained model for one encoded example.
BeamResult beam_search(model::ModelParams& params, const data::ExtendedExample& ex,
                       model::GateForm form, int beam_size, int max_len, bool block_trigrams);

/// Per-step argmax (ties to the lowest token id); EOS excluded from output.
std::vector<int> greedy_decode(model::ModelParams& params, const data::ExtendedExample& ex,
                               model::GateForm form, int max_len);

/// Surface rendering of decoded ids: OOV slots resolve to source surface forms.
std::vector<std::string> render_tokens(const std::vector<int>& tokens,
                                       const data::Vocabulary& vocab,
                                       const std::vector<std::string>& oovs);

} // namespace attnvar::decoding
