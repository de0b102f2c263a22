// SPDX-License-Identifier: Apache-2.0
#include "attnvar/decoding.hpp"

#include <stdexcept>
#include <utility>

namespace attnvar::decoding {

std::uint64_t pack_trigram(int a, int b, int c) {
    constexpr int kLimit = 1 << 21;
    if (a < 0 || b < 0 || c < 0 || a >= kLimit || b >= kLimit || c >= kLimit)
        throw std::out_of_range("pack_trigram: id outside 21-bit range");
    return (static_cast<std::uint64_t>(a) << 42) | (static_cast<std::uint64_t>(b) << 21) |
           static_cast<std::uint64_t>(c);
}

void Hypothesis::append(int token, double token_logp) {
    if (tokens.size() >= 2)
        trigrams.insert(pack_trigram(tokens[tokens.size() - 2], tokens.back(), token));
    tokens.push_back(token);
    logp += token_logp;
}

bool trigram_blocked(const Hypothesis& hyp, int candidate) {
    if (hyp.tokens.size() < 2) return false;
    return hyp.trigrams.count(
               pack_trigram(hyp.tokens[hyp.tokens.size() - 2], hyp.tokens.back(), candidate)) != 0;
}

namespace {

struct ModelStepper {
    model::ModelParams& params;
    const Mat& states;
    const std::vector<int>& src_ext;
    int n_oov;
    model::GateForm form;

    std::pair<model::ValueState, Mat> operator()(const model::ValueState& s, int prev) const {
        model::ValueStepOutput out =
            model::decode_step_value(params, prev, s, states, src_ext, n_oov, form);
        return {std::move(out.state), std::move(out.final_dist)};
    }
};

} // namespace

BeamResult beam_search(model::ModelParams& params, const data::ExtendedExample& ex,
                       model::GateForm form, int beam_size, int max_len, bool block_trigrams) {
    model::ValueEncoderOut enc = model::encode_value(params, ex.source_ids);
    ModelStepper stepper{params, enc.states, ex.source_ext_ids,
                         static_cast<int>(ex.oovs.size()), form};
    return beam_core(enc.init, data::kBos, data::kEos, beam_size, max_len, block_trigrams,
                     stepper);
}

std::vector<int> greedy_decode(model::ModelParams& params, const data::ExtendedExample& ex,
                               model::GateForm form, int max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode: max length must be >= 1");
    model::ValueEncoderOut enc = model::encode_value(params, ex.source_ids);
    ModelStepper stepper{params, enc.states, ex.source_ext_ids,
                         static_cast<int>(ex.oovs.size()), form};

    std::vector<int> out;
    model::ValueState state = enc.init;
    int prev = data::kBos;
    for (int level = 1; level <= max_len; ++level) {
        auto [next, probs] = stepper(state, prev);
        int best = 0;
        for (Eigen::Index t = 1; t < probs.cols(); ++t)
            if (probs(0, t) > probs(0, best)) best = static_cast<int>(t);
        if (best == data::kEos) break;
        out.push_back(best);
        state = std::move(next);
        prev = best;
    }
    return out;
}

std::vector<std::string> render_tokens(const std::vector<int>& tokens,
                                       const data::Vocabulary& vocab,
                                       const std::vector<std::string>& oovs) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (int id : tokens) out.push_back(data::render_token(id, vocab, oovs));
    return out;
}

} // namespace attnvar::decoding
