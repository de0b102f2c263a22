// SPDX-License-Identifier: Apache-2.0
#include "attnvar/model.hpp"

#include "attnvar/rng.hpp"

#include <string>

namespace attnvar::model {

using ad::Graph;
using ad::Var;

GateForm gate_form_from(const std::string& name) {
    if (name == "content") return GateForm::content;
    if (name == "broadcast") return GateForm::broadcast;
    if (name == "off") return GateForm::off;
    throw std::invalid_argument("unknown gate form: " + name);
}

const char* to_string(GateForm form) {
    switch (form) {
    case GateForm::content: return "content";
    case GateForm::broadcast: return "broadcast";
    default: return "off";
    }
}

ModelParams::ModelParams(int vocab_size, int embed_size, int hidden_size)
    : vocab(vocab_size), embed(embed_size), hidden(hidden_size),
      embedding("embedding", vocab, embed),
      enc_fwd("enc_fwd", embed, hidden),
      enc_bwd("enc_bwd", embed, hidden),
      dec("dec", embed, hidden),
      attn_wh("attn_wh", 2 * hidden, 2 * hidden),
      attn_ws("attn_ws", hidden, 2 * hidden),
      attn_b("attn_b", 1, 2 * hidden),
      attn_v("attn_v", 2 * hidden, 1),
      aru_state_w("aru_state_w", hidden, 2 * hidden),
      aru_state_vec("aru_state_vec", hidden, 1),
      aru_attn_w("aru_attn_w", 1, 1),
      aru_b("aru_b", 1, 1),
      gen_wc("gen_wc", 2 * hidden, 1),
      gen_ws("gen_ws", hidden, 1),
      gen_wx("gen_wx", embed, 1),
      gen_b("gen_b", 1, 1),
      out_w("out_w", 3 * hidden, vocab),
      out_b("out_b", 1, vocab),
      init_wh("init_wh", 2 * hidden, hidden),
      init_bh("init_bh", 1, hidden),
      init_wc("init_wc", 2 * hidden, hidden),
      init_bc("init_bc", 1, hidden) {
    if (vocab <= data::kNumReserved || embed < 1 || hidden < 1)
        throw std::invalid_argument("ModelParams: invalid dimensions");
}

std::vector<ad::Parameter*> ModelParams::all() {
    return {&embedding,
            &enc_fwd.wx, &enc_fwd.wh, &enc_fwd.b,
            &enc_bwd.wx, &enc_bwd.wh, &enc_bwd.b,
            &dec.wx, &dec.wh, &dec.b,
            &attn_wh, &attn_ws, &attn_b, &attn_v,
            &aru_state_w, &aru_state_vec, &aru_attn_w, &aru_b,
            &gen_wc, &gen_ws, &gen_wx, &gen_b,
            &out_w, &out_b,
            &init_wh, &init_bh, &init_wc, &init_bc};
}

std::vector<const ad::Parameter*> ModelParams::all() const {
    auto mutable_list = const_cast<ModelParams*>(this)->all();
    return {mutable_list.begin(), mutable_list.end()};
}

ModelParams init_model(int vocab, int embed, int hidden, std::uint64_t seed) {
    ModelParams p(vocab, embed, hidden);
    Rng rng(seed);
    for (ad::Parameter* param : p.all())
        for (Eigen::Index i = 0; i < param->value.size(); ++i)
            param->value.data()[i] = rng.uniform(-0.05, 0.05);
    for (LstmWeights* w : {&p.enc_fwd, &p.enc_bwd, &p.dec})
        w->b.value.middleCols(hidden, hidden).setConstant(1.0); // forget gate
    // Start the refinement gate open (sigmoid(2) ~ 0.88). MLE training is
    // invariant to the gate's overall scale (renormalization cancels it), so
    // whatever level the gate sits at when variance-loss fine-tuning begins is
    // inherited from initialization; a near-closed gate makes refined rows
    // nearly flat and the reciprocal-variance loss explodes.
    p.aru_b.value.setConstant(2.0);
    return p;
}

StepState lstm_step(LstmWeights& w, Graph& g, Var x, StepState prev) {
    const Eigen::Index h = prev.h.cols();
    Var packed = ad::add(ad::add(ad::matmul(x, g.leaf(w.wx)), ad::matmul(prev.h, g.leaf(w.wh))),
                         g.leaf(w.b));
    Var in_gate = ad::sigmoid(ad::cols(packed, 0, h));
    Var forget = ad::sigmoid(ad::cols(packed, h, h));
    Var out_gate = ad::sigmoid(ad::cols(packed, 2 * h, h));
    Var cell = ad::tanh(ad::cols(packed, 3 * h, h));
    Var c = ad::add(ad::mul(forget, prev.c), ad::mul(in_gate, cell));
    return {ad::mul(out_gate, ad::tanh(c)), c};
}

EncoderOut encode(Graph& g, ModelParams& p, std::span<const int> source_ids) {
    if (source_ids.empty()) throw std::invalid_argument("encode: empty source");
    for (int id : source_ids)
        if (id < 0 || id >= p.vocab)
            throw std::invalid_argument("encode: id " + std::to_string(id) +
                                        " outside base vocabulary (map OOVs to UNK first)");

    Var emb = g.leaf(p.embedding);
    const Eigen::Index n = static_cast<Eigen::Index>(source_ids.size());
    Var zero = g.constant(Mat::Zero(1, p.hidden));

    std::vector<Var> fwd, bwd(static_cast<std::size_t>(n), zero);
    StepState s{zero, zero};
    for (Eigen::Index i = 0; i < n; ++i) {
        s = lstm_step(p.enc_fwd, g, ad::rows(emb, source_ids[static_cast<std::size_t>(i)], 1), s);
        fwd.push_back(s.h);
    }
    StepState fwd_last = s;
    s = {zero, zero};
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        s = lstm_step(p.enc_bwd, g, ad::rows(emb, source_ids[static_cast<std::size_t>(i)], 1), s);
        bwd[static_cast<std::size_t>(i)] = s.h;
    }
    StepState bwd_last = s; // state after consuming position 0

    std::vector<Var> per_pos;
    per_pos.reserve(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
        per_pos.push_back(ad::concat_cols(std::vector<Var>{fwd[i], bwd[i]}));
    Var states = ad::concat_rows(per_pos);

    Var finals = ad::concat_cols(std::vector<Var>{fwd_last.h, bwd_last.h});
    StepState init{
        ad::tanh(ad::add(ad::matmul(finals, g.leaf(p.init_wh)), g.leaf(p.init_bh))),
        ad::tanh(ad::add(ad::matmul(finals, g.leaf(p.init_wc)), g.leaf(p.init_bc)))};
    return {states, init};
}

AttentionVars attention_step(Graph& g, ModelParams& p, Var s, Var states, const Mat* mask) {
    Var pre = ad::add(ad::add(ad::matmul(states, g.leaf(p.attn_wh)),
                              ad::matmul(s, g.leaf(p.attn_ws))),
                      g.leaf(p.attn_b));
    Var logits = ad::transpose(ad::matmul(ad::tanh(pre), g.leaf(p.attn_v)));
    Var attn = mask ? ad::masked_softmax_rows(logits, *mask) : ad::softmax_rows(logits);
    return {logits, attn};
}

GateVars refine_attention(Graph& g, ModelParams& p, Var s, Var attn, Var states, GateForm form) {
    if (form == GateForm::off) {
        Var gate = g.constant(Mat::Ones(1, attn.cols()));
        Var refined = ad::mul(gate, attn);
        Var renorm = ad::mul(refined, ad::reciprocal(ad::sum_all(refined)));
        return {gate, refined, renorm};
    }
    Var state_term = form == GateForm::content
                         ? ad::transpose(ad::matmul(
                               states, ad::transpose(ad::matmul(s, g.leaf(p.aru_state_w)))))
                         : ad::matmul(s, g.leaf(p.aru_state_vec));
    Var gate_in = ad::add(ad::add(state_term, ad::mul(attn, g.leaf(p.aru_attn_w))),
                          g.leaf(p.aru_b));
    // The renormalization below makes the gate's overall scale invisible to
    // the likelihood, so nothing anchors it; clamp the logits to +-15 (gate in
    // [3e-7, 1-3e-7]) so an unlucky drift cannot underflow the refined mass.
    // Inside the window the clamp is exact identity, forward and backward.
    Var lo = ad::clamp_min(gate_in, -15.0);
    Var gate = ad::sigmoid(ad::scale(ad::clamp_min(ad::scale(lo, -1.0), -15.0), -1.0));
    Var refined = ad::mul(gate, attn);
    Var total = ad::sum_all(refined);
    if (total.value()(0, 0) < 1e-12)
        throw DegenerateGateError("refine_attention: refined attention mass " +
                                  std::to_string(total.value()(0, 0)) + " below 1e-12");
    Var renorm = ad::mul(refined, ad::reciprocal(total));
    return {gate, refined, renorm};
}

Var context_vector(Var renorm, Var states) { return ad::matmul(renorm, states); }

StepOutput decode_step(Graph& g, ModelParams& p, int prev_token, StepState prev, Var states,
                       std::span<const int> source_ext_ids, int n_oov, GateForm form,
                       const Mat* attn_mask) {
    if (prev_token < 0 || prev_token >= p.vocab + n_oov)
        throw std::invalid_argument("decode_step: token id outside extended vocabulary");
    const int tok = prev_token < p.vocab ? prev_token : data::kUnk;

    Var x = ad::rows(g.leaf(p.embedding), tok, 1);
    StepState state = lstm_step(p.dec, g, x, prev);
    Var s = state.h;

    AttentionVars attn = attention_step(g, p, s, states, attn_mask);
    GateVars gate = refine_attention(g, p, s, attn.attn, states, form);
    Var context = context_vector(gate.renorm, states);

    Var vocab_dist = ad::softmax_rows(
        ad::add(ad::matmul(ad::concat_cols(std::vector<Var>{s, context}), g.leaf(p.out_w)),
                g.leaf(p.out_b)));

    Var p_gen = ad::sigmoid(
        ad::add(ad::add(ad::matmul(context, g.leaf(p.gen_wc)), ad::matmul(s, g.leaf(p.gen_ws))),
                ad::add(ad::matmul(x, g.leaf(p.gen_wx)), g.leaf(p.gen_b))));

    Var gen_part = n_oov > 0
                       ? ad::concat_cols(std::vector<Var>{vocab_dist,
                                                          g.constant(Mat::Zero(1, n_oov))})
                       : vocab_dist;
    Var copy_part = ad::scatter_cols(gate.renorm, source_ext_ids,
                                     static_cast<Eigen::Index>(p.vocab + n_oov));
    Var final_dist = ad::add(ad::mul(p_gen, gen_part),
                             ad::mul(ad::sub(g.constant_scalar(1.0), p_gen), copy_part));
    return {state, attn, gate, context, p_gen, vocab_dist, final_dist};
}

ExampleForward forward_example(Graph& g, ModelParams& p, const data::ExtendedExample& ex,
                               GateForm form) {
    if (ex.target_ids.size() < 2)
        throw std::invalid_argument("forward_example: target must hold BOS and EOS");
    EncoderOut enc = encode(g, p, ex.source_ids);
    ExampleForward out;
    StepState state = enc.init;
    const int n_oov = static_cast<int>(ex.oovs.size());
    for (std::size_t t = 0; t + 1 < ex.target_ids.size(); ++t) {
        StepOutput step = decode_step(g, p, ex.target_ids[t], state, enc.states,
                                      ex.source_ext_ids, n_oov, form);
        out.gold_probs.push_back(ad::pick(step.final_dist, 0, ex.target_ids[t + 1]));
        out.refined.push_back(step.gate.refined);
        out.gates.push_back(step.gate.gate);
        state = step.state;
    }
    return out;
}

ValueEncoderOut encode_value(ModelParams& p, std::span<const int> source_ids) {
    Graph g;
    EncoderOut enc = encode(g, p, source_ids);
    return {enc.states.value(), {enc.init.h.value(), enc.init.c.value()}};
}

ValueStepOutput decode_step_value(ModelParams& p, int prev_token, const ValueState& prev,
                                  const Mat& states, std::span<const int> source_ext_ids,
                                  int n_oov, GateForm form) {
    Graph g;
    StepState prev_vars{g.constant(prev.h), g.constant(prev.c)};
    StepOutput step = decode_step(g, p, prev_token, prev_vars, g.constant(states),
                                  source_ext_ids, n_oov, form);
    return {{step.state.h.value(), step.state.c.value()},
            step.attn.attn.value(),
            step.gate.gate.value(),
            step.gate.refined.value(),
            step.gate.renorm.value(),
            step.final_dist.value(),
            step.p_gen.value()(0, 0)};
}

} // namespace attnvar::model
