// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/data.hpp"
#include "attnvar/graph.hpp"
#include "attnvar/ops.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace attnvar::model {

/// The refinement gate's state term: content-aware bilinear form with each
/// h_i (default), or a position-independent broadcast dot product. `off`
/// disables refinement entirely (plain pointer-generator baseline): the gate
/// is identically 1 and refined attention equals raw attention.
enum class GateForm { content, broadcast, off };

GateForm gate_form_from(const std::string& name); // "content" | "broadcast"
const char* to_string(GateForm form);

/// Raised when the gate collapses: sum of refined attention below 1e-12.
struct DegenerateGateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LstmWeights {
    ad::Parameter wx; // in × 4H, gate order [input, forget, output, cell]
    ad::Parameter wh; // H  × 4H
    ad::Parameter b;  // 1  × 4H

    LstmWeights(const std::string& prefix, Eigen::Index in, Eigen::Index hidden)
        : wx(prefix + ".wx", in, 4 * hidden), wh(prefix + ".wh", hidden, 4 * hidden),
          b(prefix + ".b", 1, 4 * hidden) {}
};

struct ModelParams {
    int vocab;
    int embed;
    int hidden;

    ad::Parameter embedding; // V × E

    LstmWeights enc_fwd, enc_bwd, dec;

    // e_ti = v · tanh(W_h h_i + W_s s_t + b); attention space is 2H wide
    ad::Parameter attn_wh; // 2H × 2H
    ad::Parameter attn_ws; // H  × 2H
    ad::Parameter attn_b;  // 1  × 2H
    ad::Parameter attn_v;  // 2H × 1

    // gate r_ti = sigmoid(state term + w_a^r * a_ti + b_r)
    ad::Parameter aru_state_w;   // H × 2H, content form: h_i · (W_r s_t)
    ad::Parameter aru_state_vec; // H × 1, broadcast form: w_s^r · s_t
    ad::Parameter aru_attn_w;    // 1 × 1
    ad::Parameter aru_b;         // 1 × 1

    // p_gen = sigmoid(c·w_c + s·w_s + x·w_x + b)
    ad::Parameter gen_wc; // 2H × 1
    ad::Parameter gen_ws; // H × 1
    ad::Parameter gen_wx; // E × 1
    ad::Parameter gen_b;  // 1 × 1

    ad::Parameter out_w; // 3H × V, reads [s_t ‖ c_t]
    ad::Parameter out_b; // 1 × V

    // decoder initial state: tanh projection of [fwd_last ‖ bwd_last]
    ad::Parameter init_wh; // 2H × H
    ad::Parameter init_bh; // 1 × H
    ad::Parameter init_wc; // 2H × H
    ad::Parameter init_bc; // 1 × H

    ModelParams(int vocab_size, int embed_size, int hidden_size);

    /// Stable enumeration order; fixes checkpoint layout and init draws.
    std::vector<ad::Parameter*> all();
    std::vector<const ad::Parameter*> all() const;
};

/// Uniform(-0.05, 0.05) draws in all() order, then forget-gate biases set
/// to exactly 1.0.
ModelParams init_model(int vocab, int embed, int hidden, std::uint64_t seed);

struct StepState {
    ad::Var h; // 1 × H
    ad::Var c; // 1 × H
};

StepState lstm_step(LstmWeights& w, ad::Graph& g, ad::Var x, StepState prev);

struct EncoderOut {
    ad::Var states; // |D| × 2H, fwd ‖ bwd per position
    StepState init; // decoder initial state
};

/// ids must already be in the base vocabulary (OOVs mapped to UNK).
EncoderOut encode(ad::Graph& g, ModelParams& p, std::span<const int> source_ids);

struct AttentionVars {
    ad::Var logits; // 1 × |D|
    ad::Var attn;   // 1 × |D|, simplex
};

/// Optional mask (1 × |D|, 1 = real token) excludes PAD positions inside the
/// softmax so they receive exactly zero attention.
AttentionVars attention_step(ad::Graph& g, ModelParams& p, ad::Var s, ad::Var states,
                             const Mat* mask = nullptr);

struct GateVars {
    ad::Var gate;    // 1 × |D|, each in (0,1)
    ad::Var refined; // 1 × |D| = gate ⊙ attn, sub-stochastic
    ad::Var renorm;  // 1 × |D|, refined / sum(refined)
};

GateVars refine_attention(ad::Graph& g, ModelParams& p, ad::Var s, ad::Var attn, ad::Var states,
                          GateForm form);

ad::Var context_vector(ad::Var renorm, ad::Var states); // 1 × 2H

struct StepOutput {
    StepState state;
    AttentionVars attn;
    GateVars gate;
    ad::Var context;    // 1 × 2H
    ad::Var p_gen;      // 1 × 1
    ad::Var vocab_dist; // 1 × V
    ad::Var final_dist; // 1 × (V + #OOV)
};

/// One teacher-forcing / decoding step. prev_token is an extended-vocab id;
/// ids ≥ V embed as UNK. source_ext_ids map attention mass onto the extended
/// vocabulary for the copy distribution.
StepOutput decode_step(ad::Graph& g, ModelParams& p, int prev_token, StepState prev,
                       ad::Var states, std::span<const int> source_ext_ids, int n_oov,
                       GateForm form, const Mat* attn_mask = nullptr);

struct ExampleForward {
    std::vector<ad::Var> gold_probs; // T × (1×1), probability of each gold token
    std::vector<ad::Var> refined;    // T × (1×|D|)
    std::vector<ad::Var> gates;      // T × (1×|D|)
};

/// Full teacher-forced pass over one encoded example (T = target len - 1).
ExampleForward forward_example(ad::Graph& g, ModelParams& p, const data::ExtendedExample& ex,
                               GateForm form);

// Value-mode decoding interface: same graph code run on a scratch tape per
// step, so decode-time numbers match training arithmetic exactly.
struct ValueState {
    Mat h, c;
};

struct ValueEncoderOut {
    Mat states;
    ValueState init;
};

ValueEncoderOut encode_value(ModelParams& p, std::span<const int> source_ids);

struct ValueStepOutput {
    ValueState state;
    Mat attn, gate, refined, renorm;
    Mat final_dist;
    double p_gen;
};

ValueStepOutput decode_step_value(ModelParams& p, int prev_token, const ValueState& prev,
                                  const Mat& states, std::span<const int> source_ext_ids,
                                  int n_oov, GateForm form);

} // namespace attnvar::model
