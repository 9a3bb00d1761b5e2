#pragma once

#include "rankae/nn.hpp"

namespace rankae::nn {

struct AttentionParams {
    std::vector<Var> wq, wk, wv;  // one d x d_head matrix per head
    Var wo;                       // d x d
};

struct LayerParams {
    Var ln1_g, ln1_b;
    AttentionParams self_attn;
    bool has_cross = false;
    Var lnc_g, lnc_b;
    AttentionParams cross_attn;
    Var ln2_g, ln2_b;
    Var w1, b1, w2, b2;  // position-wise FFN
};

// Pre-norm transformer stack with a final layer norm. Zero layers is the
// identity map.
struct StackParams {
    std::vector<LayerParams> layers;
    Var lnf_g, lnf_b;
    int heads = 1;
};

StackParams make_stack(ParamStore& ps, const std::string& prefix, int d, int layers, int heads,
                       int ffn, bool cross, Rng& rng);

// additive masks: 0 where attention is allowed, large negative where not
Mat causal_mask(int t);
Mat key_padding_mask(int t_query, int t_key, int valid_keys);

Var attention(Graph& g, const AttentionParams& p, const Var& x_q, const Var& x_kv, const Mat* mask,
              int heads);

// memory == nullptr runs encoder layers; otherwise cross-attention reads it.
Var stack_forward(Graph& g, const StackParams& p, Var x, const Mat* self_mask = nullptr,
                  const Var& memory = nullptr, const Mat* cross_mask = nullptr);

}  // namespace rankae::nn
