#include "rankae/transformer.hpp"

#include <cmath>

namespace rankae::nn {

namespace {
constexpr double kMaskValue = -1e30;
}

StackParams make_stack(ParamStore& ps, const std::string& prefix, int d, int layers, int heads,
                       int ffn, bool cross, Rng& rng) {
    if (layers > 0 && d % heads != 0) throw std::invalid_argument("model dim not divisible by heads");
    StackParams sp;
    sp.heads = heads;
    int dh = layers > 0 ? d / heads : 0;
    for (int l = 0; l < layers; ++l) {
        std::string lp = prefix + ".l" + std::to_string(l);
        LayerParams layer;
        layer.ln1_g = ps.add(lp + ".ln1.g", Mat::Ones(1, d));
        layer.ln1_b = ps.add(lp + ".ln1.b", Mat::Zero(1, d));
        for (int h = 0; h < heads; ++h) {
            layer.self_attn.wq.push_back(ps.add(lp + ".self.q" + std::to_string(h), glorot(d, dh, rng)));
            layer.self_attn.wk.push_back(ps.add(lp + ".self.k" + std::to_string(h), glorot(d, dh, rng)));
            layer.self_attn.wv.push_back(ps.add(lp + ".self.v" + std::to_string(h), glorot(d, dh, rng)));
        }
        layer.self_attn.wo = ps.add(lp + ".self.o", glorot(d, d, rng));
        if (cross) {
            layer.has_cross = true;
            layer.lnc_g = ps.add(lp + ".lnc.g", Mat::Ones(1, d));
            layer.lnc_b = ps.add(lp + ".lnc.b", Mat::Zero(1, d));
            for (int h = 0; h < heads; ++h) {
                layer.cross_attn.wq.push_back(ps.add(lp + ".cross.q" + std::to_string(h), glorot(d, dh, rng)));
                layer.cross_attn.wk.push_back(ps.add(lp + ".cross.k" + std::to_string(h), glorot(d, dh, rng)));
                layer.cross_attn.wv.push_back(ps.add(lp + ".cross.v" + std::to_string(h), glorot(d, dh, rng)));
            }
            layer.cross_attn.wo = ps.add(lp + ".cross.o", glorot(d, d, rng));
        }
        layer.ln2_g = ps.add(lp + ".ln2.g", Mat::Ones(1, d));
        layer.ln2_b = ps.add(lp + ".ln2.b", Mat::Zero(1, d));
        layer.w1 = ps.add(lp + ".ffn.w1", glorot(d, ffn, rng));
        layer.b1 = ps.add(lp + ".ffn.b1", Mat::Zero(1, ffn));
        layer.w2 = ps.add(lp + ".ffn.w2", glorot(ffn, d, rng));
        layer.b2 = ps.add(lp + ".ffn.b2", Mat::Zero(1, d));
        sp.layers.push_back(std::move(layer));
    }
    if (layers > 0) {
        sp.lnf_g = ps.add(prefix + ".lnf.g", Mat::Ones(1, d));
        sp.lnf_b = ps.add(prefix + ".lnf.b", Mat::Zero(1, d));
    }
    return sp;
}

Mat causal_mask(int t) {
    Mat m = Mat::Zero(t, t);
    for (int i = 0; i < t; ++i)
        for (int j = i + 1; j < t; ++j) m(i, j) = kMaskValue;
    return m;
}

Mat key_padding_mask(int t_query, int t_key, int valid_keys) {
    Mat m = Mat::Zero(t_query, t_key);
    for (int i = 0; i < t_query; ++i)
        for (int j = valid_keys; j < t_key; ++j) m(i, j) = kMaskValue;
    return m;
}

Var attention(Graph& g, const AttentionParams& p, const Var& x_q, const Var& x_kv, const Mat* mask,
              int heads) {
    std::vector<Var> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    double scale = 1.0 / std::sqrt(static_cast<double>(p.wq[0]->val.cols()));
    for (int h = 0; h < heads; ++h) {
        Var q = g.matmul(x_q, p.wq[static_cast<size_t>(h)]);
        Var k = g.matmul(x_kv, p.wk[static_cast<size_t>(h)]);
        Var v = g.matmul(x_kv, p.wv[static_cast<size_t>(h)]);
        Var scores = g.scale(g.matmul_nt(q, k), scale);
        Var weights = g.softmax_rows(scores, mask);
        head_outs.push_back(g.matmul(weights, v));
    }
    return g.matmul(g.concat_cols(head_outs), p.wo);
}

Var stack_forward(Graph& g, const StackParams& p, Var x, const Mat* self_mask, const Var& memory,
                  const Mat* cross_mask) {
    if (p.layers.empty()) return x;
    for (const auto& layer : p.layers) {
        Var normed = g.layer_norm(x, layer.ln1_g, layer.ln1_b);
        x = g.add(x, attention(g, layer.self_attn, normed, normed, self_mask, p.heads));
        if (layer.has_cross) {
            if (!memory) throw std::logic_error("cross-attention layer without memory");
            Var cn = g.layer_norm(x, layer.lnc_g, layer.lnc_b);
            x = g.add(x, attention(g, layer.cross_attn, cn, memory, cross_mask, p.heads));
        }
        Var fn = g.layer_norm(x, layer.ln2_g, layer.ln2_b);
        Var hidden = g.gelu(g.add_rowvec(g.matmul(fn, layer.w1), layer.b1));
        x = g.add(x, g.add_rowvec(g.matmul(hidden, layer.w2), layer.b2));
    }
    return g.layer_norm(x, p.lnf_g, p.lnf_b);
}

}  // namespace rankae::nn
