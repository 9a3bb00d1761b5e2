#include "rankae/decode_cache.hpp"

#include <cmath>

namespace rankae {

namespace {

using Row = Eigen::RowVectorXd;
using Eigen::MatrixXd;

Row layer_norm_row(const Row& x, const nn::Var& gamma, const nn::Var& beta, double eps = 1e-5) {
    double mu = x.mean();
    double var = (x.array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + eps);
    return ((x.array() - mu) * inv * gamma->val.row(0).array() + beta->val.row(0).array()).matrix();
}

Row gelu_row(const Row& x) {
    return x.unaryExpr([](double v) {
        double u = 0.7978845608028654 * (v + 0.044715 * v * v * v);
        return 0.5 * v * (1.0 + std::tanh(u));
    });
}

Row softmax_row(const Row& s) {
    double mx = s.maxCoeff();
    Eigen::ArrayXd e = (s.array() - mx).exp();
    return (e / e.sum()).matrix().transpose();
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const Model& model, Eigen::MatrixXd memory)
    : model_(model), memory_(std::move(memory)) {
    const auto& stack = model_.comp.dec_stack;
    layers_.resize(stack.layers.size());
    for (size_t l = 0; l < stack.layers.size(); ++l) {
        const auto& lp = stack.layers[l];
        layers_[l].self_heads.resize(static_cast<size_t>(stack.heads));
        for (int h = 0; h < stack.heads; ++h) {
            layers_[l].cross_k.push_back(memory_ * lp.cross_attn.wk[static_cast<size_t>(h)]->val);
            layers_[l].cross_v.push_back(memory_ * lp.cross_attn.wv[static_cast<size_t>(h)]->val);
        }
    }
}

Row IncrementalDecoder::step(const Row& input_embedding) {
    const auto& stack = model_.comp.dec_stack;
    Row x = input_embedding;
    double dh = stack.layers.empty() ? 1.0
                                     : static_cast<double>(stack.layers[0].self_attn.wq[0]->val.cols());
    double scale = 1.0 / std::sqrt(dh);

    for (size_t l = 0; l < stack.layers.size(); ++l) {
        const auto& lp = stack.layers[l];
        LayerCache& cache = layers_[l];

        // self-attention over the cached prefix plus this position
        Row n1 = layer_norm_row(x, lp.ln1_g, lp.ln1_b);
        Row attn_out = Row::Zero(x.cols());
        std::vector<Row> head_outs;
        for (int h = 0; h < stack.heads; ++h) {
            HeadCache& hc = cache.self_heads[static_cast<size_t>(h)];
            Row q = n1 * lp.self_attn.wq[static_cast<size_t>(h)]->val;
            Row k = n1 * lp.self_attn.wk[static_cast<size_t>(h)]->val;
            Row v = n1 * lp.self_attn.wv[static_cast<size_t>(h)]->val;
            hc.k.conservativeResize(t_ + 1, k.cols());
            hc.v.conservativeResize(t_ + 1, v.cols());
            hc.k.row(t_) = k;
            hc.v.row(t_) = v;
            Row scores = (q * hc.k.transpose()) * scale;
            head_outs.push_back(softmax_row(scores) * hc.v);
        }
        Row concat(x.cols());
        Eigen::Index at = 0;
        for (const Row& ho : head_outs) {
            concat.segment(at, ho.cols()) = ho;
            at += ho.cols();
        }
        x += concat * lp.self_attn.wo->val;

        // cross attention over the fixed memory rows
        Row nc = layer_norm_row(x, lp.lnc_g, lp.lnc_b);
        head_outs.clear();
        for (int h = 0; h < stack.heads; ++h) {
            Row q = nc * lp.cross_attn.wq[static_cast<size_t>(h)]->val;
            Row scores = (q * cache.cross_k[static_cast<size_t>(h)].transpose()) * scale;
            head_outs.push_back(softmax_row(scores) * cache.cross_v[static_cast<size_t>(h)]);
        }
        at = 0;
        for (const Row& ho : head_outs) {
            concat.segment(at, ho.cols()) = ho;
            at += ho.cols();
        }
        x += concat * lp.cross_attn.wo->val;

        Row n2 = layer_norm_row(x, lp.ln2_g, lp.ln2_b);
        Row hidden = gelu_row(n2 * lp.w1->val + lp.b1->val.row(0));
        x += hidden * lp.w2->val + lp.b2->val.row(0);
    }
    if (!stack.layers.empty()) x = layer_norm_row(x, stack.lnf_g, stack.lnf_b);
    ++t_;
    return x * model_.comp.out_w->val + model_.comp.out_b->val.row(0);
}

}  // namespace rankae
