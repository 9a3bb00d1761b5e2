#include "rankae/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rankae {

using nn::Graph;
using nn::Mat;
using nn::Var;

EncoderParams EncoderParams::create(nn::ParamStore& ps, const EncoderConfig& cfg, int vocab_size,
                                    Rng& rng) {
    EncoderParams p;
    p.cfg = cfg;
    p.tok_emb = ps.add("enc.tok_emb", nn::uniform_init(vocab_size, cfg.d, 0.05, rng));
    p.party_emb = ps.add("enc.party_emb", nn::uniform_init(cfg.max_parties, cfg.d, 0.05, rng));
    p.pos_emb = ps.add("enc.pos_emb", nn::uniform_init(cfg.max_len, cfg.d, 0.05, rng));
    p.stack = nn::make_stack(ps, "enc", cfg.d, cfg.layers, cfg.heads, cfg.ffn, false, rng);
    p.bilinear_w = ps.add("enc.bilinear_w", nn::glorot(cfg.d, cfg.d, rng));
    return p;
}

namespace {

Var encoder_input(Graph& g, const EncoderParams& p, const std::vector<int>& tokens, int party,
                  int pad_to) {
    int m = static_cast<int>(tokens.size());
    if (m + 2 > p.cfg.max_len)
        throw std::invalid_argument("utterance too long for encoder: " + std::to_string(m) +
                                    " tokens with max_len " + std::to_string(p.cfg.max_len));
    if (party < 0 || party >= p.cfg.max_parties)
        throw std::out_of_range("party index outside embedding table");
    int t = std::max(m + 2, pad_to);

    std::vector<int> slot_tokens(static_cast<size_t>(t), Vocab::kPad);
    slot_tokens[0] = Vocab::kCls;
    // slot 1 carries the party embedding; its token contribution stays zero
    slot_tokens[1] = Vocab::kPad;
    for (int j = 0; j < m; ++j) slot_tokens[static_cast<size_t>(j) + 2] = tokens[static_cast<size_t>(j)];

    std::vector<int> positions(static_cast<size_t>(t));
    for (int j = 0; j < t; ++j) positions[static_cast<size_t>(j)] = j;

    Var tok = g.rows_gather(p.tok_emb, slot_tokens);
    Var pos = g.rows_gather(p.pos_emb, positions);
    Var x = g.add(tok, pos);

    // party embedding added at slot 1 only
    Mat sel = Mat::Zero(t, 1);
    sel(1, 0) = 1.0;
    Var party_row = g.rows_gather(p.party_emb, {party});
    x = g.add(x, g.matmul(nn::make_const(sel), party_row));
    return x;
}

}  // namespace

Var embed_utterance(Graph& g, const EncoderParams& p, const std::vector<int>& tokens, int party) {
    Var x = encoder_input(g, p, tokens, party, 0);
    Var out = nn::stack_forward(g, p.stack, x);
    return g.slice_rows(out, 0, 1);
}

Var embed_utterance_padded(Graph& g, const EncoderParams& p, const std::vector<int>& tokens,
                           int party, int pad_to) {
    int valid = static_cast<int>(tokens.size()) + 2;
    Var x = encoder_input(g, p, tokens, party, pad_to);
    int t = static_cast<int>(x->val.rows());
    Mat mask = nn::key_padding_mask(t, t, valid);
    Var out = nn::stack_forward(g, p.stack, x, &mask);
    return g.slice_rows(out, 0, 1);
}

Var embed_chat(Graph& g, const EncoderParams& p, const ChatLog& chat) {
    std::vector<Var> rows;
    rows.reserve(chat.utterances.size());
    for (const auto& u : chat.utterances) rows.push_back(embed_utterance(g, p, u.tokens, u.party));
    return g.concat_rows(rows);
}

std::vector<CupTerm> make_cup_plan(const ChatLog& chat, int c, int m, Rng& rng) {
    if (c < 1) throw std::invalid_argument("window size must be >= 1");
    if (m < 1) throw std::invalid_argument("negative count must be >= 1");
    int n = chat.size();
    std::vector<CupTerm> plan;
    if (n < 2) return plan;

    for (int i = 1; i <= n; ++i) {
        int lo = std::max(1, i - c);
        int hi = std::min(n, i + c);
        // non-window candidates for this center (window includes the center)
        std::vector<int> pool;
        for (int j = 1; j <= n; ++j)
            if (j < lo || j > hi) pool.push_back(j);

        for (int j = lo; j <= hi; ++j) {
            if (j == i) continue;
            plan.push_back({i, j, true});
            if (pool.empty()) continue;  // nothing outside the window: skip negatives
            if (static_cast<int>(pool.size()) >= m) {
                std::vector<int> picks = rng.sample_distinct(static_cast<int>(pool.size()), m);
                for (int idx : picks) plan.push_back({i, pool[static_cast<size_t>(idx)], false});
            } else {
                for (int t = 0; t < m; ++t)
                    plan.push_back({i, pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))], false});
            }
        }
    }

    // negatives must come from the same chat, outside the center's window
    for (const auto& term : plan) {
        if (term.other < 1 || term.other > n) throw std::logic_error("cup plan: index outside chat");
        if (!term.positive && std::abs(term.other - term.center) <= c)
            throw std::logic_error("cup plan: negative drawn inside the window");
    }
    return plan;
}

Var cup_loss(Graph& g, const Var& H, const Var& bilinear_w, const std::vector<CupTerm>& plan) {
    if (plan.empty()) return nn::make_scalar(0.0);
    // scores s_t = h_other^T W h_center, one per term; sign flips for negatives
    std::vector<int> centers, others;
    centers.reserve(plan.size());
    others.reserve(plan.size());
    for (const auto& t : plan) {
        centers.push_back(t.center - 1);
        others.push_back(t.other - 1);
    }
    Var hc = g.rows_gather(H, centers);  // T x d
    Var ho = g.rows_gather(H, others);   // T x d
    // row t of hc*W^T is (W h_c)^T, so the rowwise dot with ho gives h_o^T W h_c
    Var scored = g.hadamard(ho, g.matmul_nt(hc, bilinear_w));
    Var s = g.matmul(scored, nn::make_const(Mat::Ones(ho->val.cols(), 1)));  // T x 1 row sums
    Mat signs(static_cast<Eigen::Index>(plan.size()), 1);
    for (size_t t = 0; t < plan.size(); ++t) signs(static_cast<Eigen::Index>(t), 0) = plan[t].positive ? 1.0 : -1.0;
    Var signed_scores = g.hadamard(s, nn::make_const(signs));
    return g.scale(g.sum(g.log_sigmoid(signed_scores)), -1.0);
}

// ---------------------------------------------------------------------------

TfIdfModel TfIdfModel::fit(const std::vector<ChatLog>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("tf-idf: empty corpus");
    TfIdfModel m;
    std::unordered_map<int, long> df;
    for (const auto& chat : corpus) {
        for (const auto& u : chat.utterances) {
            ++m.total_docs_;
            std::set<int> uniq(u.tokens.begin(), u.tokens.end());
            for (int t : uniq) ++df[t];
        }
    }
    if (m.total_docs_ == 0) throw std::invalid_argument("tf-idf: corpus has no utterances");
    for (const auto& [t, d] : df)
        m.idf_[t] = std::log((1.0 + static_cast<double>(m.total_docs_)) / (1.0 + static_cast<double>(d))) + 1.0;
    return m;
}

double TfIdfModel::idf_for(int token) const {
    auto it = idf_.find(token);
    if (it != idf_.end()) return it->second;
    // unseen token: treat as occurring in no document
    return std::log(1.0 + static_cast<double>(total_docs_)) + 1.0;
}

std::unordered_map<int, double> TfIdfModel::weigh(const std::vector<int>& tokens) const {
    std::unordered_map<int, double> tf;
    for (int t : tokens) tf[t] += 1.0;
    for (auto& [t, w] : tf) w *= idf_for(t);
    return tf;
}

Eigen::MatrixXd TfIdfModel::similarity_matrix(const ChatLog& chat) const {
    int n = chat.size();
    std::vector<std::unordered_map<int, double>> vecs;
    std::vector<double> norms;
    vecs.reserve(static_cast<size_t>(n));
    for (const auto& u : chat.utterances) {
        auto v = weigh(u.tokens);
        double sq = 0.0;
        for (const auto& [t, w] : v) sq += w * w;
        norms.push_back(std::sqrt(sq));
        vecs.push_back(std::move(v));
    }
    Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        sim(i, i) = norms[static_cast<size_t>(i)] > 0.0 ? 1.0 : 0.0;
        for (int j = i + 1; j < n; ++j) {
            const auto& a = vecs[static_cast<size_t>(i)];
            const auto& b = vecs[static_cast<size_t>(j)];
            const auto& small = a.size() <= b.size() ? a : b;
            const auto& big = a.size() <= b.size() ? b : a;
            double dot = 0.0;
            for (const auto& [t, w] : small) {
                auto it = big.find(t);
                if (it != big.end()) dot += w * it->second;
            }
            double denom = norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)];
            double v = denom > 0.0 ? dot / denom : 0.0;
            sim(i, j) = v;
            sim(j, i) = v;
        }
    }
    return sim;
}

}  // namespace rankae
