#pragma once

#include "rankae/corpus.hpp"
#include "rankae/transformer.hpp"
#include "rankae/vocab.hpp"

namespace rankae {

struct EncoderConfig {
    int d = 64;
    int layers = 2;
    int heads = 4;
    int ffn = 256;
    int max_len = 64;      // input slots: [cls, party, w_1..w_{L-2}]
    int max_parties = Vocab::kMaxParties;
};

// Utterance encoder: summed token/position embeddings (party embedding at
// slot 1) through a transformer stack; the utterance vector is the final
// CLS-slot row. The bilinear matrix scores utterance co-occurrence.
struct EncoderParams {
    EncoderConfig cfg;
    nn::Var tok_emb;    // |V| x d
    nn::Var party_emb;  // P x d
    nn::Var pos_emb;    // L x d
    nn::StackParams stack;
    nn::Var bilinear_w;  // d x d

    static EncoderParams create(nn::ParamStore& ps, const EncoderConfig& cfg, int vocab_size, Rng& rng);
};

// h_i for one utterance; tokens must fit max_len - 2
nn::Var embed_utterance(nn::Graph& g, const EncoderParams& p, const std::vector<int>& tokens, int party);

// all utterance vectors of one chat stacked into n x d (requires tokens filled)
nn::Var embed_chat(nn::Graph& g, const EncoderParams& p, const ChatLog& chat);

// test hook: same forward but with extra padding slots masked out of attention
nn::Var embed_utterance_padded(nn::Graph& g, const EncoderParams& p, const std::vector<int>& tokens,
                               int party, int pad_to);

// ---------------------------------------------------------------------------
// Context Utterance Prediction

struct CupTerm {
    int center;    // 1-based position
    int other;     // 1-based position
    bool positive;
};

// Positives: every in-window pair (clipped at chat bounds). Negatives: for
// each positive, m draws from the same chat outside the center's window —
// distinct when the pool allows, with replacement otherwise, skipped when the
// pool is empty.
std::vector<CupTerm> make_cup_plan(const ChatLog& chat, int c, int m, Rng& rng);

// Negated sum of log-sigmoid scores over the plan. H is the n x d matrix of
// utterance vectors for the chat.
nn::Var cup_loss(nn::Graph& g, const nn::Var& H, const nn::Var& bilinear_w,
                 const std::vector<CupTerm>& plan);

// ---------------------------------------------------------------------------
// tf-idf backend: document = utterance, idf over every utterance in the
// corpus; smooth idf so identical utterances always score 1.

class TfIdfModel {
public:
    static TfIdfModel fit(const std::vector<ChatLog>& corpus);
    // cosine-similarity matrix between the utterances of one chat, in [0, 1]
    Eigen::MatrixXd similarity_matrix(const ChatLog& chat) const;

private:
    std::unordered_map<int, double> idf_;
    long total_docs_ = 0;
    double idf_for(int token) const;
    std::unordered_map<int, double> weigh(const std::vector<int>& tokens) const;
};

}  // namespace rankae
