#pragma once

#include "rankae/compressor.hpp"
#include "rankae/eval.hpp"
#include "rankae/ranker.hpp"

namespace rankae {

struct RankResult {
    int k = 0;
    std::vector<int> selected;    // 0-based utterance indices, selection order
    std::vector<double> scores;   // greedy score at each selection step
    Eigen::MatrixXd M;            // final distance-weighted relevance matrix
};

RankResult rank_with_matrix(const Eigen::MatrixXd& raw_relevance, const RankConfig& cfg);
RankResult rank_chat_neural(const Model& model, const ChatEncoding& ce, const RankConfig& cfg);
RankResult rank_chat_tfidf(const TfIdfModel& tfidf, const ChatLog& chat, const RankConfig& cfg);

struct SummaryOptions {
    bool extractive = false;   // skip the DAE and concatenate topic utterances
    DecodeOptions decode;
    int budget_tokens = 40;    // 0 disables global truncation
};

struct ChatSummary {
    std::string chat_id;
    std::string text;
    std::vector<int> selected;       // 0-based utterance indices, position order
    std::vector<int> summary_tokens; // content tokens after truncation
    bool empty_decode = false;       // some segment decoded to nothing
};

// Runs selection (already done by the caller) through segment compression and
// assembly. Selected indices are re-sorted by chat position. Specials are
// stripped before rendering; truncation applies to the joint token stream.
ChatSummary assemble_summary(const Model& model, const Vocab& vocab, const ChatLog& chat,
                             const ChatEncoding& ce, const std::vector<int>& selected,
                             const RankConfig& rank_cfg, const SummaryOptions& opts);

// prediction files: JSONL {"chat_id", "summary", "selected": [...]}
void save_predictions(const std::string& path, const std::vector<ChatSummary>& summaries);
std::map<std::string, std::string> load_predictions(const std::string& path);

// tokenization for metrics: subword pieces of the shared vocabulary, or
// whitespace words when use_words is set
Tokens metric_tokens(const std::string& text, const Vocab& vocab, bool use_words);

}  // namespace rankae
