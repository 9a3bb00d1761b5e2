#pragma once

#include <map>
#include <string>
#include <vector>

#include "rankae/corpus.hpp"

namespace rankae {

// All metrics operate on token sequences; callers pick the tokenization
// (subword ids rendered as strings, or whitespace words).
using Tokens = std::vector<std::string>;

// clipped n-gram overlap F1; throws on empty reference
double rouge_n_f(const Tokens& candidate, const Tokens& reference, int n);

// longest-common-subsequence F1; throws on empty reference
double rouge_l_f(const Tokens& candidate, const Tokens& reference);

// Geometric mean of clipped n-gram precisions up to 4-grams with +1 smoothing
// for n >= 2, times the brevity penalty. Empty candidate or no unigram
// matches scores 0.
double bleu(const Tokens& candidate, const Tokens& reference, int max_n = 4);

struct MetricReport {
    double rouge1_f = 0.0;
    double rouge2_f = 0.0;
    double rougeL_f = 0.0;
    double bleu_score = 0.0;
    double length_ratio = 0.0;
    int num_chats = 0;
    int empty_candidates = 0;
    struct Row {
        std::string chat_id;
        double rouge1, rouge2, rougeL, bleu, len_ratio;
    };
    std::vector<Row> per_chat;

    std::string to_json() const;
    std::string to_table() const;
};

// Corpus-level averages; candidates and references keyed by chat id. Chats
// without a reference are skipped; empty candidates contribute zero and are
// counted. Truncation (if any) must happen before this call; length ratios
// use the sequences exactly as given.
MetricReport evaluate_corpus(const std::map<std::string, Tokens>& candidates,
                             const std::map<std::string, Tokens>& references);

// first utterances until the token budget is reached (last one truncated)
std::vector<std::string> lead_baseline(const std::vector<Tokens>& utterances, int budget_tokens);

// greedily add the utterance that maximizes ROUGE-1 + ROUGE-2 F against the
// gold, in position order, while the score strictly improves and the budget
// allows; returns selected utterance indices in selection order
std::vector<int> oracle_baseline(const std::vector<Tokens>& utterances, const Tokens& gold,
                                 int budget_tokens);

}  // namespace rankae
