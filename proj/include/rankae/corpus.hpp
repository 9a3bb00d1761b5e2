#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rankae/common.hpp"

namespace rankae {

struct Utterance {
    int party = 0;               // speaker index within the chat
    std::string text;            // normalized text
    std::vector<int> tokens;     // subword ids, filled after tokenization
    int position = 0;            // 1-based index within the chat
};

struct ChatLog {
    std::string id;
    std::vector<Utterance> utterances;

    int size() const { return static_cast<int>(utterances.size()); }
    const Utterance& at_pos(int pos) const { return utterances.at(static_cast<size_t>(pos) - 1); }
    Utterance& at_pos(int pos) { return utterances.at(static_cast<size_t>(pos) - 1); }
};

// chat_id -> reference summary text; evaluation-only, never read by training
using GoldMap = std::map<std::string, std::string>;

struct NormalizeOptions {
    std::vector<std::string> filler_words = {"um", "uh", "hmm", "well", "hello"};
};

// Replaces numbers / URLs / e-mail addresses with <num> / <url> / <email>,
// drops filler words and collapses whitespace. Idempotent.
std::string normalize_text(const std::string& raw, const NormalizeOptions& opts = {});

// Keeps the first max_utts utterances and cuts each token sequence to max_tokens.
// Never increases any length; positions stay 1..n.
ChatLog truncate_chat(const ChatLog& chat, int max_utts, int max_tokens);

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// JSONL, one chat per line:
//   {"id": str, "utterances": [{"party": int, "text": str}], "gold": str|null}
// Utterance text is normalized on load; chats are truncated to the limits.
struct LoadOptions {
    NormalizeOptions normalize;
    int max_utterances = 40;
    int max_tokens = 40;    // applied later, at tokenization time
    bool do_normalize = true;
};

std::vector<ChatLog> load_chat_logs(const std::string& path, GoldMap* golds = nullptr,
                                    const LoadOptions& opts = {});
void save_chat_logs(const std::string& path, const std::vector<ChatLog>& chats,
                    const GoldMap* golds = nullptr);

// ---------------------------------------------------------------------------
// Synthetic corpus: chats built from contiguous topic blocks with two
// alternating parties. Stands in for real customer-service logs; the gold
// summary is one canonical sentence per topic.

struct SynthConfig {
    int num_chats = 100;
    int min_topics = 2;
    int max_topics = 3;
    int min_utts_per_topic = 2;
    int max_utts_per_topic = 4;
    bool shuffle_blocks = false;  // destroys topic locality, for negative tests
};

struct SynthCorpus {
    std::vector<ChatLog> chats;
    GoldMap golds;
    // topic block label per utterance (by chat index, then 0-based utterance
    // index); used by locality and diversity tests
    std::vector<std::vector<int>> block_labels;
};

// Pure function of (cfg, seed): identical inputs give byte-identical output.
SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg, uint64_t seed);

}  // namespace rankae
