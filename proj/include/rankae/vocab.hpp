#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rankae/corpus.hpp"

namespace rankae {

// Subword vocabulary learned with greedy byte-pair merges over characters.
// Specials are fixed ids at the front and never participate in merges.
class Vocab {
public:
    // fixed special ids
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kBos = 4;  // placeholder slot; the query vector takes its place
    static constexpr int kEos = 5;
    static constexpr int kNum = 6;
    static constexpr int kUrl = 7;
    static constexpr int kEmail = 8;
    static constexpr int kMaxParties = 8;
    // party markers <p0>..<p7> occupy ids 9..16

    static int party_id(int party);                // token id of <p{party}>
    static int num_specials();                     // count of reserved ids
    static const std::vector<std::string>& special_tokens();

    Vocab() = default;

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int num_merges() const { return static_cast<int>(merges_.size()); }
    const std::string& token(int id) const;
    int id(const std::string& token) const;        // -1 if absent
    bool is_special(int id) const { return id >= 0 && id < num_specials(); }

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;  // throws on out-of-range id

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);
    std::string to_json() const;
    static Vocab from_json(const std::string& json_text);
    uint64_t hash() const { return fnv1a(to_json()); }

    // exposed for tests
    const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

    friend Vocab build_vocab(const std::vector<ChatLog>&, int, int);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::pair<std::string, std::string>> merges_;  // rank = index
    std::unordered_map<std::string, int> merge_rank_;          // "l\x1fr" -> rank
    mutable std::unordered_map<std::string, std::vector<int>> word_cache_;

    std::vector<std::string> word_symbols(const std::string& word) const;
    std::vector<int> encode_word(const std::string& word) const;
    void rebuild_maps();
};

// Greedy BPE over the corpus text. Deterministic; ties between equally
// frequent pairs break toward the lexicographically smaller pair. Stops when
// the vocabulary reaches target_size, the merge budget is exhausted, or no
// pair occurs at least twice.
Vocab build_vocab(const std::vector<ChatLog>& corpus, int target_size, int max_merges = 1 << 20);

// Fills utterance token sequences in place and applies the per-utterance
// token cap.
void tokenize_corpus(std::vector<ChatLog>& corpus, const Vocab& vocab, int max_tokens = 40);

}  // namespace rankae
