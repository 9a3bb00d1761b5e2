#include "rankae/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

namespace rankae {

namespace {

constexpr const char* kEndOfWord = "</w>";
constexpr char kPairSep = '\x1f';

// UTF-8 aware split into codepoint strings
std::vector<std::string> utf8_chars(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t len = 1;
        if ((c & 0x80) == 0x00) len = 1;
        else if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        if (i + len > s.size()) len = 1;  // truncated sequence, treat byte-wise
        out.push_back(s.substr(i, len));
        i += len;
    }
    return out;
}

std::string pair_key(const std::string& l, const std::string& r) { return l + kPairSep + r; }

}  // namespace

const std::vector<std::string>& Vocab::special_tokens() {
    static const std::vector<std::string> specials = [] {
        std::vector<std::string> v = {"<pad>", "<unk>", "<cls>", "<sep>", "<bos>",
                                      "<eos>", "<num>", "<url>", "<email>"};
        for (int p = 0; p < kMaxParties; ++p) v.push_back("<p" + std::to_string(p) + ">");
        return v;
    }();
    return specials;
}

int Vocab::num_specials() { return static_cast<int>(special_tokens().size()); }

int Vocab::party_id(int party) {
    if (party < 0 || party >= kMaxParties)
        throw std::out_of_range("party index out of range: " + std::to_string(party));
    return kEmail + 1 + party;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
    return id_to_token_[static_cast<size_t>(id)];
}

int Vocab::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

void Vocab::rebuild_maps() {
    token_to_id_.clear();
    for (int i = 0; i < size(); ++i) token_to_id_[id_to_token_[static_cast<size_t>(i)]] = i;
    merge_rank_.clear();
    for (size_t r = 0; r < merges_.size(); ++r)
        merge_rank_[pair_key(merges_[r].first, merges_[r].second)] = static_cast<int>(r);
    word_cache_.clear();
}

std::vector<std::string> Vocab::word_symbols(const std::string& word) const {
    // specials embedded in text stay atomic; everything else splits into
    // codepoints, with the end-of-word marker as its own trailing symbol
    std::vector<std::string> syms;
    if (std::find(special_tokens().begin(), special_tokens().end(), word) != special_tokens().end()) {
        syms.push_back(word);
        return syms;
    }
    syms = utf8_chars(word);
    syms.push_back(kEndOfWord);
    return syms;
}

std::vector<int> Vocab::encode_word(const std::string& word) const {
    auto cached = word_cache_.find(word);
    if (cached != word_cache_.end()) return cached->second;

    std::vector<std::string> syms = word_symbols(word);
    if (syms.size() == 1 && token_to_id_.count(syms[0])) {
        std::vector<int> ids = {token_to_id_.at(syms[0])};
        word_cache_[word] = ids;
        return ids;
    }
    // repeatedly apply the lowest-ranked merge present
    while (syms.size() > 1) {
        int best_rank = -1;
        size_t best_at = 0;
        for (size_t i = 0; i + 1 < syms.size(); ++i) {
            auto it = merge_rank_.find(pair_key(syms[i], syms[i + 1]));
            if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
                best_rank = it->second;
                best_at = i;
            }
        }
        if (best_rank < 0) break;
        syms[best_at] += syms[best_at + 1];
        syms.erase(syms.begin() + static_cast<long>(best_at) + 1);
    }
    std::vector<int> ids;
    ids.reserve(syms.size());
    for (const auto& s : syms) {
        auto it = token_to_id_.find(s);
        ids.push_back(it == token_to_id_.end() ? kUnk : it->second);
    }
    word_cache_[word] = ids;
    return ids;
}

std::vector<int> Vocab::encode(const std::string& text) const {
    std::vector<int> out;
    for (const auto& word : split_ws(text)) {
        std::vector<int> ids = encode_word(word);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        const std::string& tok = token(id);  // range check
        if (id == kPad) continue;
        if (is_special(id)) {
            out += tok;
            out += ' ';
        } else if (tok.size() >= 4 && tok.compare(tok.size() - 4, 4, kEndOfWord) == 0) {
            out += tok.substr(0, tok.size() - 4);
            out += ' ';
        } else if (tok == kEndOfWord) {
            out += ' ';
        } else {
            out += tok;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

Vocab build_vocab(const std::vector<ChatLog>& corpus, int target_size, int max_merges) {
    if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");

    Vocab v;
    v.id_to_token_ = Vocab::special_tokens();

    // word frequencies, in deterministic first-seen order
    std::vector<std::pair<std::string, long>> word_freq;
    std::unordered_map<std::string, size_t> word_index;
    for (const auto& chat : corpus) {
        for (const auto& u : chat.utterances) {
            for (const auto& w : split_ws(u.text)) {
                auto it = word_index.find(w);
                if (it == word_index.end()) {
                    word_index[w] = word_freq.size();
                    word_freq.emplace_back(w, 1);
                } else {
                    ++word_freq[it->second].second;
                }
            }
        }
    }

    // base symbols: end-of-word marker plus all distinct codepoints, sorted
    std::set<std::string> base_chars;
    std::vector<std::vector<std::string>> word_syms(word_freq.size());
    for (size_t wi = 0; wi < word_freq.size(); ++wi) {
        word_syms[wi] = v.word_symbols(word_freq[wi].first);
        for (const auto& s : word_syms[wi])
            if (s != kEndOfWord && std::find(Vocab::special_tokens().begin(), Vocab::special_tokens().end(), s) ==
                                       Vocab::special_tokens().end())
                base_chars.insert(s);
    }
    v.id_to_token_.push_back(kEndOfWord);
    for (const auto& c : base_chars) v.id_to_token_.push_back(c);

    if (target_size < v.size())
        throw std::invalid_argument("build_vocab: target_size " + std::to_string(target_size) +
                                    " below base vocabulary size " + std::to_string(v.size()));

    auto is_special_sym = [](const std::string& s) {
        return std::find(Vocab::special_tokens().begin(), Vocab::special_tokens().end(), s) !=
               Vocab::special_tokens().end();
    };

    while (v.size() < target_size && static_cast<int>(v.merges_.size()) < max_merges) {
        // count adjacent pairs weighted by word frequency
        std::map<std::pair<std::string, std::string>, long> pair_count;
        for (size_t wi = 0; wi < word_syms.size(); ++wi) {
            const auto& syms = word_syms[wi];
            long f = word_freq[wi].second;
            for (size_t i = 0; i + 1 < syms.size(); ++i) {
                if (is_special_sym(syms[i]) || is_special_sym(syms[i + 1])) continue;
                pair_count[{syms[i], syms[i + 1]}] += f;
            }
        }
        // best pair; std::map iteration gives the lexicographically smallest on ties
        std::pair<std::string, std::string> best;
        long best_count = 0;
        for (const auto& [p, c] : pair_count) {
            if (c > best_count) {
                best_count = c;
                best = p;
            }
        }
        if (best_count < 2) break;

        v.merges_.push_back(best);
        v.id_to_token_.push_back(best.first + best.second);
        // apply merge everywhere
        for (auto& syms : word_syms) {
            for (size_t i = 0; i + 1 < syms.size();) {
                if (syms[i] == best.first && syms[i + 1] == best.second) {
                    syms[i] += syms[i + 1];
                    syms.erase(syms.begin() + static_cast<long>(i) + 1);
                } else {
                    ++i;
                }
            }
        }
    }

    v.rebuild_maps();
    return v;
}

void tokenize_corpus(std::vector<ChatLog>& corpus, const Vocab& vocab, int max_tokens) {
    for (auto& chat : corpus) {
        for (auto& u : chat.utterances) {
            u.tokens = vocab.encode(u.text);
            if (max_tokens > 0 && static_cast<int>(u.tokens.size()) > max_tokens)
                u.tokens.resize(static_cast<size_t>(max_tokens));
        }
    }
}

std::string Vocab::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["tokens"] = id_to_token_;
    nlohmann::json jm = nlohmann::json::array();
    for (const auto& [l, r] : merges_) jm.push_back({l, r});
    j["merges"] = jm;
    return j.dump();
}

Vocab Vocab::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    Vocab v;
    v.id_to_token_ = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& jm : j.at("merges"))
        v.merges_.emplace_back(jm.at(0).get<std::string>(), jm.at(1).get<std::string>());
    if (v.size() < num_specials()) throw std::runtime_error("vocab file missing special tokens");
    for (int i = 0; i < num_specials(); ++i)
        if (v.id_to_token_[static_cast<size_t>(i)] != special_tokens()[static_cast<size_t>(i)])
            throw std::runtime_error("vocab file has unexpected special token layout");
    v.rebuild_maps();
    return v;
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocab file: " + path);
    out << to_json() << "\n";
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace rankae
