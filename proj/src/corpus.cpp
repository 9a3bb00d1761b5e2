#include "rankae/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rankae {

namespace {

const std::regex kUrlRe(R"((https?://|www\.)[^\s]+)");
const std::regex kEmailRe(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
const std::regex kNumberRe(R"([0-9]+([.,][0-9]+)*)");

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string normalize_text(const std::string& raw, const NormalizeOptions& opts) {
    if (raw.empty()) return "";
    // pad the replacement tokens with spaces so they always stand alone as
    // words; the tokenizer relies on that to keep them atomic
    std::string s = std::regex_replace(raw, kUrlRe, " <url> ");
    s = std::regex_replace(s, kEmailRe, " <email> ");
    s = std::regex_replace(s, kNumberRe, " <num> ");

    std::set<std::string> fillers;
    for (const auto& f : opts.filler_words) fillers.insert(lower(f));

    std::vector<std::string> kept;
    for (const auto& w : split_ws(s)) {
        if (fillers.count(lower(w))) continue;
        kept.push_back(w);
    }
    return join(kept, " ");
}

ChatLog truncate_chat(const ChatLog& chat, int max_utts, int max_tokens) {
    if (max_utts < 1 || max_tokens < 1) throw std::invalid_argument("truncate_chat: limits must be >= 1");
    ChatLog out;
    out.id = chat.id;
    int n = std::min<int>(chat.size(), max_utts);
    out.utterances.assign(chat.utterances.begin(), chat.utterances.begin() + n);
    for (int i = 0; i < n; ++i) {
        auto& u = out.utterances[static_cast<size_t>(i)];
        if (static_cast<int>(u.tokens.size()) > max_tokens) u.tokens.resize(static_cast<size_t>(max_tokens));
        u.position = i + 1;
    }
    return out;
}

std::vector<ChatLog> load_chat_logs(const std::string& path, GoldMap* golds, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file: " + path);

    std::vector<ChatLog> chats;
    std::set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw CorpusError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
            throw CorpusError("line " + std::to_string(line_no) + ": missing or invalid \"id\"");
        if (!j.contains("utterances") || !j["utterances"].is_array())
            throw CorpusError("line " + std::to_string(line_no) + ": missing or invalid \"utterances\"");

        ChatLog chat;
        chat.id = j["id"].get<std::string>();
        if (!seen_ids.insert(chat.id).second)
            throw CorpusError("line " + std::to_string(line_no) + ": duplicate chat id \"" + chat.id + "\"");

        for (const auto& ju : j["utterances"]) {
            if (!ju.is_object() || !ju.contains("party") || !ju["party"].is_number_integer() ||
                !ju.contains("text") || !ju["text"].is_string())
                throw CorpusError("line " + std::to_string(line_no) + ": bad utterance record");
            Utterance u;
            u.party = ju["party"].get<int>();
            if (u.party < 0) throw CorpusError("line " + std::to_string(line_no) + ": negative party id");
            u.text = ju["text"].get<std::string>();
            if (opts.do_normalize) u.text = normalize_text(u.text, opts.normalize);
            u.position = static_cast<int>(chat.utterances.size()) + 1;
            chat.utterances.push_back(std::move(u));
        }
        if (chat.utterances.empty())
            throw CorpusError("line " + std::to_string(line_no) + ": chat has no utterances");

        if (golds && j.contains("gold") && j["gold"].is_string()) {
            std::string g = j["gold"].get<std::string>();
            if (!g.empty()) (*golds)[chat.id] = g;
        }
        chats.push_back(truncate_chat(chat, opts.max_utterances, opts.max_tokens));
    }
    return chats;
}

void save_chat_logs(const std::string& path, const std::vector<ChatLog>& chats, const GoldMap* golds) {
    std::ofstream out(path);
    if (!out) throw CorpusError("cannot open file for writing: " + path);
    for (const auto& chat : chats) {
        nlohmann::json j;
        j["id"] = chat.id;
        j["utterances"] = nlohmann::json::array();
        for (const auto& u : chat.utterances)
            j["utterances"].push_back({{"party", u.party}, {"text", u.text}});
        if (golds) {
            auto it = golds->find(chat.id);
            if (it != golds->end())
                j["gold"] = it->second;
            else
                j["gold"] = nullptr;
        }
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

struct TopicTemplate {
    const char* name;
    // opener (party 0), answer (party 1), then follow-ups with alternating parties
    std::vector<const char*> openers;
    std::vector<const char*> answers;
    std::vector<const char*> followups;
    const char* canonical;  // gold sentence; {item} slot filled per chat
};

// Small customer-service topic library. Every utterance of a topic carries
// that topic's keyword so co-occurrence statistics are learnable, and the
// keywords do not cross topic boundaries. Slots ({item}, {color}, {adj},
// {place}) are filled per chat, so surface forms rarely repeat across the
// corpus; lengths vary so the compressor sees a spread of segment sizes.
const std::vector<TopicTemplate>& topic_library() {
    static const std::vector<TopicTemplate> lib = {
        {"price",
         {"how much is the {adj} {item} price", "what is the price of the {color} {item} please"},
         {"the price is <num> yuan excluding tax",
          "the {color} {item} price is <num> yuan with tax included"},
         {"can you lower the {item} price a little", "the {item} price is final today",
          "that price sounds fair for the {adj} {item}"},
         "the price of the {color} {item} is <num> yuan"},
        {"shipping",
         {"when will my order start shipping to {place}",
          "could you arrange shipping for the {item} today"},
         {"shipping to {place} starts tomorrow from the warehouse",
          "shipping takes <num> days after payment"},
         {"shipping to {place} usually takes <num> days",
          "please hurry the shipping to {place} i need it soon",
          "we will mark your shipping to {place} as urgent"},
         "shipping to {place} starts tomorrow and takes <num> days"},
        {"size",
         {"do you have the {adj} {item} in size <num>",
          "which size of the {item} fits a height of <num> cm"},
         {"size <num> fits a height of <num> cm", "the size chart is on the {item} page"},
         {"i usually wear size <num> in a {item}", "then size <num> of the {item} should fit fine"},
         "size <num> of the {item} fits height <num> cm"},
        {"color",
         {"what color does the {adj} {item} come in", "is the {color} color of the {item} available"},
         {"only the {color} color is available right now", "we have the {color} color in the shop"},
         {"the {color} color works for me", "the {color} color looks great in person"},
         "the {item} is available in {color} color"},
        {"refund",
         {"i want to return the {color} {item} for a refund", "how do i get a refund for this order"},
         {"the refund will be processed within <num> days after we receive the return",
          "you can apply for the refund in your order page"},
         {"does the refund for this order include the delivery fee",
          "the refund covers the full amount of the order"},
         "the refund for the {item} takes <num> days"},
        {"material",
         {"what material is the {adj} {item} made of", "is the material of the {item} soft"},
         {"the {item} is made of pure cotton material", "it is a cotton and linen material blend"},
         {"cotton material is what i wanted for the {item}",
          "the {item} material feels {adj} and breathable"},
         "the {item} is made of cotton material"},
        {"stock",
         {"is the {color} {item} still in stock", "do you have stock of the {item} right now"},
         {"yes the {adj} {item} is in stock and ready to go", "only a few pieces are left in stock"},
         {"great please reserve one {item} from the stock for me",
          "the {item} stock updates every morning"},
         "the {color} {item} is in stock"},
        {"warranty",
         {"how long is the warranty on the {item}", "does the {adj} {item} come with a warranty"},
         {"the warranty covers <num> months of normal use",
          "it has a <num> month warranty from purchase"},
         {"does the {item} warranty cover accidental damage",
          "the {item} warranty covers manufacturing defects only"},
         "the warranty lasts <num> months"},
        {"invoice",
         {"can you issue an invoice for my order", "i need an invoice for reimbursement"},
         {"the invoice will be sent to your email <email>",
          "we provide an electronic invoice by default"},
         {"please write the company name on the invoice for my order",
          "the invoice for the order arrives in {place} within <num> days"},
         "the invoice will be sent by email"},
        {"discount",
         {"is there a discount with the coupon", "can i use a coupon on the {color} {item}"},
         {"the coupon gives a discount of <num> on orders over <num>",
          "new customers get a coupon discount"},
         {"where do i claim the coupon discount for the {item}",
          "the coupon discount is on the shop front page"},
         "the coupon gives a discount of <num>"},
    };
    return lib;
}

struct SlotFillers {
    std::string item, color, adj, place;
};

const std::vector<std::string>& item_names() {
    static const std::vector<std::string> items = {
        "skirt",  "jacket", "kettle",  "backpack", "teapot", "lamp",
        "wallet", "scarf",  "blanket", "umbrella", "mirror", "notebook"};
    return items;
}

const std::vector<std::string>& color_names() {
    static const std::vector<std::string> v = {"red", "blue", "black", "white", "green", "pink"};
    return v;
}

const std::vector<std::string>& adj_names() {
    static const std::vector<std::string> v = {"nice", "new", "small", "large", "light", "soft"};
    return v;
}

const std::vector<std::string>& place_names() {
    static const std::vector<std::string> v = {"beijing", "shanghai", "hangzhou", "chengdu", "suzhou"};
    return v;
}

std::string fill_slots(const std::string& tmpl, const SlotFillers& f) {
    std::string out = tmpl;
    auto sub = [&out](const std::string& key, const std::string& value) {
        size_t pos;
        while ((pos = out.find(key)) != std::string::npos) out.replace(pos, key.size(), value);
    };
    sub("{item}", f.item);
    sub("{color}", f.color);
    sub("{adj}", f.adj);
    sub("{place}", f.place);
    return out;
}

}  // namespace

SynthCorpus generate_synthetic_corpus(const SynthConfig& cfg, uint64_t seed) {
    SynthCorpus corpus;
    if (cfg.num_chats <= 0) return corpus;
    if (cfg.min_topics < 1 || cfg.max_topics < cfg.min_topics ||
        cfg.min_utts_per_topic < 1 || cfg.max_utts_per_topic < cfg.min_utts_per_topic)
        throw std::invalid_argument("generate_synthetic_corpus: bad config ranges");

    Rng root(seed);
    const auto& lib = topic_library();

    for (int ci = 0; ci < cfg.num_chats; ++ci) {
        Rng rng = root.fork(static_cast<uint64_t>(ci));
        ChatLog chat;
        chat.id = "synth-" + std::to_string(ci);
        auto pick = [&rng](const std::vector<std::string>& pool) {
            return pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
        };
        const SlotFillers fillers{pick(item_names()), pick(color_names()), pick(adj_names()),
                                  pick(place_names())};

        int n_topics = rng.uniform_int(cfg.min_topics, std::min<int>(cfg.max_topics, static_cast<int>(lib.size())));
        std::vector<int> topic_ids = rng.sample_distinct(static_cast<int>(lib.size()), n_topics);

        std::vector<int> labels;
        std::vector<std::string> gold_sentences;
        for (int bi = 0; bi < n_topics; ++bi) {
            const TopicTemplate& t = lib[static_cast<size_t>(topic_ids[static_cast<size_t>(bi)])];
            int n_utts = rng.uniform_int(cfg.min_utts_per_topic, cfg.max_utts_per_topic);

            std::vector<std::pair<int, std::string>> block;
            block.emplace_back(0, t.openers[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(t.openers.size()) - 1))]);
            if (n_utts >= 2)
                block.emplace_back(1, t.answers[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(t.answers.size()) - 1))]);
            std::vector<int> follow_order = rng.sample_distinct(static_cast<int>(t.followups.size()),
                                                                static_cast<int>(t.followups.size()));
            for (int ui = 2; ui < n_utts; ++ui) {
                const char* f = t.followups[static_cast<size_t>(follow_order[static_cast<size_t>((ui - 2) % follow_order.size())])];
                block.emplace_back(ui % 2, f);
            }
            for (auto& [party, text] : block) {
                Utterance u;
                u.party = party;
                u.text = fill_slots(text, fillers);
                u.position = static_cast<int>(chat.utterances.size()) + 1;
                chat.utterances.push_back(std::move(u));
                labels.push_back(bi);
            }
            gold_sentences.push_back(fill_slots(t.canonical, fillers));
        }

        if (cfg.shuffle_blocks) {
            // Fisher-Yates over the whole chat; labels move with their utterance
            for (int i = chat.size() - 1; i > 0; --i) {
                int j = rng.uniform_int(0, i);
                std::swap(chat.utterances[static_cast<size_t>(i)], chat.utterances[static_cast<size_t>(j)]);
                std::swap(labels[static_cast<size_t>(i)], labels[static_cast<size_t>(j)]);
            }
            for (int i = 0; i < chat.size(); ++i) chat.utterances[static_cast<size_t>(i)].position = i + 1;
        }

        corpus.golds[chat.id] = join(gold_sentences, " ");
        corpus.chats.push_back(std::move(chat));
        corpus.block_labels.push_back(std::move(labels));
    }
    return corpus;
}

}  // namespace rankae
