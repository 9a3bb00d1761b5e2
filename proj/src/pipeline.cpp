#include "rankae/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace rankae {

RankResult rank_with_matrix(const Eigen::MatrixXd& raw_relevance, const RankConfig& cfg) {
    int n = static_cast<int>(raw_relevance.rows());
    RankResult out;
    out.k = compute_k(n, cfg.c, cfg.k_cap);
    out.M = raw_relevance;
    if (cfg.use_distance) out.M = distance_matrix(n, out.k).cwiseProduct(out.M);
    out.selected = select_topic_utterances(out.M, out.k, cfg.eta, cfg.use_diversity);

    // replay the greedy scores for reporting
    Eigen::VectorXd base = local_centrality(out.M);
    if (n > 1) base /= static_cast<double>(n - 1);
    std::vector<int> chosen;
    for (int idx : out.selected) {
        double penalty = 0.0;
        for (size_t s = 0; s < chosen.size(); ++s) {
            double v = out.M(idx, chosen[s]);
            penalty = s == 0 ? v : std::max(penalty, v);
        }
        double score = cfg.use_diversity ? cfg.eta * base(idx) - (1.0 - cfg.eta) * penalty : base(idx);
        out.scores.push_back(score);
        chosen.push_back(idx);
    }
    return out;
}

RankResult rank_chat_neural(const Model& model, const ChatEncoding& ce, const RankConfig& cfg) {
    return rank_with_matrix(relevance_matrix(ce.H, model.enc.bilinear_w->val), cfg);
}

RankResult rank_chat_tfidf(const TfIdfModel& tfidf, const ChatLog& chat, const RankConfig& cfg) {
    return rank_with_matrix(tfidf.similarity_matrix(chat), cfg);
}

namespace {

bool keeps_content(int id) {
    // party markers and structural tokens disappear from rendered summaries;
    // <num>/<url>/<email>/<unk> stay, they carry content
    if (id == Vocab::kNum || id == Vocab::kUrl || id == Vocab::kEmail || id == Vocab::kUnk)
        return true;
    return !(id >= 0 && id < Vocab::num_specials());
}

}  // namespace

ChatSummary assemble_summary(const Model& model, const Vocab& vocab, const ChatLog& chat,
                             const ChatEncoding& ce, const std::vector<int>& selected,
                             const RankConfig& rank_cfg, const SummaryOptions& opts) {
    ChatSummary out;
    out.chat_id = chat.id;
    out.selected = selected;
    // readability: emit segments in chat position order, not selection order
    std::sort(out.selected.begin(), out.selected.end());

    std::vector<int> tokens;
    for (int idx : out.selected) {
        if (opts.extractive) {
            const auto& utt = chat.utterances[static_cast<size_t>(idx)].tokens;
            tokens.insert(tokens.end(), utt.begin(), utt.end());
        } else {
            std::vector<int> decoded =
                compress_segment(model, chat, ce, idx + 1, rank_cfg.c, opts.decode);
            if (decoded.empty()) out.empty_decode = true;
            for (int id : decoded)
                if (keeps_content(id)) tokens.push_back(id);
        }
    }
    if (opts.budget_tokens > 0 && static_cast<int>(tokens.size()) > opts.budget_tokens)
        tokens.resize(static_cast<size_t>(opts.budget_tokens));
    out.summary_tokens = tokens;
    out.text = vocab.decode(tokens);
    return out;
}

void save_predictions(const std::string& path, const std::vector<ChatSummary>& summaries) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write predictions: " + path);
    for (const auto& s : summaries) {
        nlohmann::json j;
        j["chat_id"] = s.chat_id;
        j["summary"] = s.text;
        j["selected"] = s.selected;
        out << j.dump() << "\n";
    }
}

std::map<std::string, std::string> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open predictions: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("chat_id") || !j.contains("summary"))
            throw std::runtime_error("bad prediction record at line " + std::to_string(line_no));
        out[j["chat_id"].get<std::string>()] = j["summary"].get<std::string>();
    }
    return out;
}

Tokens metric_tokens(const std::string& text, const Vocab& vocab, bool use_words) {
    Tokens out;
    if (use_words) {
        for (auto& w : split_ws(text)) out.push_back(w);
        return out;
    }
    for (int id : vocab.encode(text)) out.push_back(vocab.token(id));
    return out;
}

}  // namespace rankae
