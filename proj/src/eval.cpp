#include "rankae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace rankae {

namespace {

std::map<Tokens, int> ngram_counts(const Tokens& toks, int n) {
    std::map<Tokens, int> counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i)
        ++counts[Tokens(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i) + n)];
    return counts;
}

long clipped_overlap(const std::map<Tokens, int>& cand, const std::map<Tokens, int>& ref) {
    long overlap = 0;
    for (const auto& [gram, c] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(c, it->second);
    }
    return overlap;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

long lcs_length(const Tokens& a, const Tokens& b) {
    size_t m = a.size(), n = b.size();
    std::vector<long> prev(n + 1, 0), cur(n + 1, 0);
    for (size_t i = 1; i <= m; ++i) {
        for (size_t j = 1; j <= n; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

}  // namespace

double rouge_n_f(const Tokens& candidate, const Tokens& reference, int n) {
    if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
    if (reference.empty()) throw std::invalid_argument("rouge_n: empty reference");
    auto cg = ngram_counts(candidate, n);
    auto rg = ngram_counts(reference, n);
    long cand_total = 0, ref_total = 0;
    for (const auto& [g, c] : cg) cand_total += c;
    for (const auto& [g, c] : rg) ref_total += c;
    if (cand_total == 0 || ref_total == 0) return 0.0;
    long overlap = clipped_overlap(cg, rg);
    double p = static_cast<double>(overlap) / static_cast<double>(cand_total);
    double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
    return f1(p, r);
}

double rouge_l_f(const Tokens& candidate, const Tokens& reference) {
    if (reference.empty()) throw std::invalid_argument("rouge_l: empty reference");
    if (candidate.empty()) return 0.0;
    long lcs = lcs_length(candidate, reference);
    double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    return f1(p, r);
}

double bleu(const Tokens& candidate, const Tokens& reference, int max_n) {
    if (reference.empty()) throw std::invalid_argument("bleu: empty reference");
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        auto cg = ngram_counts(candidate, n);
        auto rg = ngram_counts(reference, n);
        long cand_total = 0;
        for (const auto& [g, c] : cg) cand_total += c;
        long overlap = clipped_overlap(cg, rg);
        double p;
        if (n == 1) {
            if (overlap == 0) return 0.0;
            p = static_cast<double>(overlap) / static_cast<double>(cand_total);
        } else {
            // +1 smoothing keeps higher-order precisions defined
            p = (static_cast<double>(overlap) + 1.0) / (static_cast<double>(cand_total) + 1.0);
        }
        log_sum += std::log(p);
    }
    double score = std::exp(log_sum / static_cast<double>(max_n));
    if (candidate.size() < reference.size())
        score *= std::exp(1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size()));
    return score;
}

MetricReport evaluate_corpus(const std::map<std::string, Tokens>& candidates,
                             const std::map<std::string, Tokens>& references) {
    MetricReport rep;
    for (const auto& [id, ref] : references) {
        if (ref.empty()) continue;
        auto it = candidates.find(id);
        Tokens cand = it == candidates.end() ? Tokens{} : it->second;
        MetricReport::Row row{id, 0, 0, 0, 0, 0};
        if (cand.empty()) {
            ++rep.empty_candidates;
        } else {
            row.rouge1 = rouge_n_f(cand, ref, 1);
            row.rouge2 = rouge_n_f(cand, ref, 2);
            row.rougeL = rouge_l_f(cand, ref);
            row.bleu = bleu(cand, ref);
            row.len_ratio = static_cast<double>(cand.size()) / static_cast<double>(ref.size());
        }
        rep.rouge1_f += row.rouge1;
        rep.rouge2_f += row.rouge2;
        rep.rougeL_f += row.rougeL;
        rep.bleu_score += row.bleu;
        rep.length_ratio += row.len_ratio;
        rep.per_chat.push_back(std::move(row));
        ++rep.num_chats;
    }
    if (rep.num_chats > 0) {
        rep.rouge1_f /= rep.num_chats;
        rep.rouge2_f /= rep.num_chats;
        rep.rougeL_f /= rep.num_chats;
        rep.bleu_score /= rep.num_chats;
        rep.length_ratio /= rep.num_chats;
    }
    return rep;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["rouge1_f"] = rouge1_f;
    j["rouge2_f"] = rouge2_f;
    j["rougeL_f"] = rougeL_f;
    j["bleu"] = bleu_score;
    j["length_ratio"] = length_ratio;
    j["num_chats"] = num_chats;
    j["empty_candidates"] = empty_candidates;
    j["per_chat"] = nlohmann::json::array();
    for (const auto& r : per_chat)
        j["per_chat"].push_back({{"chat_id", r.chat_id},
                                 {"rouge1", r.rouge1},
                                 {"rouge2", r.rouge2},
                                 {"rougeL", r.rougeL},
                                 {"bleu", r.bleu},
                                 {"length_ratio", r.len_ratio}});
    return j.dump(2);
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s %8s\n", "", "RG-1", "RG-2", "RG-L",
                  "BLEU", "L-Rto");
    os << line;
    std::snprintf(line, sizeof(line), "%-12s %8.2f %8.2f %8.2f %8.2f %8.2f\n", "corpus-avg",
                  100.0 * rouge1_f, 100.0 * rouge2_f, 100.0 * rougeL_f, 100.0 * bleu_score,
                  length_ratio);
    os << line;
    return os.str();
}

std::vector<std::string> lead_baseline(const std::vector<Tokens>& utterances, int budget_tokens) {
    Tokens out;
    for (const auto& u : utterances) {
        for (const auto& tok : u) {
            if (static_cast<int>(out.size()) >= budget_tokens) return out;
            out.push_back(tok);
        }
    }
    return out;
}

std::vector<int> oracle_baseline(const std::vector<Tokens>& utterances, const Tokens& gold,
                                 int budget_tokens) {
    if (gold.empty()) throw std::invalid_argument("oracle_baseline: gold summary required");
    std::vector<int> selected;
    std::vector<bool> used(utterances.size(), false);
    double best_score = 0.0;
    long current_len = 0;

    auto score_of = [&](const std::vector<int>& picks) {
        // summary is the picked utterances in chat order
        std::vector<int> ordered = picks;
        std::sort(ordered.begin(), ordered.end());
        Tokens summary;
        for (int i : ordered)
            summary.insert(summary.end(), utterances[static_cast<size_t>(i)].begin(),
                           utterances[static_cast<size_t>(i)].end());
        if (summary.empty()) return 0.0;
        return rouge_n_f(summary, gold, 1) + rouge_n_f(summary, gold, 2);
    };

    while (true) {
        int best_i = -1;
        double best_gain_score = best_score;
        for (size_t i = 0; i < utterances.size(); ++i) {
            if (used[i]) continue;
            long len = static_cast<long>(utterances[i].size());
            if (current_len + len > budget_tokens) continue;
            std::vector<int> trial = selected;
            trial.push_back(static_cast<int>(i));
            double s = score_of(trial);
            if (s > best_gain_score) {
                best_gain_score = s;
                best_i = static_cast<int>(i);
            }
        }
        if (best_i < 0) break;
        selected.push_back(best_i);
        used[static_cast<size_t>(best_i)] = true;
        best_score = best_gain_score;
        current_len += static_cast<long>(utterances[static_cast<size_t>(best_i)].size());
    }
    return selected;
}

}  // namespace rankae
