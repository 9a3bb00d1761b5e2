#include "rankae/segmenter.hpp"

#include <algorithm>
#include <cmath>

namespace rankae {

ChatSegment build_segment(const ChatLog& chat, int center, int c) {
    int n = chat.size();
    if (center < 1 || center > n)
        throw std::out_of_range("build_segment: center " + std::to_string(center) +
                                " outside chat of length " + std::to_string(n));
    if (c < 0) throw std::invalid_argument("build_segment: window size must be >= 0");
    ChatSegment seg;
    seg.chat_id = chat.id;
    seg.center = center;
    for (int p = std::max(1, center - c); p <= std::min(n, center + c); ++p) seg.members.push_back(p);
    return seg;
}

void NoiseProbs::validate() const {
    double sum = p_insert + p_replace + p_retain;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("noise probabilities must sum to 1, got " + std::to_string(sum));
    if (p_insert < 0 || p_replace < 0 || p_retain < 0)
        throw std::invalid_argument("noise probabilities must be non-negative");
    if (ratio_lo < 0 || ratio_hi < ratio_lo)
        throw std::invalid_argument("bad insertion ratio range");
}

namespace {

constexpr int kMaxSpanTokens = 5;

// grow `tokens` with contiguous spans from donor utterances until the length
// target is met exactly; the last span is trimmed to land on target_len
void insert_fragments(std::vector<int>& tokens, std::vector<InsertedSpan>& log, const ChatLog& chat,
                      int self_pos, long target_len, Rng& rng) {
    std::vector<int> donor_pool;
    for (int p = 1; p <= chat.size(); ++p)
        if (p != self_pos && !chat.at_pos(p).tokens.empty()) donor_pool.push_back(p);
    if (donor_pool.empty()) return;

    // donors cycle without replacement within one insertion pass
    std::vector<int> order = rng.sample_distinct(static_cast<int>(donor_pool.size()),
                                                 static_cast<int>(donor_pool.size()));
    size_t cursor = 0;
    while (static_cast<long>(tokens.size()) < target_len) {
        if (cursor == order.size()) {
            order = rng.sample_distinct(static_cast<int>(donor_pool.size()),
                                        static_cast<int>(donor_pool.size()));
            cursor = 0;
        }
        int donor_pos = donor_pool[static_cast<size_t>(order[cursor++])];
        const auto& donor = chat.at_pos(donor_pos).tokens;
        int span_len = rng.uniform_int(1, std::min<int>(kMaxSpanTokens, static_cast<int>(donor.size())));
        span_len = static_cast<int>(
            std::min<long>(span_len, target_len - static_cast<long>(tokens.size())));
        int from = rng.uniform_int(0, static_cast<int>(donor.size()) - span_len);
        int at = rng.uniform_int(0, static_cast<int>(tokens.size()));
        tokens.insert(tokens.begin() + at, donor.begin() + from, donor.begin() + from + span_len);
        log.push_back({donor_pos, from, span_len, at});
    }
}

}  // namespace

SegmentPair add_noise(const ChatSegment& seg, const ChatLog& chat, const NoiseProbs& probs, Rng& rng) {
    probs.validate();
    SegmentPair pair;
    pair.chat_id = seg.chat_id;
    pair.center = seg.center;
    bool singleton = chat.size() < 2;

    for (int pos : seg.members) {
        const Utterance& u = chat.at_pos(pos);
        NoisyMember m;
        m.position = pos;
        m.party = u.party;
        m.original_tokens = u.tokens;
        m.noisy_tokens = u.tokens;

        int opt = rng.categorical({probs.p_insert, probs.p_replace, probs.p_retain});
        if (singleton && opt != 2) {
            // no donors available; retention is the only option
            opt = 2;
            pair.singleton_warning = true;
        }
        switch (opt) {
            case 0: {
                m.op = NoiseOp::Insert;
                double ratio = rng.uniform_real(probs.ratio_lo, probs.ratio_hi);
                long old_len = static_cast<long>(u.tokens.size());
                long target_len = std::lround(static_cast<double>(old_len) * (1.0 + ratio));
                insert_fragments(m.noisy_tokens, m.inserted, chat, pos, target_len, rng);
                break;
            }
            case 1: {
                m.op = NoiseOp::Replace;
                int donor = pos;
                while (donor == pos) donor = rng.uniform_int(1, chat.size());
                m.replace_donor = donor;
                m.noisy_tokens = chat.at_pos(donor).tokens;
                m.in_target = false;
                break;
            }
            default:
                m.op = NoiseOp::Retain;
                break;
        }
        pair.members.push_back(std::move(m));
    }

    pair.degenerate = true;
    for (const auto& m : pair.members)
        if (m.in_target) pair.degenerate = false;
    return pair;
}

std::vector<int> SegmentPair::target_positions() const {
    std::vector<int> out;
    for (const auto& m : members)
        if (m.in_target) out.push_back(m.position);
    return out;
}

std::vector<int> serialize_target(const SegmentPair& pair) {
    std::vector<int> ids;
    for (const auto& m : pair.members) {
        if (!m.in_target) continue;
        ids.push_back(Vocab::party_id(m.party));
        ids.insert(ids.end(), m.original_tokens.begin(), m.original_tokens.end());
        ids.push_back(Vocab::kSep);
    }
    ids.push_back(Vocab::kEos);
    return ids;
}

std::vector<int> serialize_segment(const ChatLog& chat, const ChatSegment& seg) {
    std::vector<int> ids;
    for (int pos : seg.members) {
        const Utterance& u = chat.at_pos(pos);
        ids.push_back(Vocab::party_id(u.party));
        ids.insert(ids.end(), u.tokens.begin(), u.tokens.end());
        ids.push_back(Vocab::kSep);
    }
    ids.push_back(Vocab::kEos);
    return ids;
}

}  // namespace rankae
