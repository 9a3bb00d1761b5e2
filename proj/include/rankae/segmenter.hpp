#pragma once

#include "rankae/corpus.hpp"
#include "rankae/vocab.hpp"

namespace rankae {

// Window of 2c+1 utterances (clipped at chat bounds) around a center.
struct ChatSegment {
    std::string chat_id;
    int center = 0;            // 1-based position
    std::vector<int> members;  // 1-based positions, ordered, contains center
};

ChatSegment build_segment(const ChatLog& chat, int center, int c);

enum class NoiseOp { Insert, Replace, Retain };

struct NoiseProbs {
    double p_insert = 0.7;
    double p_replace = 0.2;
    double p_retain = 0.1;
    double ratio_lo = 0.4;
    double ratio_hi = 0.6;

    void validate() const;
};

struct InsertedSpan {
    int donor_pos;   // 1-based utterance position the fragment came from
    int donor_from;  // token offset in the donor
    int length;
    int insert_at;   // token offset in the receiving utterance before insertion
};

struct NoisyMember {
    int position = 0;  // 1-based position in the chat
    int party = 0;
    NoiseOp op = NoiseOp::Retain;
    std::vector<int> noisy_tokens;     // what the pseudo segment carries
    std::vector<int> original_tokens;  // what the target keeps (when kept)
    bool in_target = true;             // false when the utterance was replaced
    int replace_donor = -1;            // donor position for Replace
    std::vector<InsertedSpan> inserted;
};

struct SegmentPair {
    std::string chat_id;
    int center = 0;
    std::vector<NoisyMember> members;
    bool degenerate = false;       // every member replaced: no training target
    bool singleton_warning = false;  // chat too small for donors, retention forced

    std::vector<int> target_positions() const;
};

// Per member utterance, draw one of {fragments insertion, utterance
// replacement, content retention}. Inserted fragments are contiguous token
// spans from other utterances of the same chat; an insertion grows the
// utterance by a factor drawn from [ratio_lo, ratio_hi]. A replaced utterance
// is dropped from the target side. Deterministic given the rng state.
SegmentPair add_noise(const ChatSegment& seg, const ChatLog& chat, const NoiseProbs& probs, Rng& rng);

// party marker + utterance tokens + SEP per member, EOS-terminated
std::vector<int> serialize_target(const SegmentPair& pair);
std::vector<int> serialize_segment(const ChatLog& chat, const ChatSegment& seg);

}  // namespace rankae
