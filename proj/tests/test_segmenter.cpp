#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rankae/segmenter.hpp"

using namespace rankae;

namespace {

ChatLog make_chat(int n, int min_tokens, int max_tokens, uint64_t seed) {
    Rng rng(seed);
    ChatLog chat;
    chat.id = "noise-fixture";
    for (int i = 0; i < n; ++i) {
        Utterance u;
        u.party = i % 2;
        u.position = i + 1;
        int len = rng.uniform_int(min_tokens, max_tokens);
        for (int t = 0; t < len; ++t)
            u.tokens.push_back(rng.uniform_int(Vocab::num_specials(), 99));
        chat.utterances.push_back(u);
    }
    return chat;
}

}  // namespace

TEST_CASE("build_segment clips the window at chat bounds") {
    ChatLog chat = make_chat(9, 4, 8, 1);

    ChatSegment left = build_segment(chat, 1, 1);
    CHECK(left.members == std::vector<int>{1, 2});

    ChatSegment mid = build_segment(chat, 5, 1);
    CHECK(mid.members == std::vector<int>{4, 5, 6});
    CHECK(mid.center == 5);

    ChatSegment degenerate = build_segment(chat, 3, 0);
    CHECK(degenerate.members == std::vector<int>{3});

    CHECK_THROWS_AS(build_segment(chat, 0, 1), std::out_of_range);
    CHECK_THROWS_AS(build_segment(chat, 10, 1), std::out_of_range);
}

TEST_CASE("noise probability vector is validated") {
    ChatLog chat = make_chat(5, 4, 8, 2);
    ChatSegment seg = build_segment(chat, 3, 1);
    Rng rng(3);
    NoiseProbs bad;
    bad.p_insert = 0.5;
    bad.p_replace = 0.2;
    bad.p_retain = 0.2;
    CHECK_THROWS_AS(add_noise(seg, chat, bad, rng), std::invalid_argument);
}

TEST_CASE("pure retention and pure replacement degenerate correctly") {
    ChatLog chat = make_chat(6, 4, 8, 4);
    ChatSegment seg = build_segment(chat, 3, 1);
    Rng rng(5);

    SUBCASE("p_retain = 1 keeps everything") {
        NoiseProbs p{0.0, 0.0, 1.0, 0.4, 0.6};
        SegmentPair pair = add_noise(seg, chat, p, rng);
        CHECK_FALSE(pair.degenerate);
        for (const auto& m : pair.members) {
            CHECK((m.op == NoiseOp::Retain));
            CHECK(m.noisy_tokens == m.original_tokens);
            CHECK(m.in_target);
        }
        CHECK(serialize_target(pair) == serialize_segment(chat, seg));
    }

    SUBCASE("p_replace = 1 empties the target and flags the pair") {
        NoiseProbs p{0.0, 1.0, 0.0, 0.4, 0.6};
        SegmentPair pair = add_noise(seg, chat, p, rng);
        CHECK(pair.degenerate);
        for (const auto& m : pair.members) {
            CHECK((m.op == NoiseOp::Replace));
            CHECK_FALSE(m.in_target);
            CHECK(m.replace_donor != m.position);
            CHECK(m.noisy_tokens == chat.at_pos(m.replace_donor).tokens);
        }
        CHECK(pair.target_positions().empty());
    }
}

TEST_CASE("insertion growth lands inside the ratio band") {
    ChatLog chat = make_chat(8, 5, 20, 6);
    NoiseProbs p;  // defaults 0.7 / 0.2 / 0.1, ratio [0.4, 0.6]
    Rng rng(7);
    int insertions = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        int center = rng.uniform_int(1, chat.size());
        SegmentPair pair = add_noise(build_segment(chat, center, 1), chat, p, rng);
        for (const auto& m : pair.members) {
            if (m.op != NoiseOp::Insert) continue;
            ++insertions;
            long old_len = static_cast<long>(m.original_tokens.size());
            long new_len = static_cast<long>(m.noisy_tokens.size());
            long grown = new_len - old_len;
            // one token of slack covers integer rounding of the ratio target
            CHECK(grown >= std::lround(p.ratio_lo * static_cast<double>(old_len)) - 1);
            CHECK(grown <= std::lround(p.ratio_hi * static_cast<double>(old_len)) + 1);
        }
    }
    CHECK(insertions > 1000);
}

TEST_CASE("option frequencies match the probability vector") {
    ChatLog chat = make_chat(8, 5, 12, 8);
    NoiseProbs p;
    Rng rng(9);
    long counts[3] = {0, 0, 0};
    long total = 0;
    for (int trial = 0; trial < 12000; ++trial) {
        int center = rng.uniform_int(1, chat.size());
        SegmentPair pair = add_noise(build_segment(chat, center, 1), chat, p, rng);
        for (const auto& m : pair.members) {
            ++counts[static_cast<int>(m.op)];
            ++total;
        }
    }
    CHECK(std::abs(static_cast<double>(counts[0]) / total - 0.7) < 0.01);
    CHECK(std::abs(static_cast<double>(counts[1]) / total - 0.2) < 0.01);
    CHECK(std::abs(static_cast<double>(counts[2]) / total - 0.1) < 0.01);
}

TEST_CASE("replacement hits at least one member at the 0.488 rate") {
    // 3-member segments with p_replace = 0.2: P(>=1 replaced) = 1 - 0.8^3
    ChatLog chat = make_chat(9, 5, 12, 10);
    NoiseProbs p;
    Rng rng(11);
    int hit = 0, n = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        SegmentPair pair = add_noise(build_segment(chat, 5, 1), chat, p, rng);
        REQUIRE(pair.members.size() == 3);
        bool any = false;
        for (const auto& m : pair.members) any |= (m.op == NoiseOp::Replace);
        hit += any ? 1 : 0;
        ++n;
    }
    double frac = static_cast<double>(hit) / n;
    CHECK(std::abs(frac - 0.488) < 0.02);
}

TEST_CASE("target keeps only untouched original tokens") {
    ChatLog chat = make_chat(7, 5, 15, 12);
    NoiseProbs p;
    Rng rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        int center = rng.uniform_int(1, chat.size());
        SegmentPair pair = add_noise(build_segment(chat, center, 1), chat, p, rng);
        for (const auto& m : pair.members) {
            // target side always carries the utterance exactly as it is in the chat
            CHECK(m.original_tokens == chat.at_pos(m.position).tokens);
            if (m.op == NoiseOp::Replace) CHECK_FALSE(m.in_target);
            if (m.op != NoiseOp::Replace) CHECK(m.in_target);
            if (m.op == NoiseOp::Insert) {
                CHECK(m.noisy_tokens.size() >= m.original_tokens.size());
                CHECK((!m.inserted.empty() || m.noisy_tokens == m.original_tokens));
            }
        }
        std::vector<int> target = serialize_target(pair);
        CHECK(target.back() == Vocab::kEos);
    }
}

TEST_CASE("same seed replays byte-identical pairs") {
    ChatLog chat = make_chat(8, 5, 12, 14);
    NoiseProbs p;
    for (uint64_t seed : {1ULL, 99ULL, 31337ULL}) {
        Rng r1(seed), r2(seed);
        for (int center = 1; center <= chat.size(); ++center) {
            SegmentPair a = add_noise(build_segment(chat, center, 1), chat, p, r1);
            SegmentPair b = add_noise(build_segment(chat, center, 1), chat, p, r2);
            REQUIRE(a.members.size() == b.members.size());
            for (size_t i = 0; i < a.members.size(); ++i) {
                CHECK((a.members[i].op == b.members[i].op));
                CHECK(a.members[i].noisy_tokens == b.members[i].noisy_tokens);
                CHECK(a.members[i].in_target == b.members[i].in_target);
            }
        }
    }
}

TEST_CASE("singleton chat forces retention with a warning") {
    ChatLog chat = make_chat(1, 5, 8, 15);
    NoiseProbs p;  // insertion-heavy defaults
    Rng rng(16);
    bool warned = false;
    for (int trial = 0; trial < 50; ++trial) {
        SegmentPair pair = add_noise(build_segment(chat, 1, 1), chat, p, rng);
        REQUIRE(pair.members.size() == 1);
        CHECK((pair.members[0].op == NoiseOp::Retain));
        warned |= pair.singleton_warning;
    }
    CHECK(warned);
}

TEST_CASE("serialization layout: party marker, tokens, sep, eos") {
    ChatLog chat;
    chat.id = "layout";
    Utterance a, b;
    a.party = 0;
    a.tokens = {40, 41};
    a.position = 1;
    b.party = 1;
    b.tokens = {50};
    b.position = 2;
    chat.utterances = {a, b};

    std::vector<int> ids = serialize_segment(chat, build_segment(chat, 1, 1));
    std::vector<int> want = {Vocab::party_id(0), 40, 41, Vocab::kSep,
                             Vocab::party_id(1), 50, Vocab::kSep, Vocab::kEos};
    CHECK(ids == want);
}
