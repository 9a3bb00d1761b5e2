#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "grad_check.hpp"
#include "rankae/compressor.hpp"
#include "rankae/decode_cache.hpp"

using namespace rankae;
using nn::Graph;
using nn::Mat;
using nn::Var;

namespace {

ChatLog fixture_chat(int n, int tokens_per_utt, int vocab_size, uint64_t seed) {
    Rng rng(seed);
    ChatLog chat;
    chat.id = "fix";
    for (int i = 0; i < n; ++i) {
        Utterance u;
        u.party = i % 2;
        u.position = i + 1;
        for (int t = 0; t < tokens_per_utt; ++t)
            u.tokens.push_back(rng.uniform_int(Vocab::num_specials(), vocab_size - 1));
        chat.utterances.push_back(u);
    }
    return chat;
}

Model tiny_model(int d, int layers, int vocab, uint64_t seed, bool query_positions = true,
                 int query_layers = 1) {
    EncoderConfig ec;
    ec.d = d;
    ec.layers = layers;
    ec.heads = 2;
    ec.ffn = d * 2;
    ec.max_len = 48;
    CompressorConfig cc;
    cc.d = d;
    cc.dec_layers = layers;
    cc.query_layers = query_layers;
    cc.heads = 2;
    cc.ffn = d * 2;
    cc.max_target_len = 96;
    cc.query_positions = query_positions;
    return create_model(ec, cc, vocab, seed);
}

SegmentPair clean_pair(const ChatLog& chat, int center, int c) {
    NoiseProbs retain{0.0, 0.0, 1.0, 0.4, 0.6};
    Rng rng(1);
    return add_noise(build_segment(chat, center, c), chat, retain, rng);
}

}  // namespace

TEST_CASE("zero-layer query encoder is the identity") {
    Model m = tiny_model(8, 1, 30, 5, true, /*query_layers=*/0);
    Graph g(false);
    Mat h = nn::glorot(4, 8, *(new Rng(3)));
    Var H = nn::make_const(h);
    Var Q = encode_queries(g, m.comp, H);
    CHECK((Q->val - h).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("query positions break permutation equivariance") {
    ChatLog chat = fixture_chat(4, 3, 30, 7);
    Mat H = nn::glorot(4, 16, *(new Rng(8)));
    Mat Hperm(4, 16);
    Hperm.row(0) = H.row(2);
    Hperm.row(1) = H.row(0);
    Hperm.row(2) = H.row(3);
    Hperm.row(3) = H.row(1);
    int perm[4] = {2, 0, 3, 1};

    SUBCASE("positions disabled: permuting rows permutes queries") {
        Model m = tiny_model(16, 1, 30, 9, /*query_positions=*/false);
        Graph g(false);
        Var q1 = encode_queries(g, m.comp, nn::make_const(H));
        Var q2 = encode_queries(g, m.comp, nn::make_const(Hperm));
        for (int r = 0; r < 4; ++r)
            CHECK((q2->val.row(r) - q1->val.row(perm[r])).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("positions enabled: outputs differ") {
        Model m = tiny_model(16, 1, 30, 9, /*query_positions=*/true);
        Graph g(false);
        Var q1 = encode_queries(g, m.comp, nn::make_const(H));
        Var q2 = encode_queries(g, m.comp, nn::make_const(Hperm));
        double max_diff = 0.0;
        for (int r = 0; r < 4; ++r)
            max_diff = std::max(max_diff,
                                (q2->val.row(r) - q1->val.row(perm[r])).cwiseAbs().maxCoeff());
        CHECK(max_diff > 1e-6);
    }

    SUBCASE("single-utterance chat is well defined") {
        Model m = tiny_model(16, 1, 30, 9);
        Graph g(false);
        Var q = encode_queries(g, m.comp, nn::make_const(Mat::Ones(1, 16)));
        CHECK(q->val.rows() == 1);
        CHECK(q->val.allFinite());
    }
}

TEST_CASE("uniform logits give per-token loss ln |V|") {
    int vocab = 30;
    Model m = tiny_model(8, 1, vocab, 11);
    m.comp.out_w->val.setZero();
    m.comp.out_b->val.setZero();

    ChatLog chat = fixture_chat(3, 4, vocab, 12);
    SegmentPair pair = clean_pair(chat, 2, 1);

    Graph g(false);
    Var H = embed_chat(g, m.enc, chat);
    Var Q = encode_queries(g, m.comp, H);
    Var q = g.slice_rows(Q, 1, 1);
    ReconstructionLoss rl = reconstruction_loss(g, m.enc, m.comp, pair, q);
    double per_token = rl.total->val(0, 0) / rl.num_tokens;
    CHECK(per_token == doctest::Approx(std::log(static_cast<double>(vocab))).epsilon(1e-12));
}

TEST_CASE("decoder output rows are proper distributions") {
    Model m = tiny_model(16, 2, 40, 13);
    ChatLog chat = fixture_chat(3, 4, 40, 14);
    SegmentPair pair = clean_pair(chat, 2, 1);
    std::vector<int> target = serialize_target(pair);

    Graph g(false);
    Var H = embed_chat(g, m.enc, chat);
    Var Q = encode_queries(g, m.comp, H);
    Var q = g.slice_rows(Q, 1, 1);

    std::vector<Var> mem_rows;
    for (const auto& mem : pair.members)
        mem_rows.push_back(embed_utterance(g, m.enc, mem.noisy_tokens, mem.party));
    Var memory = g.concat_rows(mem_rows);
    CHECK(memory->val.rows() == 3);  // member count, never token count

    std::vector<Var> rows = {q, g.rows_gather(m.comp.dec_tok_emb,
                                              std::vector<int>(target.begin(), target.end() - 1))};
    Var inputs = g.concat_rows(rows);
    std::vector<int> pos(static_cast<size_t>(inputs->val.rows()));
    for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    inputs = g.add(inputs, g.rows_gather(m.comp.dec_pos, pos));

    Var logits = decoder_forward(g, m.comp, inputs, memory);
    Var probs = g.softmax_rows(logits);
    for (Eigen::Index r = 0; r < probs->val.rows(); ++r)
        CHECK(probs->val.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("causal mask keeps earlier steps independent of later tokens") {
    Model m = tiny_model(16, 2, 40, 15);
    ChatLog chat = fixture_chat(3, 4, 40, 16);
    SegmentPair pair = clean_pair(chat, 2, 1);
    std::vector<int> target = serialize_target(pair);
    REQUIRE(target.size() >= 4);

    auto logits_for = [&](const std::vector<int>& tgt) {
        Graph g(false);
        Var H = embed_chat(g, m.enc, chat);
        Var Q = encode_queries(g, m.comp, H);
        Var q = g.slice_rows(Q, 1, 1);
        std::vector<Var> mem_rows;
        for (const auto& mem : pair.members)
            mem_rows.push_back(embed_utterance(g, m.enc, mem.noisy_tokens, mem.party));
        Var memory = g.concat_rows(mem_rows);
        std::vector<Var> rows = {q, g.rows_gather(m.comp.dec_tok_emb,
                                                  std::vector<int>(tgt.begin(), tgt.end() - 1))};
        Var inputs = g.concat_rows(rows);
        std::vector<int> pos(static_cast<size_t>(inputs->val.rows()));
        for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
        inputs = g.add(inputs, g.rows_gather(m.comp.dec_pos, pos));
        return decoder_forward(g, m.comp, inputs, memory)->val;
    };

    // perturbing target token y_{t+1} feeds decoder slot t+2, so logits at
    // steps <= t+1 stay identical and step t+2 is the first to move
    REQUIRE(target.size() >= 6);
    int t = 2;
    std::vector<int> perturbed = target;
    perturbed[static_cast<size_t>(t) + 1] =
        perturbed[static_cast<size_t>(t) + 1] == 20 ? 21 : 20;
    Mat a = logits_for(target);
    Mat b = logits_for(perturbed);
    for (int r = 0; r <= t + 1; ++r) CHECK((a.row(r) - b.row(r)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.row(t + 2) - b.row(t + 2)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("reconstruction loss gradients match finite differences") {
    // d = 8, vocab = 20 fixture per the gradient-check contract
    int vocab = 20;
    Model m = tiny_model(8, 1, vocab, 17);
    ChatLog chat = fixture_chat(3, 3, vocab, 18);
    NoiseProbs noise;  // default mix exercises insert/replace/retain paths
    Rng noise_rng(19);
    SegmentPair pair = add_noise(build_segment(chat, 2, 1), chat, noise, noise_rng);
    if (pair.degenerate) pair = clean_pair(chat, 2, 1);

    auto forward = [&](Graph& g) {
        Var H = embed_chat(g, m.enc, chat);
        Var Q = encode_queries(g, m.comp, H);
        Var q = g.slice_rows(Q, 1, 1);
        return reconstruction_loss(g, m.enc, m.comp, pair, q).total;
    };
    auto loss = [&] {
        Graph g(false);
        return forward(g)->val(0, 0);
    };
    auto back = [&] {
        Graph g(true);
        g.backward(forward(g));
    };
    auto worst = gradcheck::check_gradients(m.params, loss, back, 2);
    CAPTURE(worst.where);
    CHECK(worst.rel_err < 1e-4);
}

TEST_CASE("target longer than the decoder window truncates with a flag") {
    Model m = tiny_model(8, 1, 40, 20);
    m.comp.cfg.max_target_len = 6;
    CompressorConfig small = m.comp.cfg;
    ChatLog chat = fixture_chat(3, 8, 40, 21);
    SegmentPair pair = clean_pair(chat, 2, 1);
    Graph g(false);
    Var H = embed_chat(g, m.enc, chat);
    Var q = g.slice_rows(H, 1, 1);
    ReconstructionLoss rl = reconstruction_loss(g, m.enc, m.comp, pair, q);
    CHECK(rl.truncated);
    CHECK(rl.num_tokens == small.max_target_len);
}

TEST_CASE("train_joint honors degenerate alpha values") {
    SynthConfig scfg;
    scfg.num_chats = 3;
    scfg.min_topics = 2;
    scfg.max_topics = 2;
    SynthCorpus sc = generate_synthetic_corpus(scfg, 22);
    Vocab vocab = build_vocab(sc.chats, 300);
    tokenize_corpus(sc.chats, vocab, 20);

    TrainConfig tc;
    tc.steps = 4;
    tc.checkpoint_every = 0;
    tc.val_fraction = 0.0;
    tc.lr = 1e-2;

    SUBCASE("alpha = 1 leaves decoder parameters untouched") {
        Model m = tiny_model(8, 1, vocab.size(), 23);
        Mat out_before = m.comp.out_w->val;
        Mat dec_before = m.params.get("dec.l0.ffn.w1")->val;
        tc.alpha = 1.0;
        train_joint(m, sc.chats, tc);
        CHECK((m.comp.out_w->val - out_before).cwiseAbs().maxCoeff() == 0.0);
        CHECK((m.params.get("dec.l0.ffn.w1")->val - dec_before).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("alpha = 0 leaves the bilinear matrix untouched") {
        Model m = tiny_model(8, 1, vocab.size(), 24);
        Mat w_before = m.enc.bilinear_w->val;
        tc.alpha = 0.0;
        train_joint(m, sc.chats, tc);
        CHECK((m.enc.bilinear_w->val - w_before).cwiseAbs().maxCoeff() == 0.0);
        // but the shared encoder still moves through the reconstruction path
        CHECK((m.params.get("enc.tok_emb")->val.cwiseAbs().sum()) > 0.0);
    }
}

TEST_CASE("training loss trends down on an overfit fixture") {
    SynthConfig scfg;
    scfg.num_chats = 4;
    scfg.min_topics = 2;
    scfg.max_topics = 2;
    scfg.min_utts_per_topic = 2;
    scfg.max_utts_per_topic = 2;
    SynthCorpus sc = generate_synthetic_corpus(scfg, 25);
    Vocab vocab = build_vocab(sc.chats, 300);
    tokenize_corpus(sc.chats, vocab, 16);

    Model m = tiny_model(16, 1, vocab.size(), 26);
    TrainConfig tc;
    tc.steps = 500;
    tc.lr = 3e-3;
    tc.checkpoint_every = 0;
    tc.val_fraction = 0.0;
    TrainResult res = train_joint(m, sc.chats, tc);

    // moving-average comparison over the first 500 steps
    auto mean_of = [&](size_t from, size_t to) {
        double s = 0.0;
        for (size_t i = from; i < to; ++i) s += res.loss_history[i];
        return s / static_cast<double>(to - from);
    };
    double early = mean_of(0, 50);
    double late = mean_of(450, 500);
    CAPTURE(early);
    CAPTURE(late);
    CHECK(late < early);
    CHECK(late < 0.75 * early);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    SynthConfig scfg;
    scfg.num_chats = 3;
    scfg.min_topics = 2;
    scfg.max_topics = 2;
    SynthCorpus sc = generate_synthetic_corpus(scfg, 27);
    Vocab vocab = build_vocab(sc.chats, 300);
    tokenize_corpus(sc.chats, vocab, 16);

    TrainConfig tc;
    tc.steps = 40;
    tc.checkpoint_every = 0;
    tc.val_fraction = 0.0;

    Model a = tiny_model(8, 1, vocab.size(), 28);
    Model b = tiny_model(8, 1, vocab.size(), 28);
    train_joint(a, sc.chats, tc);
    train_joint(b, sc.chats, tc);
    for (size_t i = 0; i < a.params.items().size(); ++i) {
        const auto& [name, va] = a.params.items()[i];
        const auto& vb = b.params.items()[i].second;
        CAPTURE(name);
        CHECK((va->val - vb->val).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("beam of one equals greedy argmax decoding") {
    int vocab_size = 40;
    Model m = tiny_model(16, 1, vocab_size, 29);
    ChatLog chat = fixture_chat(5, 4, vocab_size, 30);
    ChatEncoding ce = encode_chat_for_inference(m, chat);

    DecodeOptions opts;
    opts.beam = 1;
    opts.max_len = 12;
    std::vector<int> beam1 = compress_segment(m, chat, ce, 3, 1, opts);

    // independent greedy loop
    ChatSegment seg = build_segment(chat, 3, 1);
    Mat memory(static_cast<Eigen::Index>(seg.members.size()), ce.H.cols());
    for (size_t i = 0; i < seg.members.size(); ++i)
        memory.row(static_cast<Eigen::Index>(i)) = ce.H.row(seg.members[i] - 1);
    std::vector<int> greedy;
    for (int t = 0; t < 12; ++t) {
        Graph g(false);
        std::vector<Var> rows = {nn::make_const(ce.Q.row(2))};
        if (!greedy.empty()) rows.push_back(g.rows_gather(m.comp.dec_tok_emb, greedy));
        Var inputs = g.concat_rows(rows);
        std::vector<int> pos(static_cast<size_t>(inputs->val.rows()));
        for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
        inputs = g.add(inputs, g.rows_gather(m.comp.dec_pos, pos));
        Var logits = decoder_forward(g, m.comp, inputs, nn::make_const(memory));
        Eigen::Index arg;
        logits->val.row(logits->val.rows() - 1).maxCoeff(&arg);
        if (arg == Vocab::kEos) break;
        greedy.push_back(static_cast<int>(arg));
    }
    CHECK(beam1 == greedy);

    SUBCASE("decoding is deterministic") {
        DecodeOptions o4;
        o4.beam = 4;
        o4.max_len = 12;
        CHECK(compress_segment(m, chat, ce, 3, 1, o4) == compress_segment(m, chat, ce, 3, 1, o4));
    }
}

TEST_CASE("incremental decoding matches the full-prefix forward pass") {
    int vocab_size = 40;
    Model m = tiny_model(16, 2, vocab_size, 33);
    ChatLog chat = fixture_chat(4, 4, vocab_size, 34);
    ChatEncoding ce = encode_chat_for_inference(m, chat);

    ChatSegment seg = build_segment(chat, 2, 1);
    Mat memory(static_cast<Eigen::Index>(seg.members.size()), ce.H.cols());
    for (size_t i = 0; i < seg.members.size(); ++i)
        memory.row(static_cast<Eigen::Index>(i)) = ce.H.row(seg.members[i] - 1);

    std::vector<int> prefix = {20, 31, 25, 22, 39, 21};
    // full pass over the whole prefix
    Graph g(false);
    std::vector<Var> rows = {nn::make_const(Mat(ce.Q.row(1))),
                             g.rows_gather(m.comp.dec_tok_emb, prefix)};
    Var inputs = g.concat_rows(rows);
    std::vector<int> pos(static_cast<size_t>(inputs->val.rows()));
    for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    inputs = g.add(inputs, g.rows_gather(m.comp.dec_pos, pos));
    Mat full = decoder_forward(g, m.comp, inputs, nn::make_const(memory))->val;

    // incremental pass, one position at a time
    IncrementalDecoder inc(m, memory);
    Mat step_logits(full.rows(), full.cols());
    step_logits.row(0) = inc.step(ce.Q.row(1) + m.comp.dec_pos->val.row(0));
    for (size_t i = 0; i < prefix.size(); ++i)
        step_logits.row(static_cast<Eigen::Index>(i) + 1) =
            inc.step(m.comp.dec_tok_emb->val.row(prefix[i]) +
                     m.comp.dec_pos->val.row(static_cast<Eigen::Index>(i) + 1));

    CHECK((full - step_logits).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("checkpoint save and load round trips exactly") {
    Model m = tiny_model(8, 1, 50, 31);
    std::string path = "/tmp/rankae_test_model.bin";
    save_model(path, m, 0xDEADBEEF);

    Model back = load_model(path, 0xDEADBEEF);
    CHECK(back.enc_cfg.d == m.enc_cfg.d);
    CHECK(back.comp_cfg.dec_layers == m.comp_cfg.dec_layers);
    for (size_t i = 0; i < m.params.items().size(); ++i) {
        const auto& [name, va] = m.params.items()[i];
        CHECK((va->val - back.params.get(name)->val).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(load_model(path, 0x1234), std::runtime_error);
    std::remove(path.c_str());
}
