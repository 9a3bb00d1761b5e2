#include "rankae/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>

#include <json.hpp>

#include "rankae/decode_cache.hpp"

namespace rankae {

using nn::Graph;
using nn::Mat;
using nn::Var;

CompressorParams CompressorParams::create(nn::ParamStore& ps, const CompressorConfig& cfg,
                                          int vocab_size, const nn::Var& encoder_tok_emb, Rng& rng) {
    CompressorParams p;
    p.cfg = cfg;
    p.query_stack = nn::make_stack(ps, "query", cfg.d, cfg.query_layers, cfg.heads, cfg.ffn, false, rng);
    p.query_pos = ps.add("query.pos_emb", nn::uniform_init(cfg.max_chat_len, cfg.d, 0.05, rng));
    if (cfg.share_token_emb)
        p.dec_tok_emb = encoder_tok_emb;
    else
        p.dec_tok_emb = ps.add("dec.tok_emb", nn::uniform_init(vocab_size, cfg.d, 0.05, rng));
    p.dec_pos = ps.add("dec.pos_emb", nn::uniform_init(cfg.max_target_len, cfg.d, 0.05, rng));
    p.dec_stack = nn::make_stack(ps, "dec", cfg.d, cfg.dec_layers, cfg.heads, cfg.ffn, true, rng);
    p.out_w = ps.add("dec.out_w", nn::glorot(cfg.d, vocab_size, rng));
    p.out_b = ps.add("dec.out_b", Mat::Zero(1, vocab_size));
    return p;
}

Var encode_queries(Graph& g, const CompressorParams& p, const Var& H) {
    if (p.query_stack.layers.empty()) return H;
    Var x = H;
    if (p.cfg.query_positions) {
        int n = static_cast<int>(H->val.rows());
        if (n > p.cfg.max_chat_len)
            throw std::invalid_argument("chat longer than query position table");
        std::vector<int> ids(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
        x = g.add(x, g.rows_gather(p.query_pos, ids));
    }
    return nn::stack_forward(g, p.query_stack, x);
}

Var decoder_forward(Graph& g, const CompressorParams& p, const Var& inputs, const Var& memory) {
    int t = static_cast<int>(inputs->val.rows());
    Mat mask = nn::causal_mask(t);
    Var h = nn::stack_forward(g, p.dec_stack, inputs, &mask, memory, nullptr);
    return g.add_rowvec(g.matmul(h, p.out_w), p.out_b);
}

namespace {

// decoder input row block: [query, emb(y_0), ..., emb(y_{T-2})] + positions
Var decoder_inputs(Graph& g, const CompressorParams& p, const Var& query,
                   const std::vector<int>& target, int upto) {
    std::vector<Var> rows;
    rows.push_back(query);
    if (upto > 1) {
        std::vector<int> prev(target.begin(), target.begin() + (upto - 1));
        rows.push_back(g.rows_gather(p.dec_tok_emb, prev));
    }
    Var x = g.concat_rows(rows);
    std::vector<int> pos(static_cast<size_t>(upto));
    for (int i = 0; i < upto; ++i) pos[static_cast<size_t>(i)] = i;
    return g.add(x, g.rows_gather(p.dec_pos, pos));
}

}  // namespace

ReconstructionLoss reconstruction_loss(Graph& g, const EncoderParams& enc,
                                       const CompressorParams& comp, const SegmentPair& pair,
                                       const Var& query, std::ostream* warn) {
    std::vector<int> target = serialize_target(pair);
    if (target.size() < 2 && pair.degenerate)
        throw std::invalid_argument("reconstruction_loss: degenerate pair has no target");

    ReconstructionLoss out;
    if (static_cast<int>(target.size()) > comp.cfg.max_target_len) {
        target.resize(static_cast<size_t>(comp.cfg.max_target_len));
        out.truncated = true;
        if (warn)
            (*warn) << "[warn] target segment truncated to " << comp.cfg.max_target_len
                    << " tokens (chat " << pair.chat_id << ", center " << pair.center << ")\n";
    }

    // one memory vector per noisy member utterance
    std::vector<Var> mem_rows;
    mem_rows.reserve(pair.members.size());
    for (const auto& m : pair.members)
        mem_rows.push_back(embed_utterance(g, enc, m.noisy_tokens, m.party));
    Var memory = g.concat_rows(mem_rows);
    if (memory->val.rows() != static_cast<Eigen::Index>(pair.members.size()))
        throw std::logic_error("memory row count must equal segment member count");

    int t = static_cast<int>(target.size());
    Var inputs = decoder_inputs(g, comp, query, target, t);
    Var logits = decoder_forward(g, comp, inputs, memory);
    out.total = g.cross_entropy(logits, target);
    out.num_tokens = t;
    return out;
}

// ---------------------------------------------------------------------------

Model create_model(const EncoderConfig& enc_cfg, const CompressorConfig& comp_cfg, int vocab_size,
                   uint64_t seed) {
    if (enc_cfg.d != comp_cfg.d)
        throw std::invalid_argument("encoder and compressor dims must match");
    Model m;
    m.enc_cfg = enc_cfg;
    m.comp_cfg = comp_cfg;
    m.vocab_size = vocab_size;
    Rng rng(seed);
    m.enc = EncoderParams::create(m.params, enc_cfg, vocab_size, rng);
    m.comp = CompressorParams::create(m.params, comp_cfg, vocab_size, m.enc.tok_emb, rng);
    return m;
}

namespace {

nlohmann::json enc_cfg_json(const EncoderConfig& c) {
    return {{"d", c.d},     {"layers", c.layers},   {"heads", c.heads},
            {"ffn", c.ffn}, {"max_len", c.max_len}, {"max_parties", c.max_parties}};
}

EncoderConfig enc_cfg_from(const nlohmann::json& j) {
    EncoderConfig c;
    c.d = j.at("d");
    c.layers = j.at("layers");
    c.heads = j.at("heads");
    c.ffn = j.at("ffn");
    c.max_len = j.at("max_len");
    c.max_parties = j.at("max_parties");
    return c;
}

nlohmann::json comp_cfg_json(const CompressorConfig& c) {
    return {{"d", c.d},
            {"dec_layers", c.dec_layers},
            {"query_layers", c.query_layers},
            {"heads", c.heads},
            {"ffn", c.ffn},
            {"max_target_len", c.max_target_len},
            {"max_chat_len", c.max_chat_len},
            {"share_token_emb", c.share_token_emb},
            {"query_positions", c.query_positions}};
}

CompressorConfig comp_cfg_from(const nlohmann::json& j) {
    CompressorConfig c;
    c.d = j.at("d");
    c.dec_layers = j.at("dec_layers");
    c.query_layers = j.at("query_layers");
    c.heads = j.at("heads");
    c.ffn = j.at("ffn");
    c.max_target_len = j.at("max_target_len");
    c.max_chat_len = j.at("max_chat_len");
    c.share_token_emb = j.at("share_token_emb");
    c.query_positions = j.at("query_positions");
    return c;
}

constexpr char kMagic[4] = {'R', 'A', 'E', 'M'};

}  // namespace

void save_model(const std::string& path, const Model& model, uint64_t vocab_hash) {
    nlohmann::json header;
    header["version"] = 1;
    header["vocab_hash"] = hex64(vocab_hash);
    header["vocab_size"] = model.vocab_size;
    header["encoder"] = enc_cfg_json(model.enc_cfg);
    header["compressor"] = comp_cfg_json(model.comp_cfg);
    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, var] : model.params.items())
        header["tensors"].push_back(
            {{"name", name}, {"rows", var->val.rows()}, {"cols", var->val.cols()}});
    std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    uint64_t hlen = head.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, var] : model.params.items()) {
        const Mat& m = var->val;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Model load_model(const std::string& path, uint64_t expected_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a model checkpoint: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string head(hlen, '\0');
    in.read(head.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(head);
    if (header.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported checkpoint version");
    if (expected_vocab_hash != 0 &&
        header.at("vocab_hash").get<std::string>() != hex64(expected_vocab_hash))
        throw std::runtime_error("checkpoint was trained with a different vocabulary");

    Model model = create_model(enc_cfg_from(header.at("encoder")), comp_cfg_from(header.at("compressor")),
                               header.at("vocab_size").get<int>(), /*seed=*/0);
    for (const auto& jt : header.at("tensors")) {
        Var v = model.params.get(jt.at("name").get<std::string>());
        Eigen::Index rows = jt.at("rows").get<Eigen::Index>();
        Eigen::Index cols = jt.at("cols").get<Eigen::Index>();
        if (v->val.rows() != rows || v->val.cols() != cols)
            throw std::runtime_error("tensor shape mismatch for " + jt.at("name").get<std::string>());
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                double x;
                in.read(reinterpret_cast<char*>(&x), sizeof(x));
                v->val(r, c) = x;
            }
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return model;
}

// ---------------------------------------------------------------------------

namespace {

double validation_loss(Model& model, const std::vector<const ChatLog*>& val_chats,
                       const TrainConfig& tc) {
    // fixed seed so successive evaluations see the same noise
    Rng val_rng(tc.seed ^ 0x5A17AB1E5EEDULL);
    double total = 0.0;
    long tokens = 0;
    for (const ChatLog* chat : val_chats) {
        Graph g(false);
        Var H = embed_chat(g, model.enc, *chat);
        Var Q = encode_queries(g, model.comp, H);
        for (int i = 1; i <= chat->size(); ++i) {
            ChatSegment seg = build_segment(*chat, i, tc.window_c);
            SegmentPair pair = add_noise(seg, *chat, tc.noise, val_rng);
            if (pair.degenerate) continue;
            Var q = g.slice_rows(Q, i - 1, 1);
            ReconstructionLoss rl = reconstruction_loss(g, model.enc, model.comp, pair, q);
            total += rl.total->val(0, 0);
            tokens += rl.num_tokens;
        }
    }
    return tokens > 0 ? total / static_cast<double>(tokens) : 0.0;
}

}  // namespace

TrainResult train_joint(Model& model, const std::vector<ChatLog>& corpus, const TrainConfig& tc,
                        std::ostream* log, const CheckpointFn& on_checkpoint) {
    if (corpus.empty()) throw std::invalid_argument("train_joint: empty corpus");
    if (tc.alpha < 0.0 || tc.alpha > 1.0) throw std::invalid_argument("train_joint: alpha outside [0, 1]");
    tc.noise.validate();

    // deterministic split: the tail is held out for validation
    int n_val = static_cast<int>(std::floor(tc.val_fraction * static_cast<double>(corpus.size())));
    int n_train = static_cast<int>(corpus.size()) - n_val;
    if (n_train < 1) throw std::invalid_argument("train_joint: no training chats after split");
    std::vector<const ChatLog*> train_chats, val_chats;
    for (int i = 0; i < n_train; ++i) train_chats.push_back(&corpus[static_cast<size_t>(i)]);
    for (int i = n_train; i < static_cast<int>(corpus.size()); ++i)
        val_chats.push_back(&corpus[static_cast<size_t>(i)]);
    if (val_chats.empty()) val_chats = train_chats;  // tiny corpora validate on train

    Rng root(tc.seed);
    nn::Adam adam({tc.lr});
    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();

    for (int step = 1; step <= tc.steps; ++step) {
        Rng rng = root.fork(static_cast<uint64_t>(step));
        // cycling through chats keeps coverage even on small corpora
        const ChatLog& chat =
            *train_chats[static_cast<size_t>((step - 1) % static_cast<int>(train_chats.size()))];

        Graph g(true);
        Var H = embed_chat(g, model.enc, chat);

        Var loss = nn::make_scalar(0.0);
        double cup_value = 0.0, rec_value = 0.0;

        if (tc.alpha > 0.0) {
            std::vector<CupTerm> plan = make_cup_plan(chat, tc.window_c, tc.m_negatives, rng);
            if (!plan.empty()) {
                Var cup = cup_loss(g, H, model.enc.bilinear_w, plan);
                cup_value = cup->val(0, 0) / static_cast<double>(plan.size());
                loss = g.add(loss, g.scale(cup, tc.alpha / static_cast<double>(plan.size())));
            }
        }
        if (tc.alpha < 1.0) {
            Var Q = encode_queries(g, model.comp, H);
            std::vector<Var> rec_terms;
            long rec_tokens = 0;
            for (int i = 1; i <= chat.size(); ++i) {
                ChatSegment seg = build_segment(chat, i, tc.window_c);
                SegmentPair pair = add_noise(seg, chat, tc.noise, rng);
                if (pair.degenerate) continue;
                Var q = g.slice_rows(Q, i - 1, 1);
                ReconstructionLoss rl = reconstruction_loss(g, model.enc, model.comp, pair, q, log);
                rec_terms.push_back(rl.total);
                rec_tokens += rl.num_tokens;
            }
            if (!rec_terms.empty()) {
                Var rec = g.add_n(rec_terms);
                rec_value = rec->val(0, 0) / static_cast<double>(rec_tokens);
                loss = g.add(loss, g.scale(rec, (1.0 - tc.alpha) / static_cast<double>(rec_tokens)));
            }
        }

        double loss_value = loss->val(0, 0);
        if (!std::isfinite(loss_value))
            throw std::runtime_error("non-finite loss at step " + std::to_string(step) +
                                     " (cup=" + std::to_string(cup_value) +
                                     ", rec=" + std::to_string(rec_value) + ", chat=" + chat.id + ")");
        result.loss_history.push_back(loss_value);

        model.params.zero_grad();
        g.backward(loss);
        double lr = tc.lr;
        if (tc.lr_decay && tc.steps > 1)
            lr = tc.lr * (1.0 - 0.9 * static_cast<double>(step - 1) / static_cast<double>(tc.steps - 1));
        adam.step(model.params, lr);

        if (tc.log_every > 0 && log && step % tc.log_every == 0)
            (*log) << "step " << step << " loss " << loss_value << " (cup " << cup_value << ", rec "
                   << rec_value << ")\n";

        if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0) {
            double val = validation_loss(model, val_chats, tc);
            result.val_history.emplace_back(step, val);
            if (val < result.best_val) {
                result.best_val = val;
                result.best_step = step;
            }
            if (on_checkpoint) on_checkpoint(step, model, val);
            if (model.params.has_nan())
                throw std::runtime_error("non-finite parameters at step " + std::to_string(step));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------

ChatEncoding encode_chat_for_inference(const Model& model, const ChatLog& chat) {
    Graph g(false);
    Var H = embed_chat(g, model.enc, chat);
    Var Q = encode_queries(g, model.comp, H);
    return {H->val, Q->val};
}

std::vector<int> compress_segment(const Model& model, const ChatLog& chat, const ChatEncoding& ce,
                                  int center, int c, const DecodeOptions& opts) {
    ChatSegment seg = build_segment(chat, center, c);
    Mat memory(static_cast<Eigen::Index>(seg.members.size()), ce.H.cols());
    for (size_t i = 0; i < seg.members.size(); ++i)
        memory.row(static_cast<Eigen::Index>(i)) = ce.H.row(seg.members[i] - 1);
    if (memory.rows() != static_cast<Eigen::Index>(seg.members.size()))
        throw std::logic_error("memory row count must equal segment member count");
    return decode_with_memories(model, ce.Q.row(center - 1), memory, opts);
}

std::vector<int> decode_with_memories(const Model& model, const Eigen::RowVectorXd& query,
                                      const Eigen::MatrixXd& memory, const DecodeOptions& opts) {
    if (opts.beam < 1) throw std::invalid_argument("beam must be >= 1");

    struct Hyp {
        std::vector<int> tokens;
        double logprob = 0.0;
        IncrementalDecoder dec;
        Eigen::RowVectorXd logits;
        Hyp(const Model& m, const Mat& mem) : dec(m, mem) {}
    };
    auto normalized = [&](const std::vector<int>& toks, double lp) {
        double len = static_cast<double>(std::max<size_t>(1, toks.size()));
        return lp / std::pow(len, opts.len_norm);
    };

    int max_len = std::min(opts.max_len, model.comp_cfg.max_target_len - 1);
    std::vector<Hyp> alive;
    alive.emplace_back(model, memory);
    alive[0].logits = alive[0].dec.step(query + model.comp.dec_pos->val.row(0));

    struct Done {
        std::vector<int> tokens;
        double logprob;
    };
    std::vector<Done> finished;

    for (int t = 0; t < max_len && !alive.empty(); ++t) {
        struct Cand {
            double score;  // cumulative logprob
            int parent;
            int token;
        };
        std::vector<Cand> cands;
        for (size_t a = 0; a < alive.size(); ++a) {
            const Eigen::RowVectorXd& row = alive[a].logits;
            double mx = row.maxCoeff();
            Eigen::ArrayXd sh = (row.array() - mx).transpose();
            double lse = std::log(sh.exp().sum()) + mx;
            for (int v = 0; v < row.size(); ++v)
                cands.push_back({alive[a].logprob + row(v) - lse, static_cast<int>(a), v});
        }
        // deterministic order: higher score first, then lower token id
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
            if (x.score != y.score) return x.score > y.score;
            return x.token < y.token;
        });
        // expand the top `beam` candidates; a hypothesis that emits EOS retires
        // and narrows the live beam, so beam = 1 is exactly greedy decoding
        std::vector<Hyp> next;
        int expansions = 0;
        for (const Cand& cd : cands) {
            if (expansions >= opts.beam) break;
            ++expansions;
            const Hyp& parent = alive[static_cast<size_t>(cd.parent)];
            if (cd.token == Vocab::kEos) {
                finished.push_back({parent.tokens, cd.score});
            } else {
                Hyp child = parent;
                child.logprob = cd.score;
                child.tokens.push_back(cd.token);
                int pos = static_cast<int>(child.tokens.size());
                child.logits = child.dec.step(model.comp.dec_tok_emb->val.row(cd.token) +
                                              model.comp.dec_pos->val.row(pos));
                next.push_back(std::move(child));
            }
        }
        alive = std::move(next);
    }
    for (auto& h : alive) finished.push_back({h.tokens, h.logprob});
    if (finished.empty()) return {};
    const Done* best = &finished[0];
    for (const auto& h : finished)
        if (normalized(h.tokens, h.logprob) > normalized(best->tokens, best->logprob)) best = &h;
    return best->tokens;
}

}  // namespace rankae
