#include "rankae/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace rankae {

using nlohmann::json;

void RunConfig::validate() const {
    std::vector<std::string> errors;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };

    check(max_chat_utterances >= 1, "truncate.max_utterances must be >= 1");
    check(max_utterance_tokens >= 1, "truncate.max_tokens must be >= 1");
    check(vocab_target_size > Vocab::num_specials(), "vocab.target_size too small for specials");
    check(encoder.d >= 1 && encoder.d == compressor.d, "model dims must match and be positive");
    check(encoder.layers >= 0 && compressor.dec_layers >= 0 && compressor.query_layers >= 0,
          "layer counts must be >= 0");
    check(encoder.layers == 0 || encoder.d % encoder.heads == 0,
          "encoder dim must divide by heads");
    check(compressor.dec_layers == 0 || compressor.d % compressor.heads == 0,
          "compressor dim must divide by heads");
    check(rank.c >= 1, "rank.c must be >= 1");
    check(rank.k_cap >= 1, "rank.k_cap must be >= 1");
    check(rank.eta >= 0.0 && rank.eta <= 1.0, "rank.eta must lie in [0, 1]");
    double psum = noise.p_insert + noise.p_replace + noise.p_retain;
    check(std::abs(psum - 1.0) <= 1e-9, "noise probabilities must sum to 1");
    check(noise.p_insert >= 0 && noise.p_replace >= 0 && noise.p_retain >= 0,
          "noise probabilities must be non-negative");
    check(noise.ratio_lo >= 0 && noise.ratio_hi >= noise.ratio_lo, "bad noise ratio range");
    check(train.alpha >= 0.0 && train.alpha <= 1.0, "train.alpha must lie in [0, 1]");
    check(train.lr > 0.0, "train.lr must be positive");
    check(train.steps >= 0, "train.steps must be >= 0");
    check(train.m_negatives >= 1, "train.m_negatives must be >= 1");
    check(decode.beam >= 1, "decode.beam must be >= 1");
    check(decode.max_len >= 1, "decode.max_len must be >= 1");
    check(summary_budget_tokens >= 0, "summary.budget_tokens must be >= 0");
    check(synth.num_chats >= 0, "synth.num_chats must be >= 0");

    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }
}

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["normalize"] = {{"fillers", normalize.filler_words}};
    j["truncate"] = {{"max_utterances", max_chat_utterances}, {"max_tokens", max_utterance_tokens}};
    j["vocab"] = {{"target_size", vocab_target_size}, {"max_merges", vocab_max_merges}};
    j["model"] = {{"d", encoder.d},
                  {"enc_layers", encoder.layers},
                  {"dec_layers", compressor.dec_layers},
                  {"query_layers", compressor.query_layers},
                  {"heads", encoder.heads},
                  {"ffn", encoder.ffn},
                  {"max_len", encoder.max_len},
                  {"max_target_len", compressor.max_target_len},
                  {"max_chat_len", compressor.max_chat_len},
                  {"share_token_emb", compressor.share_token_emb},
                  {"query_positions", compressor.query_positions}};
    j["rank"] = {{"c", rank.c},
                 {"k_cap", rank.k_cap},
                 {"eta", rank.eta},
                 {"use_distance", rank.use_distance},
                 {"use_diversity", rank.use_diversity}};
    j["noise"] = {{"p_insert", noise.p_insert},
                  {"p_replace", noise.p_replace},
                  {"p_retain", noise.p_retain},
                  {"ratio_lo", noise.ratio_lo},
                  {"ratio_hi", noise.ratio_hi}};
    j["train"] = {{"alpha", train.alpha},
                  {"lr", train.lr},
                  {"steps", train.steps},
                  {"m_negatives", train.m_negatives},
                  {"checkpoint_every", train.checkpoint_every},
                  {"val_fraction", train.val_fraction},
                  {"log_every", train.log_every}};
    j["decode"] = {{"beam", decode.beam}, {"max_len", decode.max_len}, {"len_norm", decode.len_norm}};
    j["summary"] = {{"budget_tokens", summary_budget_tokens}};
    j["synth"] = {{"num_chats", synth.num_chats},
                  {"min_topics", synth.min_topics},
                  {"max_topics", synth.max_topics},
                  {"min_utts_per_topic", synth.min_utts_per_topic},
                  {"max_utts_per_topic", synth.max_utts_per_topic},
                  {"shuffle_blocks", synth.shuffle_blocks}};
    return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    RunConfig cfg;  // defaults
    json j = json::parse(text);
    auto get = [&](const json& obj, const char* key, auto& target) {
        if (obj.contains(key)) target = obj[key].get<std::decay_t<decltype(target)>>();
    };
    get(j, "seed", cfg.seed);
    if (j.contains("normalize")) get(j["normalize"], "fillers", cfg.normalize.filler_words);
    if (j.contains("truncate")) {
        get(j["truncate"], "max_utterances", cfg.max_chat_utterances);
        get(j["truncate"], "max_tokens", cfg.max_utterance_tokens);
    }
    if (j.contains("vocab")) {
        get(j["vocab"], "target_size", cfg.vocab_target_size);
        get(j["vocab"], "max_merges", cfg.vocab_max_merges);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        get(m, "d", cfg.encoder.d);
        cfg.compressor.d = cfg.encoder.d;
        get(m, "enc_layers", cfg.encoder.layers);
        get(m, "dec_layers", cfg.compressor.dec_layers);
        get(m, "query_layers", cfg.compressor.query_layers);
        get(m, "heads", cfg.encoder.heads);
        cfg.compressor.heads = cfg.encoder.heads;
        get(m, "ffn", cfg.encoder.ffn);
        cfg.compressor.ffn = cfg.encoder.ffn;
        get(m, "max_len", cfg.encoder.max_len);
        get(m, "max_target_len", cfg.compressor.max_target_len);
        get(m, "max_chat_len", cfg.compressor.max_chat_len);
        get(m, "share_token_emb", cfg.compressor.share_token_emb);
        get(m, "query_positions", cfg.compressor.query_positions);
    }
    if (j.contains("rank")) {
        const json& r = j["rank"];
        get(r, "c", cfg.rank.c);
        get(r, "k_cap", cfg.rank.k_cap);
        get(r, "eta", cfg.rank.eta);
        get(r, "use_distance", cfg.rank.use_distance);
        get(r, "use_diversity", cfg.rank.use_diversity);
    }
    if (j.contains("noise")) {
        const json& n = j["noise"];
        get(n, "p_insert", cfg.noise.p_insert);
        get(n, "p_replace", cfg.noise.p_replace);
        get(n, "p_retain", cfg.noise.p_retain);
        get(n, "ratio_lo", cfg.noise.ratio_lo);
        get(n, "ratio_hi", cfg.noise.ratio_hi);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        get(t, "alpha", cfg.train.alpha);
        get(t, "lr", cfg.train.lr);
        get(t, "steps", cfg.train.steps);
        get(t, "m_negatives", cfg.train.m_negatives);
        get(t, "checkpoint_every", cfg.train.checkpoint_every);
        get(t, "val_fraction", cfg.train.val_fraction);
        get(t, "log_every", cfg.train.log_every);
    }
    if (j.contains("decode")) {
        const json& d = j["decode"];
        get(d, "beam", cfg.decode.beam);
        get(d, "max_len", cfg.decode.max_len);
        get(d, "len_norm", cfg.decode.len_norm);
    }
    if (j.contains("summary")) get(j["summary"], "budget_tokens", cfg.summary_budget_tokens);
    if (j.contains("synth")) {
        const json& s = j["synth"];
        get(s, "num_chats", cfg.synth.num_chats);
        get(s, "min_topics", cfg.synth.min_topics);
        get(s, "max_topics", cfg.synth.max_topics);
        get(s, "min_utts_per_topic", cfg.synth.min_utts_per_topic);
        get(s, "max_utts_per_topic", cfg.synth.max_utts_per_topic);
        get(s, "shuffle_blocks", cfg.synth.shuffle_blocks);
    }
    // training uses the same window/noise settings as the rest of the pipeline
    cfg.train.window_c = cfg.rank.c;
    cfg.train.noise = cfg.noise;
    cfg.train.seed = cfg.seed;
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

void Manifest::add_input(const std::string& path) { inputs.emplace_back(path, hex64(hash_file(path))); }
void Manifest::add_output(const std::string& path) { outputs.emplace_back(path, hex64(hash_file(path))); }

void Manifest::write(const std::string& path) const {
    json j;
    j["subcommand"] = subcommand;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["inputs"] = json::object();
    for (const auto& [p, h] : inputs) j["inputs"][p] = h;
    j["outputs"] = json::object();
    for (const auto& [p, h] : outputs) j["outputs"][p] = h;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace rankae
