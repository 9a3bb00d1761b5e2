#pragma once

#include <string>
#include <vector>

#include "rankae/compressor.hpp"
#include "rankae/pipeline.hpp"

namespace rankae {

// Every tunable of the pipeline in one validated document. Values mirror the
// JSON config file; CLI flags override individual fields.
struct RunConfig {
    uint64_t seed = 1234;

    NormalizeOptions normalize;
    int max_chat_utterances = 40;
    int max_utterance_tokens = 40;

    int vocab_target_size = 2000;
    int vocab_max_merges = 1 << 20;

    EncoderConfig encoder;
    CompressorConfig compressor;
    RankConfig rank;
    NoiseProbs noise;
    TrainConfig train;
    DecodeOptions decode;
    int summary_budget_tokens = 40;

    SynthConfig synth;

    // throws std::invalid_argument listing every violated constraint
    void validate() const;

    std::string to_json() const;
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::string& path);  // merges over defaults
};

// Replayability record written next to every artifact. Two runs with the same
// manifest produce identical output bytes, so no volatile fields here.
struct Manifest {
    std::string subcommand;
    std::string config_hash;                                  // of the resolved config JSON
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;  // path -> content hash
    std::vector<std::pair<std::string, std::string>> outputs; // path -> content hash

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void write(const std::string& path) const;
};

}  // namespace rankae
