#pragma once

#include <functional>
#include <iosfwd>

#include "rankae/encoder.hpp"
#include "rankae/segmenter.hpp"

namespace rankae {

struct CompressorConfig {
    int d = 64;
    int dec_layers = 2;
    int query_layers = 1;
    int heads = 4;
    int ffn = 256;
    int max_target_len = 160;  // decoder position slots, query slot included
    int max_chat_len = 40;     // query position table size
    bool share_token_emb = true;
    bool query_positions = true;
};

// Query encoder over utterance vectors plus the memory-attending decoder.
// The decoder's first input slot is the query vector; cross-attention reads
// one memory vector per segment member, never word-level states.
struct CompressorParams {
    CompressorConfig cfg;
    nn::StackParams query_stack;
    nn::Var query_pos;   // max_chat_len x d
    nn::Var dec_tok_emb; // shared with the encoder table or owned
    nn::Var dec_pos;     // max_target_len x d
    nn::StackParams dec_stack;
    nn::Var out_w;  // d x |V|
    nn::Var out_b;  // 1 x |V|

    static CompressorParams create(nn::ParamStore& ps, const CompressorConfig& cfg, int vocab_size,
                                   const nn::Var& encoder_tok_emb, Rng& rng);
};

// Q = TransEnc(H) rowwise; zero layers is the identity
nn::Var encode_queries(nn::Graph& g, const CompressorParams& p, const nn::Var& H);

// causally masked decoder pass; input rows are embeddings, output is logits
nn::Var decoder_forward(nn::Graph& g, const CompressorParams& p, const nn::Var& inputs,
                        const nn::Var& memory);

struct ReconstructionLoss {
    nn::Var total;   // summed token negative log-likelihood (1x1)
    int num_tokens = 0;
    bool truncated = false;
};

// Teacher-forced cross entropy of the target serialization given the query
// vector and the noisy member vectors as memories.
ReconstructionLoss reconstruction_loss(nn::Graph& g, const EncoderParams& enc,
                                       const CompressorParams& comp, const SegmentPair& pair,
                                       const nn::Var& query, std::ostream* warn = nullptr);

// ---------------------------------------------------------------------------

struct Model {
    EncoderConfig enc_cfg;
    CompressorConfig comp_cfg;
    int vocab_size = 0;
    nn::ParamStore params;
    EncoderParams enc;
    CompressorParams comp;
};

Model create_model(const EncoderConfig& enc_cfg, const CompressorConfig& comp_cfg, int vocab_size,
                   uint64_t seed);

void save_model(const std::string& path, const Model& model, uint64_t vocab_hash);
Model load_model(const std::string& path, uint64_t expected_vocab_hash = 0);

// ---------------------------------------------------------------------------

struct TrainConfig {
    double alpha = 0.5;  // joint-loss mix: alpha * cup + (1 - alpha) * rec
    double lr = 1e-3;
    bool lr_decay = true;  // linear decay of the single rate to 10% of lr
    int steps = 2000;
    int window_c = 1;
    int m_negatives = 2;
    NoiseProbs noise;
    uint64_t seed = 1234;
    int checkpoint_every = 500;
    double val_fraction = 0.1;
    int log_every = 0;  // 0 silences progress lines
};

struct TrainResult {
    std::vector<double> loss_history;                 // combined loss per step
    std::vector<std::pair<int, double>> val_history;  // (step, per-token val loss)
    int best_step = 0;
    double best_val = 0.0;
};

using CheckpointFn = std::function<void(int step, const Model&, double val_loss)>;

// Joint CUP + reconstruction training over the corpus. Single-threaded and
// deterministic for a given seed. Throws on non-finite loss.
TrainResult train_joint(Model& model, const std::vector<ChatLog>& corpus, const TrainConfig& tc,
                        std::ostream* log = nullptr, const CheckpointFn& on_checkpoint = nullptr);

// ---------------------------------------------------------------------------
// Inference

struct ChatEncoding {
    Eigen::MatrixXd H;  // n x d clean utterance vectors
    Eigen::MatrixXd Q;  // n x d query vectors
};

ChatEncoding encode_chat_for_inference(const Model& model, const ChatLog& chat);

struct DecodeOptions {
    int beam = 4;
    int max_len = 96;
    double len_norm = 0.7;  // scores divide by length^len_norm
};

// Beam-search decode from an explicit query vector and memory rows. Returns
// token ids without the terminating EOS.
std::vector<int> decode_with_memories(const Model& model, const Eigen::RowVectorXd& query,
                                      const Eigen::MatrixXd& memory, const DecodeOptions& opts);

// Beam-search decode of one clean topic segment. Empty output is legal and
// left to the caller to flag.
std::vector<int> compress_segment(const Model& model, const ChatLog& chat, const ChatEncoding& ce,
                                  int center, int c, const DecodeOptions& opts);

}  // namespace rankae
