#pragma once

#include "rankae/compressor.hpp"

namespace rankae {

// Single-position decoder evaluation with cached self-attention keys/values
// and precomputed cross-attention projections. Produces the same logits as a
// full-prefix pass (up to floating-point accumulation order) at O(T) instead
// of O(T^2) per decoded token.
class IncrementalDecoder {
public:
    IncrementalDecoder(const Model& model, Eigen::MatrixXd memory);

    // feeds the embedding at the next position, returns the logits row
    Eigen::RowVectorXd step(const Eigen::RowVectorXd& input_embedding);

    int positions_consumed() const { return t_; }

private:
    struct HeadCache {
        Eigen::MatrixXd k;  // t x dh, grows
        Eigen::MatrixXd v;
    };
    struct LayerCache {
        std::vector<HeadCache> self_heads;
        std::vector<Eigen::MatrixXd> cross_k;  // M x dh, fixed
        std::vector<Eigen::MatrixXd> cross_v;
    };

    const Model& model_;
    Eigen::MatrixXd memory_;
    std::vector<LayerCache> layers_;
    int t_ = 0;
};

}  // namespace rankae
