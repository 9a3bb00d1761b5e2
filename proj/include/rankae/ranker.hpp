#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rankae {

struct RankConfig {
    int c = 1;          // context window size
    int k_cap = 3;      // upper bound on selected topic utterances
    double eta = 0.5;   // relevance-vs-diversity preference
    bool use_distance = true;   // ablation switch for the Gaussian coefficient
    bool use_diversity = true;  // ablation switch for the max-penalty term
};

// k = n/(2c+1), rounded half-up, clamped to [1, min(k_cap, n)]
int compute_k(int n, int c, int k_cap);

// entry (i, j) = sigmoid(h_j^T W h_i), then symmetrized with the transpose
Eigen::MatrixXd relevance_matrix(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W);

// Gaussian distance coefficients over 1-based positions:
// lambda_ij = exp(-(P_j - P_i)^2 / (2 (n/k)^2))
Eigen::MatrixXd distance_matrix(int n, int k);

// row sums excluding the diagonal
Eigen::VectorXd local_centrality(const Eigen::MatrixXd& M);

// Greedy diversity-enhanced selection. Score of candidate i:
//   eta/(n-1) * sum_{j != i} M_ij  -  (1-eta) * max_{j in V} M_ij
// with the penalty term zero while V is empty. Ties break toward the lower
// index; returns 0-based indices in selection order.
std::vector<int> select_topic_utterances(const Eigen::MatrixXd& M, int k, double eta,
                                         bool use_diversity = true);

}  // namespace rankae
