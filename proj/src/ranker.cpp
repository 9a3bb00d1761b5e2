#include "rankae/ranker.hpp"

#include <cmath>
#include <stdexcept>

namespace rankae {

int compute_k(int n, int c, int k_cap) {
    if (n < 1) throw std::invalid_argument("compute_k: n must be >= 1");
    if (c < 1 || k_cap < 1) throw std::invalid_argument("compute_k: c and k_cap must be >= 1");
    int k = static_cast<int>(std::floor(static_cast<double>(n) / (2 * c + 1) + 0.5));
    k = std::max(1, k);
    k = std::min(k, k_cap);
    k = std::min(k, n);
    return k;
}

Eigen::MatrixXd relevance_matrix(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W) {
    if (!H.allFinite() || !W.allFinite())
        throw std::invalid_argument("relevance_matrix: non-finite input");
    // B(i, j) = h_i^T W h_j, so the required entry h_j^T W h_i is B(j, i)
    Eigen::MatrixXd bilinear = H * W * H.transpose();
    Eigen::MatrixXd m = bilinear.transpose().unaryExpr(
        [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd distance_matrix(int n, int k) {
    if (n < 1 || k < 1) throw std::invalid_argument("distance_matrix: n and k must be >= 1");
    double spread = static_cast<double>(n) / static_cast<double>(k);
    double denom = 2.0 * spread * spread;
    Eigen::MatrixXd lambda(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double dp = static_cast<double>(j - i);  // positions are 1-based; differences match
            lambda(i, j) = std::exp(-(dp * dp) / denom);
        }
    }
    return lambda;
}

Eigen::VectorXd local_centrality(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("local_centrality: matrix not square");
    // summed termwise in index order so exact ties between rows stay exact
    Eigen::VectorXd c = Eigen::VectorXd::Zero(M.rows());
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            if (j != i) c(i) += M(i, j);
    return c;
}

std::vector<int> select_topic_utterances(const Eigen::MatrixXd& M, int k, double eta,
                                         bool use_diversity) {
    int n = static_cast<int>(M.rows());
    if (M.rows() != M.cols()) throw std::invalid_argument("selection: matrix not square");
    if (k < 1) throw std::invalid_argument("selection: k must be >= 1");
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("selection: eta outside [0, 1]");
    k = std::min(k, n);

    // the sum term never changes across iterations
    Eigen::VectorXd base = local_centrality(M);
    if (n > 1) base /= static_cast<double>(n - 1);

    std::vector<int> selected;
    std::vector<bool> used(static_cast<size_t>(n), false);
    while (static_cast<int>(selected.size()) < k) {
        int best = -1;
        double best_score = 0.0;
        for (int i = 0; i < n; ++i) {
            if (used[static_cast<size_t>(i)]) continue;
            double score;
            if (use_diversity) {
                // penalty is 0 on the first pick, else a true max over V
                double penalty = 0.0;
                for (size_t s = 0; s < selected.size(); ++s) {
                    double v = M(i, selected[s]);
                    penalty = s == 0 ? v : std::max(penalty, v);
                }
                score = eta * base(i) - (1.0 - eta) * penalty;
            } else {
                score = base(i);
            }
            if (best < 0 || score > best_score) {
                best = i;
                best_score = score;
            }
        }
        used[static_cast<size_t>(best)] = true;
        selected.push_back(best);
    }
    return selected;
}

}  // namespace rankae
