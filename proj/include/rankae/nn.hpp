#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rankae/common.hpp"

namespace rankae::nn {

using Mat = Eigen::MatrixXd;

// One value in the computation graph. Matrices only; a scalar is 1x1.
struct Node {
    Mat val;
    Mat grad;                 // allocated lazily on first accumulation
    bool requires_grad = false;
    std::function<void(const Node&)> backfn;  // pulls this node's grad into parents

    void accumulate(const Mat& g) {
        if (grad.size() == 0)
            grad = g;
        else
            grad += g;
    }
};

using Var = std::shared_ptr<Node>;

Var make_param(Mat value);                 // leaf with requires_grad
Var make_const(Mat value);                 // leaf without grad
inline Var make_scalar(double v) { return make_const(Mat::Constant(1, 1, v)); }

// Builds forward values and records the tape. One Graph per training step;
// inference passes use grad_enabled = false and skip all bookkeeping.
class Graph {
public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Var matmul(const Var& a, const Var& b);            // A*B
    Var matmul_nt(const Var& a, const Var& b);         // A*B^T
    Var add(const Var& a, const Var& b);               // same shape
    Var add_rowvec(const Var& a, const Var& b);        // b is 1xD, broadcast over rows
    Var add_n(const std::vector<Var>& xs);             // elementwise sum, same shapes
    Var sub(const Var& a, const Var& b);
    Var scale(const Var& a, double s);
    Var hadamard(const Var& a, const Var& b);
    Var rows_gather(const Var& table, const std::vector<int>& ids);
    Var slice_rows(const Var& a, int start, int len);
    Var concat_rows(const std::vector<Var>& xs);
    Var concat_cols(const std::vector<Var>& xs);
    Var softmax_rows(const Var& a, const Mat* additive_mask = nullptr);
    Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
    Var gelu(const Var& a);
    Var log_sigmoid(const Var& a);
    Var sum(const Var& a);                             // -> 1x1
    // total cross entropy of row-wise logits against target ids -> 1x1
    Var cross_entropy(const Var& logits, const std::vector<int>& targets);

    bool grad_enabled() const { return grad_enabled_; }

    // reverse pass from a 1x1 loss node
    void backward(const Var& loss);

private:
    bool grad_enabled_;
    std::vector<Var> tape_;

    Var emit(Mat value, std::vector<Var> parents, std::function<void(const Node&)> backfn);
};

// Named parameter collection with a stable iteration order.
class ParamStore {
public:
    Var add(const std::string& name, Mat value);
    Var get(const std::string& name) const;
    const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
    void zero_grad();
    size_t total_size() const;
    bool has_nan() const;

private:
    std::vector<std::pair<std::string, Var>> items_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    // lr_override < 0 keeps the configured rate
    void step(ParamStore& params, double lr_override = -1.0);
    int64_t steps_done() const { return t_; }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<Mat> m_, v_;
};

// Glorot-uniform init for weight matrices, uniform for embeddings.
Mat glorot(int rows, int cols, Rng& rng);
Mat uniform_init(int rows, int cols, double scale, Rng& rng);

}  // namespace rankae::nn
