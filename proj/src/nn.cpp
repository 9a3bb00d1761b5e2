#include "rankae/nn.hpp"

#include <cmath>

namespace rankae::nn {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var make_param(Mat value) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    n->requires_grad = true;
    return n;
}

Var make_const(Mat value) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    return n;
}

Var Graph::emit(Mat value, std::vector<Var> parents, std::function<void(const Node&)> backfn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    if (grad_enabled_) {
        bool needs = false;
        for (const auto& p : parents)
            if (p->requires_grad) needs = true;
        if (needs) {
            n->requires_grad = true;
            n->backfn = std::move(backfn);
            tape_.push_back(n);
        }
    }
    return n;
}

Var Graph::matmul(const Var& a, const Var& b) {
    Mat out = a->val * b->val;
    return emit(std::move(out), {a, b}, [a, b](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * b->val.transpose());
        if (b->requires_grad) b->accumulate(a->val.transpose() * n.grad);
    });
}

Var Graph::matmul_nt(const Var& a, const Var& b) {
    Mat out = a->val * b->val.transpose();
    return emit(std::move(out), {a, b}, [a, b](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * b->val);
        if (b->requires_grad) b->accumulate(n.grad.transpose() * a->val);
    });
}

Var Graph::add(const Var& a, const Var& b) {
    Mat out = a->val + b->val;
    return emit(std::move(out), {a, b}, [a, b](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad);
    });
}

Var Graph::add_rowvec(const Var& a, const Var& b) {
    Mat out = a->val.rowwise() + b->val.row(0);
    return emit(std::move(out), {a, b}, [a, b](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad.colwise().sum());
    });
}

Var Graph::add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_n: empty list");
    Mat out = xs[0]->val;
    for (size_t i = 1; i < xs.size(); ++i) out += xs[i]->val;
    return emit(std::move(out), xs, [xs](const Node& n) {
        for (const auto& x : xs)
            if (x->requires_grad) x->accumulate(n.grad);
    });
}

Var Graph::sub(const Var& a, const Var& b) {
    Mat out = a->val - b->val;
    return emit(std::move(out), {a, b}, [a, b](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(-n.grad);
    });
}

Var Graph::scale(const Var& a, double s) {
    Mat out = a->val * s;
    return emit(std::move(out), {a}, [a, s](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * s);
    });
}

Var Graph::hadamard(const Var& a, const Var& b) {
    Mat out = a->val.cwiseProduct(b->val);
    return emit(std::move(out), {a, b}, [a, b](const Node& n) {
        if (a->requires_grad) a->accumulate(n.grad.cwiseProduct(b->val));
        if (b->requires_grad) b->accumulate(n.grad.cwiseProduct(a->val));
    });
}

Var Graph::rows_gather(const Var& table, const std::vector<int>& ids) {
    Mat out(static_cast<Eigen::Index>(ids.size()), table->val.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table->val.rows())
            throw std::out_of_range("rows_gather: id " + std::to_string(ids[i]) + " outside table");
        out.row(static_cast<Eigen::Index>(i)) = table->val.row(ids[i]);
    }
    return emit(std::move(out), {table}, [table, ids](const Node& n) {
        if (!table->requires_grad) return;
        if (table->grad.size() == 0) table->grad = Mat::Zero(table->val.rows(), table->val.cols());
        for (size_t i = 0; i < ids.size(); ++i)
            table->grad.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    });
}

Var Graph::slice_rows(const Var& a, int start, int len) {
    Mat out = a->val.middleRows(start, len);
    return emit(std::move(out), {a}, [a, start, len](const Node& n) {
        if (!a->requires_grad) return;
        if (a->grad.size() == 0) a->grad = Mat::Zero(a->val.rows(), a->val.cols());
        a->grad.middleRows(start, len) += n.grad;
    });
}

Var Graph::concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
    Eigen::Index rows = 0;
    for (const auto& x : xs) rows += x->val.rows();
    Mat out(rows, xs[0]->val.cols());
    Eigen::Index at = 0;
    for (const auto& x : xs) {
        out.middleRows(at, x->val.rows()) = x->val;
        at += x->val.rows();
    }
    return emit(std::move(out), xs, [xs](const Node& n) {
        Eigen::Index at = 0;
        for (const auto& x : xs) {
            if (x->requires_grad) x->accumulate(n.grad.middleRows(at, x->val.rows()));
            at += x->val.rows();
        }
    });
}

Var Graph::concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: empty list");
    Eigen::Index cols = 0;
    for (const auto& x : xs) cols += x->val.cols();
    Mat out(xs[0]->val.rows(), cols);
    Eigen::Index at = 0;
    for (const auto& x : xs) {
        out.middleCols(at, x->val.cols()) = x->val;
        at += x->val.cols();
    }
    return emit(std::move(out), xs, [xs](const Node& n) {
        Eigen::Index at = 0;
        for (const auto& x : xs) {
            if (x->requires_grad) x->accumulate(n.grad.middleCols(at, x->val.cols()));
            at += x->val.cols();
        }
    });
}

Var Graph::softmax_rows(const Var& a, const Mat* additive_mask) {
    Mat z = a->val;
    if (additive_mask) z += *additive_mask;
    Mat out(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        double mx = z.row(r).maxCoeff();
        Eigen::ArrayXd e = (z.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return emit(std::move(out), {a}, [a](const Node& n) {
        if (!a->requires_grad) return;
        Mat dx(n.val.rows(), n.val.cols());
        for (Eigen::Index r = 0; r < n.val.rows(); ++r) {
            double dot = n.grad.row(r).dot(n.val.row(r));
            dx.row(r) = n.val.row(r).cwiseProduct(n.grad.row(r) - Mat::Constant(1, n.val.cols(), dot));
        }
        a->accumulate(dx);
    });
}

Var Graph::layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
    const Mat& x = a->val;
    Eigen::Index d = x.cols();
    Mat xhat(x.rows(), d);
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mu = x.row(r).mean();
        double var = (x.row(r).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        inv_std(r) = is;
        xhat.row(r) = (x.row(r).array() - mu).matrix() * is;
    }
    Mat out = (xhat.array().rowwise() * gamma->val.row(0).array()).matrix().rowwise() + beta->val.row(0);
    return emit(std::move(out), {a, gamma, beta},
                [a, gamma, beta, xhat, inv_std](const Node& n) {
                    Eigen::Index d = xhat.cols();
                    if (gamma->requires_grad) gamma->accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
                    if (beta->requires_grad) beta->accumulate(n.grad.colwise().sum());
                    if (!a->requires_grad) return;
                    Mat dx(xhat.rows(), d);
                    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                        Eigen::RowVectorXd dxh = n.grad.row(r).cwiseProduct(gamma->val.row(0));
                        double m1 = dxh.mean();
                        double m2 = dxh.cwiseProduct(xhat.row(r)).mean();
                        dx.row(r) = inv_std(r) *
                                    (dxh.array() - m1 - xhat.row(r).array() * m2).matrix();
                    }
                    a->accumulate(dx);
                });
}

Var Graph::gelu(const Var& a) {
    const Mat& x = a->val;
    Mat out = x.unaryExpr([](double v) {
        double u = kGeluC * (v + kGeluA * v * v * v);
        return 0.5 * v * (1.0 + std::tanh(u));
    });
    return emit(std::move(out), {a}, [a](const Node& n) {
        if (!a->requires_grad) return;
        Mat dx = a->val.unaryExpr([](double v) {
            double u = kGeluC * (v + kGeluA * v * v * v);
            double t = std::tanh(u);
            double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
        });
        a->accumulate(dx.cwiseProduct(n.grad));
    });
}

Var Graph::log_sigmoid(const Var& a) {
    const Mat& x = a->val;
    Mat out = x.unaryExpr([](double v) {
        // stable: log sigma(v) = -softplus(-v)
        return v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
    });
    return emit(std::move(out), {a}, [a](const Node& n) {
        if (!a->requires_grad) return;
        Mat dx = a->val.unaryExpr([](double v) {
            // d/dv log sigma(v) = sigma(-v)
            return v >= 0.0 ? std::exp(-v) / (1.0 + std::exp(-v)) : 1.0 / (1.0 + std::exp(v));
        });
        a->accumulate(dx.cwiseProduct(n.grad));
    });
}

Var Graph::sum(const Var& a) {
    Mat out = Mat::Constant(1, 1, a->val.sum());
    return emit(std::move(out), {a}, [a](const Node& n) {
        if (a->requires_grad)
            a->accumulate(Mat::Constant(a->val.rows(), a->val.cols(), n.grad(0, 0)));
    });
}

Var Graph::cross_entropy(const Var& logits, const std::vector<int>& targets) {
    const Mat& z = logits->val;
    if (static_cast<Eigen::Index>(targets.size()) != z.rows())
        throw std::invalid_argument("cross_entropy: target count != logit rows");
    Mat probs(z.rows(), z.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        int y = targets[static_cast<size_t>(r)];
        if (y < 0 || y >= z.cols()) throw std::out_of_range("cross_entropy: target id outside vocab");
        double mx = z.row(r).maxCoeff();
        Eigen::ArrayXd e = (z.row(r).array() - mx).exp();
        double Z = e.sum();
        probs.row(r) = (e / Z).matrix();
        total += std::log(Z) + mx - z(r, y);
    }
    Mat out = Mat::Constant(1, 1, total);
    return emit(std::move(out), {logits}, [logits, probs, targets](const Node& n) {
        if (!logits->requires_grad) return;
        Mat dz = probs;
        for (Eigen::Index r = 0; r < dz.rows(); ++r) dz(r, targets[static_cast<size_t>(r)]) -= 1.0;
        logits->accumulate(dz * n.grad(0, 0));
    });
}

void Graph::backward(const Var& loss) {
    if (!grad_enabled_) throw std::logic_error("backward on a no-grad graph");
    if (loss->val.rows() != 1 || loss->val.cols() != 1)
        throw std::invalid_argument("backward: loss must be 1x1");
    loss->grad = Mat::Constant(1, 1, 1.0);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.size() == 0 || !n.backfn) continue;
        n.backfn(n);
    }
}

Var ParamStore::add(const std::string& name, Mat value) {
    for (const auto& [k, v] : items_)
        if (k == name) throw std::logic_error("duplicate parameter name: " + name);
    Var v = make_param(std::move(value));
    items_.emplace_back(name, v);
    return v;
}

Var ParamStore::get(const std::string& name) const {
    for (const auto& [k, v] : items_)
        if (k == name) return v;
    throw std::out_of_range("no such parameter: " + name);
}

void ParamStore::zero_grad() {
    for (auto& [k, v] : items_) v->grad.resize(0, 0);
}

size_t ParamStore::total_size() const {
    size_t n = 0;
    for (const auto& [k, v] : items_) n += static_cast<size_t>(v->val.size());
    return n;
}

bool ParamStore::has_nan() const {
    for (const auto& [k, v] : items_)
        if (!v->val.allFinite()) return true;
    return false;
}

void Adam::step(ParamStore& params, double lr_override) {
    double lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
    auto& items = params.items();
    if (m_.empty()) {
        m_.resize(items.size());
        v_.resize(items.size());
        for (size_t i = 0; i < items.size(); ++i) {
            m_[i] = Mat::Zero(items[i].second->val.rows(), items[i].second->val.cols());
            v_[i] = Mat::Zero(items[i].second->val.rows(), items[i].second->val.cols());
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < items.size(); ++i) {
        Var p = items[i].second;
        Mat g;
        if (p->grad.size() == 0)
            g = Mat::Zero(p->val.rows(), p->val.cols());
        else
            g = p->grad;
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        Mat mhat = m_[i] / bc1;
        Mat vhat = v_[i] / bc2;
        p->val -= lr * mhat.cwiseQuotient(vhat.cwiseSqrt() + Mat::Constant(vhat.rows(), vhat.cols(), cfg_.eps));
    }
}

Mat glorot(int rows, int cols, Rng& rng) {
    double limit = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform_real(-limit, limit);
    return m;
}

Mat uniform_init(int rows, int cols, double scale, Rng& rng) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform_real(-scale, scale);
    return m;
}

}  // namespace rankae::nn
