#include "anfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "anfm/errors.hpp"

namespace anfm {
namespace {

thread_local Tape* g_tape = nullptr;

using NodePtr = std::shared_ptr<TensorNode>;

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (g_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite output");
  }
}

Tensor make_output(int rows, int cols, std::vector<double> value, bool rec, const char* op) {
  check_finite(value, op);
  Tensor out(rows, cols, std::move(value));
  out.node()->requires_grad = rec;
  out.node()->leaf = !rec;
  return out;
}

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

// Gradient of out, or nullptr when nothing flowed into it.
const std::vector<double>* out_grad(const NodePtr& out) { return out->grad.empty() ? nullptr : &out->grad; }

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::size_t idx(int i, int j, int cols) { return static_cast<std::size_t>(i) * cols + j; }

}  // namespace

Tensor::Tensor(int rows, int cols, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<TensorNode>()) {
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("Tensor: data size does not match shape");
  }
  node_->rows = rows;
  node_->cols = cols;
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(int rows, int cols) { return Tensor(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0)); }

Tensor Tensor::scalar(double v) { return Tensor(1, 1, {v}); }

Tensor Tensor::parameter(int rows, int cols, std::vector<double> data) { return Tensor(rows, cols, std::move(data), true); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor is not a scalar");
  return node_->value[0];
}

Tape::Tape() : previous_(g_tape) { g_tape = this; }

Tape::~Tape() { g_tape = previous_; }

Tape* Tape::current() { return g_tape; }

std::vector<double>& Tape::grad(TensorNode* node) {
  std::vector<double>& g = node->leaf ? leaf_grads_[node] : node->grad;
  if (g.empty()) g.assign(node->value.size(), 0.0);
  return g;
}

const std::vector<double>* Tape::leaf_grad(const Tensor& t) const {
  auto it = leaf_grads_.find(t.node());
  return it == leaf_grads_.end() ? nullptr : &it->second;
}

void Tape::backward(const Tensor& loss) {
  if (done_) throw std::logic_error("backward called twice on one tape");
  if (loss.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  done_ = true;
  if (!loss.requires_grad()) return;
  grad(loss.node())[0] = 1.0;
  Tape* saved = g_tape;
  g_tape = nullptr;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)(*this);
  g_tape = saved;
}

NoGrad::NoGrad() : saved_(g_tape) { g_tape = nullptr; }

NoGrad::~NoGrad() { g_tape = saved_; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul", "inner dimensions differ");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (int i = 0; i < m; ++i) {
    double* row = &out[idx(i, 0, n)];
    for (int l = 0; l < k; ++l) {
      const double av = A[idx(i, l, k)];
      const double* brow = B + idx(l, 0, n);
      for (int j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  const bool rec = recording({&a, &b});
  Tensor t = make_output(m, n, std::move(out), rec, "matmul");
  if (rec) {
    g_tape->record([a = a.shared(), b = b.shared(), o = t.shared(), m, k, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      if (a->requires_grad) {
        auto& ga = tape.grad(a.get());
        // ga += go * b^T, accumulated as axpy over rows of b^T so the inner loop vectorizes.
        std::vector<double> bt(static_cast<std::size_t>(n) * k);
        for (int l = 0; l < k; ++l) {
          for (int j = 0; j < n; ++j) bt[idx(j, l, k)] = b->value[idx(l, j, n)];
        }
        for (int i = 0; i < m; ++i) {
          double* gai = &ga[idx(i, 0, k)];
          for (int j = 0; j < n; ++j) {
            const double g = (*go)[idx(i, j, n)];
            if (g == 0.0) continue;
            const double* btj = &bt[idx(j, 0, k)];
            for (int l = 0; l < k; ++l) gai[l] += g * btj[l];
          }
        }
      }
      if (b->requires_grad) {
        auto& gb = tape.grad(b.get());
        for (int i = 0; i < m; ++i) {
          for (int l = 0; l < k; ++l) {
            const double av = a->value[idx(i, l, k)];
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) gb[idx(l, j, n)] += av * (*go)[idx(i, j, n)];
          }
        }
      }
    });
  }
  return t;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt", "inner dimensions differ");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* ar = &a.data()[idx(i, 0, k)];
    for (int j = 0; j < n; ++j) {
      const double* br = &b.data()[idx(j, 0, k)];
      double s = 0.0;
      for (int l = 0; l < k; ++l) s += ar[l] * br[l];
      out[idx(i, j, n)] = s;
    }
  }
  const bool rec = recording({&a, &b});
  Tensor t = make_output(m, n, std::move(out), rec, "matmul_nt");
  if (rec) {
    g_tape->record([a = a.shared(), b = b.shared(), o = t.shared(), m, k, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      if (a->requires_grad) {
        auto& ga = tape.grad(a.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = (*go)[idx(i, j, n)];
            if (g == 0.0) continue;
            for (int l = 0; l < k; ++l) ga[idx(i, l, k)] += g * b->value[idx(j, l, k)];
          }
        }
      }
      if (b->requires_grad) {
        auto& gb = tape.grad(b.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = (*go)[idx(i, j, n)];
            if (g == 0.0) continue;
            for (int l = 0; l < k; ++l) gb[idx(j, l, k)] += g * a->value[idx(i, l, k)];
          }
        }
      }
    });
  }
  return t;
}

Tensor transpose(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out[idx(j, i, m)] = a.data()[idx(i, j, n)];
  }
  const bool rec = recording({&a});
  Tensor t = make_output(n, m, std::move(out), rec, "transpose");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), m, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) ga[idx(i, j, n)] += (*go)[idx(j, i, m)];
      }
    });
  }
  return t;
}

Tensor reshape(const Tensor& a, int rows, int cols) {
  require(static_cast<std::size_t>(rows) * cols == a.size(), "reshape", "element count differs");
  const bool rec = recording({&a});
  Tensor t = make_output(rows, cols, a.data(), rec, "reshape");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared()](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i];
    });
  }
  return t;
}

namespace {

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Binary op, const char* name) {
  const bool row = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  require(row || (a.rows() == b.rows() && a.cols() == b.cols()), name, "shape mismatch");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = a.data()[idx(i, j, n)];
      const double y = b.data()[row ? j : idx(i, j, n)];
      out[idx(i, j, n)] = op == Binary::kAdd ? x + y : op == Binary::kSub ? x - y : x * y;
    }
  }
  const bool rec = recording({&a, &b});
  Tensor t = make_output(m, n, std::move(out), rec, name);
  if (rec) {
    g_tape->record([a = a.shared(), b = b.shared(), o = t.shared(), m, n, row, op](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      if (a->requires_grad) {
        auto& ga = tape.grad(a.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = (*go)[idx(i, j, n)];
            ga[idx(i, j, n)] += op == Binary::kMul ? g * b->value[row ? j : idx(i, j, n)] : g;
          }
        }
      }
      if (b->requires_grad) {
        auto& gb = tape.grad(b.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const double g = (*go)[idx(i, j, n)];
            const double d = op == Binary::kMul ? g * a->value[idx(i, j, n)] : op == Binary::kSub ? -g : g;
            gb[row ? j : idx(i, j, n)] += d;
          }
        }
      }
    });
  }
  return t;
}

// Elementwise map with derivative expressed through input x and output y.
template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx, const char* name) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.data()[i]);
  const bool rec = recording({&a});
  Tensor t = make_output(a.rows(), a.cols(), std::move(out), rec, name);
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), dfdx](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += (*go)[i] * dfdx(a->value[i], o->value[i]);
    });
  }
  return t;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kMul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; }, "scale");
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, "exp");
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return -softplus(-x); }, [](double x, double) { return stable_sigmoid(-x); },
               "log_sigmoid");
}

namespace {

enum class RowNorm { kSoftmax, kLogSoftmax, kLogSumExp };

Tensor row_norm(const Tensor& a, RowNorm kind, const char* name) {
  const int m = a.rows(), n = a.cols();
  require(n > 0, name, "empty rows");
  std::vector<double> prob(a.size()), lse(m);
  for (int i = 0; i < m; ++i) {
    const double* x = &a.data()[idx(i, 0, n)];
    const double mx = *std::max_element(x, x + n);
    double s = 0.0;
    double* p = &prob[idx(i, 0, n)];
    for (int j = 0; j < n; ++j) s += p[j] = std::exp(x[j] - mx);
    lse[i] = mx + std::log(s);
    for (int j = 0; j < n; ++j) p[j] /= s;
  }
  std::vector<double> out;
  int out_cols = n;
  if (kind == RowNorm::kSoftmax) {
    out = prob;
  } else if (kind == RowNorm::kLogSoftmax) {
    out.resize(a.size());
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) out[idx(i, j, n)] = a.data()[idx(i, j, n)] - lse[i];
    }
  } else {
    out = lse;
    out_cols = 1;
  }
  const bool rec = recording({&a});
  Tensor t = make_output(m, out_cols, std::move(out), rec, name);
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), prob = std::move(prob), m, n, kind](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (int i = 0; i < m; ++i) {
        if (kind == RowNorm::kLogSumExp) {
          for (int j = 0; j < n; ++j) ga[idx(i, j, n)] += (*go)[i] * prob[idx(i, j, n)];
        } else if (kind == RowNorm::kLogSoftmax) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += (*go)[idx(i, j, n)];
          for (int j = 0; j < n; ++j) ga[idx(i, j, n)] += (*go)[idx(i, j, n)] - prob[idx(i, j, n)] * s;
        } else {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += (*go)[idx(i, j, n)] * prob[idx(i, j, n)];
          for (int j = 0; j < n; ++j) ga[idx(i, j, n)] += prob[idx(i, j, n)] * ((*go)[idx(i, j, n)] - s);
        }
      }
    });
  }
  return t;
}

}  // namespace

Tensor softmax_rows(const Tensor& a) { return row_norm(a, RowNorm::kSoftmax, "softmax_rows"); }
Tensor log_softmax_rows(const Tensor& a) { return row_norm(a, RowNorm::kLogSoftmax, "log_softmax_rows"); }
Tensor logsumexp_rows(const Tensor& a) { return row_norm(a, RowNorm::kLogSumExp, "logsumexp_rows"); }

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const int m = x.rows(), n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n, "layernorm",
          "gain/bias must be [1, cols]");
  std::vector<double> xhat(x.size()), rstd(m), out(x.size());
  for (int i = 0; i < m; ++i) {
    const double* r = &x.data()[idx(i, 0, n)];
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += r[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (r[j] - mean) * (r[j] - mean);
    var /= n;
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) {
      xhat[idx(i, j, n)] = (r[j] - mean) * rstd[i];
      out[idx(i, j, n)] = xhat[idx(i, j, n)] * gain.data()[j] + bias.data()[j];
    }
  }
  const bool rec = recording({&x, &gain, &bias});
  Tensor t = make_output(m, n, std::move(out), rec, "layernorm");
  if (rec) {
    g_tape->record([x = x.shared(), g = gain.shared(), b = bias.shared(), o = t.shared(), xhat = std::move(xhat),
                    rstd = std::move(rstd), m, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      if (g->requires_grad) {
        auto& gg = tape.grad(g.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) gg[j] += (*go)[idx(i, j, n)] * xhat[idx(i, j, n)];
        }
      }
      if (b->requires_grad) {
        auto& gb = tape.grad(b.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) gb[j] += (*go)[idx(i, j, n)];
        }
      }
      if (x->requires_grad) {
        auto& gx = tape.grad(x.get());
        for (int i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (int j = 0; j < n; ++j) {
            const double d = (*go)[idx(i, j, n)] * g->value[j];
            mean_d += d;
            mean_dx += d * xhat[idx(i, j, n)];
          }
          mean_d /= n;
          mean_dx /= n;
          for (int j = 0; j < n; ++j) {
            const double d = (*go)[idx(i, j, n)] * g->value[j];
            gx[idx(i, j, n)] += rstd[i] * (d - mean_d - xhat[idx(i, j, n)] * mean_dx);
          }
        }
      }
    });
  }
  return t;
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  const bool rec = recording({&a});
  Tensor t = make_output(1, 1, {s}, rec, "sum_all");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared()](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (double& g : ga) g += (*go)[0];
    });
  }
  return t;
}

Tensor gather_rows(const Tensor& a, std::vector<int> index) {
  const int n = a.cols();
  std::vector<double> out(index.size() * n);
  for (std::size_t r = 0; r < index.size(); ++r) {
    require(index[r] >= 0 && index[r] < a.rows(), "gather_rows", "index out of range");
    std::copy_n(&a.data()[idx(index[r], 0, n)], n, &out[r * n]);
  }
  const bool rec = recording({&a});
  Tensor t = make_output(static_cast<int>(index.size()), n, std::move(out), rec, "gather_rows");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), index = std::move(index), n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (std::size_t r = 0; r < index.size(); ++r) {
        for (int j = 0; j < n; ++j) ga[idx(index[r], j, n)] += (*go)[r * n + j];
      }
    });
  }
  return t;
}

Tensor slice_rows(const Tensor& a, int begin, int end) {
  require(0 <= begin && begin <= end && end <= a.rows(), "slice_rows", "range out of bounds");
  const int n = a.cols();
  std::vector<double> out(a.data().begin() + idx(begin, 0, n), a.data().begin() + idx(end, 0, n));
  const bool rec = recording({&a});
  Tensor t = make_output(end - begin, n, std::move(out), rec, "slice_rows");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), begin, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (std::size_t i = 0; i < go->size(); ++i) ga[idx(begin, 0, n) + i] += (*go)[i];
    });
  }
  return t;
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
  require(0 <= begin && begin <= end && end <= a.cols(), "slice_cols", "range out of bounds");
  const int m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<double> out(static_cast<std::size_t>(m) * w);
  for (int i = 0; i < m; ++i) std::copy_n(&a.data()[idx(i, begin, n)], w, &out[idx(i, 0, w)]);
  const bool rec = recording({&a});
  Tensor t = make_output(m, w, std::move(out), rec, "slice_cols");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), begin, m, n, w](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < w; ++j) ga[idx(i, begin + j, n)] += (*go)[idx(i, j, w)];
      }
    });
  }
  return t;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const int m = parts[0].rows();
  int n = 0;
  bool rec = false;
  for (const Tensor& p : parts) {
    require(p.rows() == m, "concat_cols", "row counts differ");
    n += p.cols();
    rec = rec || recording({&p});
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  int offset = 0;
  for (const Tensor& p : parts) {
    for (int i = 0; i < m; ++i) std::copy_n(&p.data()[idx(i, 0, p.cols())], p.cols(), &out[idx(i, offset, n)]);
    offset += p.cols();
  }
  Tensor t = make_output(m, n, std::move(out), rec, "concat_cols");
  if (rec) {
    std::vector<NodePtr> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.shared());
    g_tape->record([nodes = std::move(nodes), o = t.shared(), m, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      int off = 0;
      for (const auto& p : nodes) {
        if (p->requires_grad) {
          auto& gp = tape.grad(p.get());
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < p->cols; ++j) gp[idx(i, j, p->cols)] += (*go)[idx(i, off + j, n)];
          }
        }
        off += p->cols;
      }
    });
  }
  return t;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const int n = parts[0].cols();
  int m = 0;
  bool rec = false;
  for (const Tensor& p : parts) {
    require(p.cols() == n, "concat_rows", "column counts differ");
    m += p.rows();
    rec = rec || recording({&p});
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m) * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor t = make_output(m, n, std::move(out), rec, "concat_rows");
  if (rec) {
    std::vector<NodePtr> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.shared());
    g_tape->record([nodes = std::move(nodes), o = t.shared()](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      std::size_t off = 0;
      for (const auto& p : nodes) {
        if (p->requires_grad) {
          auto& gp = tape.grad(p.get());
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += (*go)[off + i];
        }
        off += p->value.size();
      }
    });
  }
  return t;
}

Tensor segment_mean(const Tensor& a, std::shared_ptr<const std::vector<int>> offsets, bool canonical) {
  const auto& off = *offsets;
  require(!off.empty() && off.front() == 0 && off.back() == a.rows(), "segment_mean", "offsets do not cover rows");
  const int segs = static_cast<int>(off.size()) - 1, n = a.cols();
  std::vector<double> out(static_cast<std::size_t>(segs) * n, 0.0), column;
  for (int s = 0; s < segs; ++s) {
    const int len = off[s + 1] - off[s];
    if (len <= 0) continue;
    for (int j = 0; j < n; ++j) {
      column.clear();
      for (int r = off[s]; r < off[s + 1]; ++r) column.push_back(a.data()[idx(r, j, n)]);
      if (canonical) std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      out[idx(s, j, n)] = sum / len;
    }
  }
  const bool rec = recording({&a});
  Tensor t = make_output(segs, n, std::move(out), rec, "segment_mean");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), offsets = std::move(offsets), segs, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      const auto& off = *offsets;
      for (int s = 0; s < segs; ++s) {
        const int len = off[s + 1] - off[s];
        for (int r = off[s]; r < off[s + 1]; ++r) {
          for (int j = 0; j < n; ++j) ga[idx(r, j, n)] += (*go)[idx(s, j, n)] / len;
        }
      }
    });
  }
  return t;
}

Tensor neighbor_sum(const Tensor& a, std::shared_ptr<const RowGraph> graph, bool canonical) {
  const RowGraph& rg = *graph;
  require(static_cast<int>(rg.offsets.size()) == a.rows() + 1, "neighbor_sum", "graph does not match rows");
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.size(), 0.0), addends;
  for (int i = 0; i < m; ++i) {
    double* dst = &out[idx(i, 0, n)];
    if (canonical) {
      for (int j = 0; j < n; ++j) {
        addends.clear();
        for (int e = rg.offsets[i]; e < rg.offsets[i + 1]; ++e) addends.push_back(a.data()[idx(rg.indices[e], j, n)]);
        std::sort(addends.begin(), addends.end());
        double s = 0.0;
        for (double v : addends) s += v;
        dst[j] = s;
      }
    } else {
      for (int e = rg.offsets[i]; e < rg.offsets[i + 1]; ++e) {
        const double* src = &a.data()[idx(rg.indices[e], 0, n)];
        for (int j = 0; j < n; ++j) dst[j] += src[j];
      }
    }
  }
  const bool rec = recording({&a});
  Tensor t = make_output(m, n, std::move(out), rec, "neighbor_sum");
  if (rec) {
    g_tape->record([a = a.shared(), o = t.shared(), graph = std::move(graph), m, n](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& ga = tape.grad(a.get());
      for (int i = 0; i < m; ++i) {
        for (int e = graph->offsets[i]; e < graph->offsets[i + 1]; ++e) {
          const int src = graph->indices[e];
          for (int j = 0; j < n; ++j) ga[idx(src, j, n)] += (*go)[idx(i, j, n)];
        }
      }
    });
  }
  return t;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 std::shared_ptr<const AttentionGroups> groups) {
  const int d = q.cols(), dv = v.cols();
  require(k.cols() == d && k.rows() == v.rows(), "attention", "q/k/v shapes disagree");
  require(heads >= 1 && d % heads == 0 && dv % heads == 0, "attention", "head count must divide widths");
  const int dh = d / heads, dvh = dv / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> out(static_cast<std::size_t>(q.rows()) * dv, 0.0);
  std::vector<double> probs;  // per group, head, query: allowed keys
  const double* Q = q.data().data();
  const double* K = k.data().data();
  const double* V = v.data().data();
  std::vector<double> s;
  for (const AttentionGroup& g : *groups) {
    const int nq = static_cast<int>(g.query_rows.size()), nk = static_cast<int>(g.key_rows.size());
    for (int h = 0; h < heads; ++h) {
      for (int a = 0; a < nq; ++a) {
        const int allowed = g.causal ? std::clamp(a + 1 + nk - nq, 0, nk) : nk;
        if (allowed == 0) continue;
        const double* qa = Q + idx(g.query_rows[a], h * dh, d);
        s.assign(allowed, 0.0);
        double mx = -INFINITY;
        for (int b = 0; b < allowed; ++b) {
          const double* kb = K + idx(g.key_rows[b], h * dh, d);
          double dot = 0.0;
          for (int c = 0; c < dh; ++c) dot += qa[c] * kb[c];
          s[b] = dot * inv;
          mx = std::max(mx, s[b]);
        }
        double z = 0.0;
        for (int b = 0; b < allowed; ++b) {
          s[b] = std::exp(s[b] - mx);
          z += s[b];
        }
        double* dst = &out[idx(g.query_rows[a], h * dvh, dv)];
        for (int b = 0; b < allowed; ++b) {
          const double p = s[b] / z;
          probs.push_back(p);
          const double* vb = V + idx(g.key_rows[b], h * dvh, dv);
          for (int c = 0; c < dvh; ++c) dst[c] += p * vb[c];
        }
      }
    }
  }
  const bool rec = recording({&q, &k, &v});
  Tensor t = make_output(q.rows(), dv, std::move(out), rec, "attention");
  if (rec) {
    g_tape->record([q = q.shared(), k = k.shared(), v = v.shared(), o = t.shared(), groups = std::move(groups),
                    probs = std::move(probs), heads, d, dv, dh, dvh, inv](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      std::vector<double>* gq = q->requires_grad ? &tape.grad(q.get()) : nullptr;
      std::vector<double>* gk = k->requires_grad ? &tape.grad(k.get()) : nullptr;
      std::vector<double>* gv = v->requires_grad ? &tape.grad(v.get()) : nullptr;
      std::size_t pi = 0;
      std::vector<double> dp;
      for (const AttentionGroup& g : *groups) {
        const int nq = static_cast<int>(g.query_rows.size()), nk = static_cast<int>(g.key_rows.size());
        for (int h = 0; h < heads; ++h) {
          for (int a = 0; a < nq; ++a) {
            const int allowed = g.causal ? std::clamp(a + 1 + nk - nq, 0, nk) : nk;
            if (allowed == 0) continue;
            const int qr = g.query_rows[a];
            const double* goa = &(*go)[idx(qr, h * dvh, dv)];
            dp.assign(allowed, 0.0);
            double dot_pd = 0.0;
            for (int b = 0; b < allowed; ++b) {
              const int kr = g.key_rows[b];
              const double p = probs[pi + b];
              const double* vb = &v->value[idx(kr, h * dvh, dv)];
              double s = 0.0;
              for (int c = 0; c < dvh; ++c) s += goa[c] * vb[c];
              dp[b] = s;
              dot_pd += p * s;
              if (gv) {
                double* gvb = &(*gv)[idx(kr, h * dvh, dv)];
                for (int c = 0; c < dvh; ++c) gvb[c] += p * goa[c];
              }
            }
            for (int b = 0; b < allowed; ++b) {
              const int kr = g.key_rows[b];
              const double ds = probs[pi + b] * (dp[b] - dot_pd) * inv;
              if (ds == 0.0) continue;
              if (gq) {
                double* gqa = &(*gq)[idx(qr, h * dh, d)];
                const double* kb = &k->value[idx(kr, h * dh, d)];
                for (int c = 0; c < dh; ++c) gqa[c] += ds * kb[c];
              }
              if (gk) {
                double* gkb = &(*gk)[idx(kr, h * dh, d)];
                const double* qa = &q->value[idx(qr, h * dh, d)];
                for (int c = 0; c < dh; ++c) gkb[c] += ds * qa[c];
              }
            }
            pi += allowed;
          }
        }
      }
    });
  }
  return t;
}

Tensor pair_logits(const Tensor& x, const Tensor& y, int n) {
  require(x.rows() == y.rows() && x.cols() == y.cols(), "pair_logits", "x and y shapes differ");
  require(n >= 1 && x.rows() % n == 0, "pair_logits", "rows must be a multiple of n");
  const int blocks = x.rows() / n, d = x.cols();
  std::vector<double> out(static_cast<std::size_t>(x.rows()) * n);
  const double* X = x.data().data();
  const double* Y = y.data().data();
  for (int b = 0; b < blocks; ++b) {
    const int r0 = b * n;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        const double* xi = X + idx(r0 + i, 0, d);
        const double* xj = X + idx(r0 + j, 0, d);
        const double* yi = Y + idx(r0 + i, 0, d);
        const double* yj = Y + idx(r0 + j, 0, d);
        for (int c = 0; c < d; ++c) s += xi[c] * yj[c] + yi[c] * xj[c];
        out[idx(r0 + i, j, n)] = out[idx(r0 + j, i, n)] = 0.5 * s;
      }
    }
  }
  const bool rec = recording({&x, &y});
  Tensor t = make_output(x.rows(), n, std::move(out), rec, "pair_logits");
  if (rec) {
    g_tape->record([x = x.shared(), y = y.shared(), o = t.shared(), n, blocks, d](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      std::vector<double>* gx = x->requires_grad ? &tape.grad(x.get()) : nullptr;
      std::vector<double>* gy = y->requires_grad ? &tape.grad(y.get()) : nullptr;
      for (int b = 0; b < blocks; ++b) {
        const int r0 = b * n;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            // z_ij = z_ji, so the symmetric part of the incoming gradient is what matters.
            const double g = 0.5 * ((*go)[idx(r0 + i, j, n)] + (*go)[idx(r0 + j, i, n)]);
            if (g == 0.0) continue;
            if (gx) {
              double* dst = &(*gx)[idx(r0 + i, 0, d)];
              const double* src = &y->value[idx(r0 + j, 0, d)];
              for (int c = 0; c < d; ++c) dst[c] += g * src[c];
            }
            if (gy) {
              double* dst = &(*gy)[idx(r0 + i, 0, d)];
              const double* src = &x->value[idx(r0 + j, 0, d)];
              for (int c = 0; c < d; ++c) dst[c] += g * src[c];
            }
          }
        }
      }
    });
  }
  return t;
}

Tensor bernoulli_loglik(const Tensor& logits, int n,
                        std::shared_ptr<const std::vector<std::vector<std::uint8_t>>> targets) {
  require(logits.cols() == n && n >= 1 && logits.rows() % n == 0, "bernoulli_loglik", "logits must be [B n, n]");
  const int blocks = logits.rows() / n;
  require(!targets->empty() && blocks % static_cast<int>(targets->size()) == 0, "bernoulli_loglik",
          "block count must be a multiple of the target count");
  const std::size_t nt = targets->size();
  std::vector<double> out(blocks, 0.0);
  for (int b = 0; b < blocks; ++b) {
    const auto& y = (*targets)[b % nt];
    require(y.size() == static_cast<std::size_t>(n) * n, "bernoulli_loglik", "target must be n x n");
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double z = logits.data()[idx(b * n + i, j, n)];
        s += (y[idx(i, j, n)] ? z : 0.0) - softplus(z);
      }
    }
    out[b] = s;
  }
  const bool rec = recording({&logits});
  Tensor t = make_output(1, blocks, std::move(out), rec, "bernoulli_loglik");
  if (rec) {
    g_tape->record([l = logits.shared(), o = t.shared(), targets = std::move(targets), n, blocks, nt](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& gl = tape.grad(l.get());
      for (int b = 0; b < blocks; ++b) {
        const auto& y = (*targets)[b % nt];
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) {
            const double z = l->value[idx(b * n + i, j, n)];
            gl[idx(b * n + i, j, n)] += (*go)[b] * ((y[idx(i, j, n)] ? 1.0 : 0.0) - stable_sigmoid(z));
          }
        }
      }
    });
  }
  return t;
}

Tensor ppo_surrogate(const Tensor& logp, const std::vector<double>& logp_old, const std::vector<double>& adv,
                     double eps) {
  const std::size_t T = logp.size();
  require(logp_old.size() == T && adv.size() == T, "ppo_surrogate", "length mismatch");
  std::vector<double> dlogp(T, 0.0);
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double u = std::exp(logp.data()[t] - logp_old[t]);
    if (!std::isfinite(u)) throw NumericError("ppo_surrogate: non-finite probability ratio");
    const double g = adv[t];
    const double clipped = std::clamp(u, 1.0 - eps, 1.0 + eps);
    const double l1 = -u * g, l2 = -clipped * g;
    if (l1 >= l2) {
      loss += l1;
      dlogp[t] = -u * g;
    } else {
      loss += l2;
      dlogp[t] = (u > 1.0 - eps && u < 1.0 + eps) ? -u * g : 0.0;
    }
  }
  const bool rec = recording({&logp});
  Tensor t = make_output(1, 1, {loss}, rec, "ppo_surrogate");
  if (rec) {
    g_tape->record([l = logp.shared(), o = t.shared(), dlogp = std::move(dlogp)](Tape& tape) {
      const auto* go = out_grad(o);
      if (!go) return;
      auto& gl = tape.grad(l.get());
      for (std::size_t i = 0; i < dlogp.size(); ++i) gl[i] += (*go)[0] * dlogp[i];
    });
  }
  return t;
}

}  // namespace anfm
