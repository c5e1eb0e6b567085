#include "ssa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ssa {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

Tensor Tensor::zeros(Shape s) {
  std::vector<double> v(numel(s), 0.0);
  return Tensor(std::move(s), std::move(v));
}

std::size_t Tensor::rows() const {
  if (shape.size() != 2)
    throw DimensionError("rows() on non-matrix " + shape_str(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2)
    throw DimensionError("cols() on non-matrix " + shape_str(shape));
  return shape[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return values[r * cols() + c];
}

double Tensor::item() const {
  if (!is_scalar())
    throw ContractError("item() on non-scalar tensor " + shape_str(shape));
  return values[0];
}

int Graph::push_node(Shape shape, std::vector<double> values, bool is_leaf) {
  const int id = static_cast<int>(shapes_.size());
  shapes_.push_back(std::move(shape));
  values_.push_back(std::move(values));
  is_leaf_.push_back(is_leaf);
  if (is_leaf) leaves_.push_back(id);
  return id;
}

Tensor Graph::wrap(int node) const {
  Tensor t(shapes_[node], values_[node]);
  t.node = node;
  return t;
}

Tensor Graph::leaf(const Tensor& t) {
  return wrap(push_node(t.shape, t.values, true));
}

Tensor Graph::constant(const Tensor& t) {
  return wrap(push_node(t.shape, t.values, false));
}

int Graph::ensure_node(const Tensor& t) {
  if (t.node >= 0) {
    if (static_cast<std::size_t>(t.node) >= shapes_.size())
      throw ContractError("tensor belongs to a different graph");
    return t.node;
  }
  return push_node(t.shape, t.values, false);
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul shapes " + shape_str(a.shape) + " x " +
                         shape_str(b.shape));
  }
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  std::vector<double> out(r * c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a.values.data() + i * k;
    double* oi = out.data() + i * c;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b.values.data() + kk * c;
      for (std::size_t j = 0; j < c; ++j) oi[j] += av * bk[j];
    }
  }
  const int na = ensure_node(a), nb = ensure_node(b);
  const int no = push_node({r, c}, std::move(out), false);
  records_.push_back({Op::kMatMul, na, nb, no});
  return wrap(no);
}

Tensor Graph::binary(Op op, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.is_scalar(), b_scalar = b.is_scalar();
  if (a.shape != b.shape && !a_scalar && !b_scalar) {
    throw DimensionError("elementwise shapes " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
  }
  const Tensor& big = a_scalar ? b : a;
  const std::size_t n = big.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? a.values[0] : a.values[i];
    const double y = b_scalar ? b.values[0] : b.values[i];
    switch (op) {
      case Op::kAdd: out[i] = x + y; break;
      case Op::kSub: out[i] = x - y; break;
      case Op::kMul: out[i] = x * y; break;
      case Op::kDiv:
        if (y == 0.0) throw DomainError("elementwise division by zero");
        out[i] = x / y;
        break;
      default: throw ContractError("bad binary op");
    }
  }
  const int na = ensure_node(a), nb = ensure_node(b);
  const int no = push_node(big.shape, std::move(out), false);
  records_.push_back({op, na, nb, no});
  return wrap(no);
}

Tensor Graph::add(const Tensor& a, const Tensor& b) { return binary(Op::kAdd, a, b); }
Tensor Graph::sub(const Tensor& a, const Tensor& b) { return binary(Op::kSub, a, b); }
Tensor Graph::mul(const Tensor& a, const Tensor& b) { return binary(Op::kMul, a, b); }
Tensor Graph::div(const Tensor& a, const Tensor& b) { return binary(Op::kDiv, a, b); }

Tensor Graph::unary(Op op, const Tensor& a, double s0, double s1) {
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.values[i];
    switch (op) {
      case Op::kAddScalar: out[i] = x + s0; break;
      case Op::kMulScalar: out[i] = x * s0; break;
      case Op::kPowScalar:
        if (x < 0.0)
          throw DomainError("pow of negative base " + std::to_string(x));
        out[i] = std::pow(x, s0);
        break;
      case Op::kExp: out[i] = std::exp(x); break;
      case Op::kLog:
        if (x <= 0.0)
          throw DomainError("log of non-positive value " + std::to_string(x));
        out[i] = std::log(x);
        break;
      case Op::kNeg: out[i] = -x; break;
      case Op::kRelu: out[i] = x > 0.0 ? x : 0.0; break;
      case Op::kSqrt:
        if (x < 0.0)
          throw DomainError("sqrt of negative value " + std::to_string(x));
        out[i] = std::sqrt(x);
        break;
      case Op::kClamp: out[i] = std::min(std::max(x, s0), s1); break;
      case Op::kStopGrad: out[i] = x; break;
      default: throw ContractError("bad unary op");
    }
  }
  const int na = ensure_node(a);
  const int no = push_node(a.shape, std::move(out), false);
  records_.push_back({op, na, -1, no, s0, s1});
  return wrap(no);
}

Tensor Graph::add_scalar(const Tensor& a, double s) { return unary(Op::kAddScalar, a, s); }
Tensor Graph::mul_scalar(const Tensor& a, double s) { return unary(Op::kMulScalar, a, s); }
Tensor Graph::pow_scalar(const Tensor& a, double p) { return unary(Op::kPowScalar, a, p); }
Tensor Graph::exp(const Tensor& a) { return unary(Op::kExp, a); }
Tensor Graph::log(const Tensor& a) { return unary(Op::kLog, a); }
Tensor Graph::neg(const Tensor& a) { return unary(Op::kNeg, a); }
Tensor Graph::relu(const Tensor& a) { return unary(Op::kRelu, a); }
Tensor Graph::sqrt(const Tensor& a) { return unary(Op::kSqrt, a); }
Tensor Graph::clamp(const Tensor& a, double lo, double hi) {
  return unary(Op::kClamp, a, lo, hi);
}
Tensor Graph::stop_gradient(const Tensor& a) { return unary(Op::kStopGrad, a); }

Tensor Graph::sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values) s += v;
  const int na = ensure_node(a);
  const int no = push_node({}, {s}, false);
  records_.push_back({Op::kSum, na, -1, no});
  return wrap(no);
}

Tensor Graph::mean(const Tensor& a) {
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor Graph::row_sum(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += a.values[i * c + j];
  const int na = ensure_node(a);
  const int no = push_node({r}, std::move(out), false);
  records_.push_back({Op::kRowSum, na, -1, no});
  return wrap(no);
}

Tensor Graph::col_sum(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += a.values[i * c + j];
  const int na = ensure_node(a);
  const int no = push_node({c}, std::move(out), false);
  records_.push_back({Op::kColSum, na, -1, no});
  return wrap(no);
}

Tensor Graph::broadcast_rows(const Tensor& v, std::size_t rows) {
  if (v.shape.size() != 1)
    throw DimensionError("broadcast_rows expects a vector, got " +
                         shape_str(v.shape));
  const std::size_t c = v.size();
  std::vector<double> out(rows * c);
  for (std::size_t i = 0; i < rows; ++i)
    std::copy(v.values.begin(), v.values.end(), out.begin() + i * c);
  const int na = ensure_node(v);
  const int no = push_node({rows, c}, std::move(out), false);
  records_.push_back({Op::kBroadcastRows, na, -1, no});
  return wrap(no);
}

Tensor Graph::broadcast_cols(const Tensor& v, std::size_t cols) {
  if (v.shape.size() != 1)
    throw DimensionError("broadcast_cols expects a vector, got " +
                         shape_str(v.shape));
  const std::size_t r = v.size();
  std::vector<double> out(r * cols);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = v.values[i];
  const int na = ensure_node(v);
  const int no = push_node({r, cols}, std::move(out), false);
  records_.push_back({Op::kBroadcastCols, na, -1, no});
  return wrap(no);
}

Tensor Graph::gather_cols(const Tensor& m,
                          const std::vector<std::size_t>& cols) {
  const std::size_t r = m.rows(), c = m.cols();
  if (cols.size() != r)
    throw DimensionError("gather_cols needs one index per row");
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (cols[i] >= c)
      throw DimensionError("gather_cols index " + std::to_string(cols[i]) +
                           " out of range for " + std::to_string(c) +
                           " columns");
    out[i] = m.values[i * c + cols[i]];
  }
  const int na = ensure_node(m);
  const int no = push_node({r}, std::move(out), false);
  Record rec{Op::kGatherCols, na, -1, no};
  rec.idx = cols;
  records_.push_back(std::move(rec));
  return wrap(no);
}

Tensor Graph::l2_normalize(const Tensor& a) {
  double ss = 0.0;
  for (double v : a.values) ss += v * v;
  if (ss == 0.0)
    throw DegenerateInputError("l2_normalize of the zero vector");
  return div(a, sqrt(sum(mul(a, a))));
}

Tensor Graph::l2_normalize_rows(const Tensor& m) {
  const std::size_t c = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < c; ++j) ss += m.at(i, j) * m.at(i, j);
    if (ss == 0.0)
      throw DegenerateInputError("l2_normalize_rows: zero row " +
                                 std::to_string(i));
  }
  Tensor norms = sqrt(row_sum(mul(m, m)));
  return div(m, broadcast_cols(norms, c));
}

GradientMap Graph::backward(const Tensor& loss) const {
  if (!loss.is_scalar())
    throw ContractError("backward requires a scalar loss, got " +
                        shape_str(loss.shape));
  if (loss.node < 0 || static_cast<std::size_t>(loss.node) >= shapes_.size())
    throw ContractError("loss tensor does not belong to this graph");

  std::vector<std::vector<double>> grads(shapes_.size());
  for (std::size_t i = 0; i < shapes_.size(); ++i)
    grads[i].assign(numel(shapes_[i]), 0.0);
  grads[loss.node][0] = 1.0;

  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    const Record& r = *it;
    const std::vector<double>& go = grads[r.out];
    switch (r.op) {
      case Op::kMatMul: {
        const std::size_t m = shapes_[r.a][0], k = shapes_[r.a][1],
                          c = shapes_[r.b][1];
        const auto& av = values_[r.a];
        const auto& bv = values_[r.b];
        auto& ga = grads[r.a];
        auto& gb = grads[r.b];
        // dA += dC * B^T ; dB += A^T * dC
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j)
              acc += go[i * c + j] * bv[kk * c + j];
            ga[i * k + kk] += acc;
          }
        for (std::size_t kk = 0; kk < k; ++kk)
          for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
              acc += av[i * k + kk] * go[i * c + j];
            gb[kk * c + j] += acc;
          }
        break;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const bool a_scalar = values_[r.a].size() == 1;
        const bool b_scalar = values_[r.b].size() == 1;
        const std::size_t n = go.size();
        for (std::size_t i = 0; i < n; ++i) {
          const double x = a_scalar ? values_[r.a][0] : values_[r.a][i];
          const double y = b_scalar ? values_[r.b][0] : values_[r.b][i];
          double da = 0.0, db = 0.0;
          switch (r.op) {
            case Op::kAdd: da = go[i]; db = go[i]; break;
            case Op::kSub: da = go[i]; db = -go[i]; break;
            case Op::kMul: da = go[i] * y; db = go[i] * x; break;
            case Op::kDiv:
              da = go[i] / y;
              db = -go[i] * x / (y * y);
              break;
            default: break;
          }
          grads[r.a][a_scalar ? 0 : i] += da;
          grads[r.b][b_scalar ? 0 : i] += db;
        }
        break;
      }
      case Op::kAddScalar:
        for (std::size_t i = 0; i < go.size(); ++i) grads[r.a][i] += go[i];
        break;
      case Op::kMulScalar:
        for (std::size_t i = 0; i < go.size(); ++i)
          grads[r.a][i] += r.s0 * go[i];
        break;
      case Op::kPowScalar:
        for (std::size_t i = 0; i < go.size(); ++i)
          grads[r.a][i] += go[i] * r.s0 * std::pow(values_[r.a][i], r.s0 - 1.0);
        break;
      case Op::kExp:
        for (std::size_t i = 0; i < go.size(); ++i)
          grads[r.a][i] += go[i] * values_[r.out][i];
        break;
      case Op::kLog:
        for (std::size_t i = 0; i < go.size(); ++i)
          grads[r.a][i] += go[i] / values_[r.a][i];
        break;
      case Op::kNeg:
        for (std::size_t i = 0; i < go.size(); ++i) grads[r.a][i] -= go[i];
        break;
      case Op::kRelu:
        for (std::size_t i = 0; i < go.size(); ++i)
          if (values_[r.a][i] > 0.0) grads[r.a][i] += go[i];
        break;
      case Op::kSqrt:
        for (std::size_t i = 0; i < go.size(); ++i)
          grads[r.a][i] += go[i] * 0.5 / values_[r.out][i];
        break;
      case Op::kClamp:
        for (std::size_t i = 0; i < go.size(); ++i) {
          const double x = values_[r.a][i];
          if (x >= r.s0 && x <= r.s1) grads[r.a][i] += go[i];
        }
        break;
      case Op::kSum:
        for (std::size_t i = 0; i < grads[r.a].size(); ++i)
          grads[r.a][i] += go[0];
        break;
      case Op::kRowSum: {
        const std::size_t rr = shapes_[r.a][0], c = shapes_[r.a][1];
        for (std::size_t i = 0; i < rr; ++i)
          for (std::size_t j = 0; j < c; ++j) grads[r.a][i * c + j] += go[i];
        break;
      }
      case Op::kColSum: {
        const std::size_t rr = shapes_[r.a][0], c = shapes_[r.a][1];
        for (std::size_t i = 0; i < rr; ++i)
          for (std::size_t j = 0; j < c; ++j) grads[r.a][i * c + j] += go[j];
        break;
      }
      case Op::kBroadcastRows: {
        const std::size_t rr = shapes_[r.out][0], c = shapes_[r.out][1];
        for (std::size_t i = 0; i < rr; ++i)
          for (std::size_t j = 0; j < c; ++j) grads[r.a][j] += go[i * c + j];
        break;
      }
      case Op::kBroadcastCols: {
        const std::size_t rr = shapes_[r.out][0], c = shapes_[r.out][1];
        for (std::size_t i = 0; i < rr; ++i)
          for (std::size_t j = 0; j < c; ++j) grads[r.a][i] += go[i * c + j];
        break;
      }
      case Op::kGatherCols: {
        const std::size_t c = shapes_[r.a][1];
        for (std::size_t i = 0; i < r.idx.size(); ++i)
          grads[r.a][i * c + r.idx[i]] += go[i];
        break;
      }
      case Op::kStopGrad:
        // Zero flows upstream, by definition.
        break;
    }
  }

  GradientMap out;
  for (int id : leaves_) {
    Tensor g(shapes_[id], grads[id]);
    out.emplace(id, std::move(g));
  }
  return out;
}

}  // namespace ssa
