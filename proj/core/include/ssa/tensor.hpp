#ifndef SSA_TENSOR_HPP_
#define SSA_TENSOR_HPP_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssa/errors.hpp"

namespace ssa {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. `node >= 0` means the tensor lives in
// an active Graph and participates in backward().
struct Tensor {
  Shape shape;
  std::vector<double> values;
  int node = -1;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v);
  static Tensor zeros(Shape s);

  std::size_t size() const { return values.size(); }
  bool is_scalar() const { return values.size() == 1; }
  bool tracked() const { return node >= 0; }
  std::size_t rows() const;
  std::size_t cols() const;
  double at(std::size_t r, std::size_t c) const;
  double item() const;
};

using GradientMap = std::unordered_map<int, Tensor>;

// Reverse-mode tape. Records are appended in forward order; backward()
// replays them in exact reverse order. Each record keeps handles to the
// operand values its gradient rule needs (saved in the node table), no
// recomputation. Confined to one thread per training step.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Registers a tracked leaf (a trainable parameter). Gradients are
  // reported for leaves only.
  Tensor leaf(const Tensor& t);
  // Registers an untracked value (inputs, constants).
  Tensor constant(const Tensor& t);

  Tensor matmul(const Tensor& a, const Tensor& b);

  // Binary elementwise; shapes must match exactly or one operand must be
  // scalar (scalar-vs-tensor is the only supported broadcast).
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor div(const Tensor& a, const Tensor& b);

  Tensor add_scalar(const Tensor& a, double s);
  Tensor mul_scalar(const Tensor& a, double s);
  // a^p elementwise, p a plain exponent; a must be >= 0 for fractional p.
  Tensor pow_scalar(const Tensor& a, double p);

  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);  // DomainError on non-positive entries
  Tensor neg(const Tensor& a);
  Tensor relu(const Tensor& a);
  Tensor sqrt(const Tensor& a);  // DomainError on negative entries
  // Hard clamp; gradient passes through inside [lo, hi], zero outside.
  Tensor clamp(const Tensor& a, double lo, double hi);

  Tensor sum(const Tensor& a);                        // -> scalar
  Tensor row_sum(const Tensor& a);                    // [r,c] -> [r]
  Tensor col_sum(const Tensor& a);                    // [r,c] -> [c]
  Tensor broadcast_rows(const Tensor& v, std::size_t rows);  // [c] -> [rows,c]
  Tensor broadcast_cols(const Tensor& v, std::size_t cols);  // [r] -> [r,cols]
  // out[i] = m[i, cols[i]]
  Tensor gather_cols(const Tensor& m, const std::vector<std::size_t>& cols);

  // Identity forward; contributes exactly zero gradient to every ancestor.
  Tensor stop_gradient(const Tensor& a);

  // a / ||a||_2 for a vector; DegenerateInputError on the zero vector.
  Tensor l2_normalize(const Tensor& a);
  // Row-wise normalization of a matrix.
  Tensor l2_normalize_rows(const Tensor& m);

  Tensor mean(const Tensor& a);  // sum / numel -> scalar

  // Gradients of a scalar loss w.r.t. every tracked leaf. Leaves reachable
  // only through stop_gradient receive exact (bitwise) zeros.
  GradientMap backward(const Tensor& loss) const;

  std::size_t num_nodes() const { return shapes_.size(); }

 private:
  enum class Op {
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kAddScalar,
    kMulScalar,
    kPowScalar,
    kExp,
    kLog,
    kNeg,
    kRelu,
    kSqrt,
    kClamp,
    kSum,
    kRowSum,
    kColSum,
    kBroadcastRows,
    kBroadcastCols,
    kGatherCols,
    kStopGrad,
  };

  struct Record {
    Op op;
    int a = -1;
    int b = -1;
    int out = -1;
    double s0 = 0.0;
    double s1 = 0.0;
    std::vector<std::size_t> idx;
  };

  int push_node(Shape shape, std::vector<double> values, bool is_leaf);
  int ensure_node(const Tensor& t);
  Tensor wrap(int node) const;
  Tensor binary(Op op, const Tensor& a, const Tensor& b);
  Tensor unary(Op op, const Tensor& a, double s0 = 0.0, double s1 = 0.0);

  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> values_;
  std::vector<bool> is_leaf_;
  std::vector<int> leaves_;
  std::vector<Record> records_;
};

}  // namespace ssa

#endif  // SSA_TENSOR_HPP_
