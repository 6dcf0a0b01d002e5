#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "trust/matrix.hpp"

namespace trust {

/// Handle to a node inside a Graph. Only meaningful for the graph that issued it.
struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class OpKind {
  kLeaf,
  kConstant,
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kHadamard,
  kScale,
  kExp,
  kLog,
  kTanh,
  kRowSoftmax,
  kLogSoftmax,
  kL2NormalizeRows,
  kGatherRows,
  kSum,
  kMean,
  kRowSum,
  kDiag,
  kWeightedLogSumExp,
  kStopGradient,
};

std::string_view op_name(OpKind kind);

/// Reverse-mode differentiation tape over Matrix values.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward() simply walks it in reverse. Every
/// operation checks its operand shapes and rejects non-finite results.
class Graph {
 public:
  /// A differentiable input (model parameter or feature batch).
  NodeId leaf(Matrix value);
  /// A non-differentiable input; backward() never writes its gradient.
  NodeId constant(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  /// `b` may equal `a` in shape or be a 1xC row broadcast across a's rows.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId tanh(NodeId a);
  NodeId row_softmax(NodeId a);
  NodeId log_softmax(NodeId a);
  NodeId l2_normalize_rows(NodeId a);
  NodeId gather_rows(NodeId a, std::vector<std::size_t> indices);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  /// Bx1 column of per-row sums.
  NodeId row_sum(NodeId a);
  /// Bx1 column holding the diagonal of a square matrix.
  NodeId diag(NodeId a);
  /// out[i] = log(sum_j weights[i][j] * exp(x[i][j])), max-shifted.
  /// Weights must be non-negative; a row whose weights are all zero has no
  /// mass and raises NumericError.
  NodeId weighted_logsumexp(NodeId x, NodeId weights);
  /// Forwards the value unchanged; contributes zero gradient to its input.
  NodeId stop_gradient(NodeId a);

  const Matrix& value(NodeId id) const { return nodes_.at(id.index).value; }
  /// Gradient of the last backward() output with respect to `id`. Zero-filled
  /// for nodes the output does not depend on.
  const Matrix& grad(NodeId id) const;

  /// Populates gradients of the 1x1 node `output` with respect to every node.
  void backward(NodeId output);

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id.index).kind; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id.index).inputs; }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Matrix value;
    double factor = 0.0;
    std::vector<std::size_t> indices;
  };

  NodeId push(OpKind kind, std::vector<NodeId> inputs, Matrix value);
  const Node& node(NodeId id) const;
  void accumulate(NodeId id, const Matrix& g);
  void backprop_node(std::size_t index);

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
};

}  // namespace trust
