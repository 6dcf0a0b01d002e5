#include "trust/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "trust/error.hpp"

namespace trust {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kHadamard: return "hadamard";
    case OpKind::kScale: return "scale";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRowSoftmax: return "row_softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kL2NormalizeRows: return "l2_normalize_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kDiag: return "diag";
    case OpKind::kWeightedLogSumExp: return "weighted_logsumexp";
    case OpKind::kStopGradient: return "stop_gradient";
  }
  return "unknown";
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id.index >= nodes_.size()) throw ShapeError("graph: unknown node id " + std::to_string(id.index));
  return nodes_[id.index];
}

NodeId Graph::push(OpKind kind, std::vector<NodeId> inputs, Matrix value) {
  require_finite(value, std::string(op_name(kind)));
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), 0.0, {}});
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::leaf(Matrix value) { return push(OpKind::kLeaf, {}, std::move(value)); }

NodeId Graph::constant(Matrix value) { return push(OpKind::kConstant, {}, std::move(value)); }

NodeId Graph::matmul(NodeId a, NodeId b) {
  return push(OpKind::kMatmul, {a, b}, trust::matmul(node(a).value, node(b).value));
}

NodeId Graph::transpose(NodeId a) {
  return push(OpKind::kTranspose, {a}, trust::transpose(node(a).value));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Matrix& x = node(a).value;
  const Matrix& y = node(b).value;
  Matrix out = x;
  if (y.rows() == 1 && x.rows() != 1 && y.cols() == x.cols()) {
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += y(0, j);
  } else {
    require_same_shape(x, y, "add");
    for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += y.data()[k];
  }
  return push(OpKind::kAdd, {a, b}, std::move(out));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Matrix& x = node(a).value;
  const Matrix& y = node(b).value;
  require_same_shape(x, y, "sub");
  Matrix out = x;
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] -= y.data()[k];
  return push(OpKind::kSub, {a, b}, std::move(out));
}

NodeId Graph::hadamard(NodeId a, NodeId b) {
  const Matrix& x = node(a).value;
  const Matrix& y = node(b).value;
  require_same_shape(x, y, "hadamard");
  Matrix out = x;
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] *= y.data()[k];
  return push(OpKind::kHadamard, {a, b}, std::move(out));
}

NodeId Graph::scale(NodeId a, double factor) {
  Matrix out = node(a).value;
  for (double& v : out.data()) v *= factor;
  NodeId id = push(OpKind::kScale, {a}, std::move(out));
  nodes_[id.index].factor = factor;
  return id;
}

NodeId Graph::exp(NodeId a) {
  Matrix out = node(a).value;
  for (double& v : out.data()) v = std::exp(v);
  return push(OpKind::kExp, {a}, std::move(out));
}

NodeId Graph::log(NodeId a) {
  Matrix out = node(a).value;
  for (double& v : out.data()) v = std::log(v);
  return push(OpKind::kLog, {a}, std::move(out));
}

NodeId Graph::tanh(NodeId a) {
  Matrix out = node(a).value;
  for (double& v : out.data()) v = std::tanh(v);
  return push(OpKind::kTanh, {a}, std::move(out));
}

NodeId Graph::row_softmax(NodeId a) {
  return push(OpKind::kRowSoftmax, {a}, trust::row_softmax(node(a).value));
}

NodeId Graph::log_softmax(NodeId a) {
  return push(OpKind::kLogSoftmax, {a}, trust::log_softmax_rows(node(a).value));
}

NodeId Graph::l2_normalize_rows(NodeId a) {
  return push(OpKind::kL2NormalizeRows, {a}, trust::l2_normalize_rows(node(a).value));
}

NodeId Graph::gather_rows(NodeId a, std::vector<std::size_t> indices) {
  Matrix out = trust::gather_rows(node(a).value, indices);
  NodeId id = push(OpKind::kGatherRows, {a}, std::move(out));
  nodes_[id.index].indices = std::move(indices);
  return id;
}

NodeId Graph::sum(NodeId a) {
  double s = 0.0;
  for (double v : node(a).value.data()) s += v;
  return push(OpKind::kSum, {a}, Matrix::scalar(s));
}

NodeId Graph::mean(NodeId a) {
  const Matrix& x = node(a).value;
  if (x.empty()) throw ShapeError("mean: empty matrix");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return push(OpKind::kMean, {a}, Matrix::scalar(s / static_cast<double>(x.size())));
}

NodeId Graph::row_sum(NodeId a) {
  const Matrix& x = node(a).value;
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (double v : x.row(i)) out(i, 0) += v;
  return push(OpKind::kRowSum, {a}, std::move(out));
}

NodeId Graph::diag(NodeId a) {
  const Matrix& x = node(a).value;
  if (x.rows() != x.cols()) throw ShapeError("diag: non-square " + x.shape_string());
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) out(i, 0) = x(i, i);
  return push(OpKind::kDiag, {a}, std::move(out));
}

NodeId Graph::weighted_logsumexp(NodeId x, NodeId weights) {
  const Matrix& v = node(x).value;
  const Matrix& w = node(weights).value;
  require_same_shape(v, w, "weighted_logsumexp");
  Matrix out(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < v.cols(); ++j) {
      if (w(i, j) < 0.0) {
        throw NumericError("weighted_logsumexp: negative weight at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
      }
      if (w(i, j) > 0.0) m = std::max(m, v(i, j));
    }
    if (!std::isfinite(m)) {
      throw NumericError("weighted_logsumexp: row " + std::to_string(i) + " has no positive weight");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < v.cols(); ++j) s += w(i, j) * std::exp(v(i, j) - m);
    out(i, 0) = m + std::log(s);
  }
  return push(OpKind::kWeightedLogSumExp, {x, weights}, std::move(out));
}

NodeId Graph::stop_gradient(NodeId a) {
  return push(OpKind::kStopGradient, {a}, node(a).value);
}

const Matrix& Graph::grad(NodeId id) const {
  if (grads_.size() != nodes_.size()) throw Error("grad: backward() has not been run on this graph");
  return grads_.at(id.index);
}

void Graph::accumulate(NodeId id, const Matrix& g) {
  Matrix& dst = grads_[id.index];
  if (nodes_[id.index].kind == OpKind::kConstant) return;
  for (std::size_t k = 0; k < dst.size(); ++k) dst.data()[k] += g.data()[k];
}

void Graph::backward(NodeId output) {
  const Matrix& out = node(output).value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw ShapeError("backward: output must be 1x1, got " + out.shape_string());
  }
  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const auto& n : nodes_) grads_.emplace_back(n.value.rows(), n.value.cols());
  grads_[output.index](0, 0) = 1.0;
  for (std::size_t i = output.index + 1; i-- > 0;) backprop_node(i);
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    require_finite(grads_[i], "backward through " + std::string(op_name(nodes_[i].kind)));
  }
}

void Graph::backprop_node(std::size_t index) {
  const Node& n = nodes_[index];
  const Matrix& g = grads_[index];
  const Matrix& y = n.value;

  switch (n.kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
    case OpKind::kStopGradient:
      return;

    case OpKind::kMatmul: {
      const Matrix& a = nodes_[n.inputs[0].index].value;
      const Matrix& b = nodes_[n.inputs[1].index].value;
      accumulate(n.inputs[0], trust::matmul(g, trust::transpose(b)));
      accumulate(n.inputs[1], trust::matmul(trust::transpose(a), g));
      return;
    }

    case OpKind::kTranspose:
      accumulate(n.inputs[0], trust::transpose(g));
      return;

    case OpKind::kAdd: {
      accumulate(n.inputs[0], g);
      const Matrix& b = nodes_[n.inputs[1].index].value;
      if (b.rows() == g.rows()) {
        accumulate(n.inputs[1], g);
      } else {
        Matrix col_sum(1, g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) col_sum(0, j) += g(i, j);
        accumulate(n.inputs[1], col_sum);
      }
      return;
    }

    case OpKind::kSub: {
      accumulate(n.inputs[0], g);
      Matrix neg = g;
      for (double& v : neg.data()) v = -v;
      accumulate(n.inputs[1], neg);
      return;
    }

    case OpKind::kHadamard: {
      const Matrix& a = nodes_[n.inputs[0].index].value;
      const Matrix& b = nodes_[n.inputs[1].index].value;
      Matrix ga = g;
      Matrix gb = g;
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga.data()[k] *= b.data()[k];
        gb.data()[k] *= a.data()[k];
      }
      accumulate(n.inputs[0], ga);
      accumulate(n.inputs[1], gb);
      return;
    }

    case OpKind::kScale: {
      Matrix ga = g;
      for (double& v : ga.data()) v *= n.factor;
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kExp: {
      Matrix ga = g;
      for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] *= y.data()[k];
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kLog: {
      const Matrix& x = nodes_[n.inputs[0].index].value;
      Matrix ga = g;
      for (std::size_t k = 0; k < g.size(); ++k) ga.data()[k] /= x.data()[k];
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kTanh: {
      Matrix ga = g;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double t = y.data()[k];
        ga.data()[k] *= 1.0 - t * t;
      }
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kRowSoftmax: {
      // dx = y * (g - <g, y>) per row
      Matrix ga(y.rows(), y.cols());
      for (std::size_t i = 0; i < y.rows(); ++i) {
        const double gy = dot(g.row(i), y.row(i));
        for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) = y(i, j) * (g(i, j) - gy);
      }
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kLogSoftmax: {
      // dx = g - softmax * sum(g) per row
      Matrix ga(y.rows(), y.cols());
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double gs = 0.0;
        for (double v : g.row(i)) gs += v;
        for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) = g(i, j) - std::exp(y(i, j)) * gs;
      }
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kL2NormalizeRows: {
      // dx = (g - y <g, y>) / |x|
      const Matrix& x = nodes_[n.inputs[0].index].value;
      Matrix ga(y.rows(), y.cols());
      for (std::size_t i = 0; i < y.rows(); ++i) {
        const double nrm = norm(x.row(i));
        const double gy = dot(g.row(i), y.row(i));
        for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) = (g(i, j) - y(i, j) * gy) / nrm;
      }
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kGatherRows: {
      const Matrix& x = nodes_[n.inputs[0].index].value;
      Matrix ga(x.rows(), x.cols());
      for (std::size_t i = 0; i < n.indices.size(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) ga(n.indices[i], j) += g(i, j);
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kSum: {
      const Matrix& x = nodes_[n.inputs[0].index].value;
      accumulate(n.inputs[0], Matrix(x.rows(), x.cols(), g(0, 0)));
      return;
    }

    case OpKind::kMean: {
      const Matrix& x = nodes_[n.inputs[0].index].value;
      accumulate(n.inputs[0], Matrix(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
      return;
    }

    case OpKind::kRowSum: {
      const Matrix& x = nodes_[n.inputs[0].index].value;
      Matrix ga(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) = g(i, 0);
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kDiag: {
      const Matrix& x = nodes_[n.inputs[0].index].value;
      Matrix ga(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) ga(i, i) = g(i, 0);
      accumulate(n.inputs[0], ga);
      return;
    }

    case OpKind::kWeightedLogSumExp: {
      // d/dx_ij = g_i w_ij exp(x_ij - out_i);  d/dw_ij = g_i exp(x_ij - out_i)
      const Matrix& x = nodes_[n.inputs[0].index].value;
      const Matrix& w = nodes_[n.inputs[1].index].value;
      Matrix gx(x.rows(), x.cols());
      Matrix gw(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
          const double e = std::exp(x(i, j) - y(i, 0));
          gw(i, j) = g(i, 0) * e;
          gx(i, j) = gw(i, j) * w(i, j);
        }
      }
      accumulate(n.inputs[0], gx);
      accumulate(n.inputs[1], gw);
      return;
    }
  }
}

}  // namespace trust
