#pragma once

// Reverse-mode automatic differentiation over small dense tensors.
//
// A Tensor is a shared handle to a node of a define-by-run graph. Every op
// records its inputs and a backward closure; backward() walks the reachable
// nodes in reverse construction order and accumulates gradients into every
// tensor that requires them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vc {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::uint64_t seq = 0;     // construction order within the thread
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

std::uint64_t next_sequence();

}  // namespace detail

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor ones_like(const Tensor& other);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node().data.size(); }

  std::span<const double> data() const { return node().data; }
  // In-place access for optimizers and finite-difference probes. Do not
  // mutate a tensor that is an input of a graph that will still be
  // differentiated.
  std::span<double> mutable_data() { return node().data; }
  std::vector<double> to_vector() const { return node().data; }
  double item() const;
  double operator[](std::size_t flat_index) const { return node().data.at(flat_index); }

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool value) { node().requires_grad = value; }

  bool has_grad() const { return !node().grad.empty(); }
  std::span<const double> grad() const { return node().grad; }
  std::span<double> mutable_grad() { return node().ensure_grad(); }
  void zero_grad();
  void clear_grad() { node().grad.clear(); }

  // A new leaf holding a copy of the values; no gradient path back.
  Tensor detach() const;

  // Populates d(this)/d(leaf) for every requires_grad tensor reachable from
  // this scalar. Gradients accumulate into leaves across calls.
  void backward() const;

  const char* op_name() const { return node().op; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Op construction: output node with given inputs and backward closure.
  static Tensor from_op(const char* op, Shape shape, std::vector<double> data,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward);

  detail::Node& node() const;
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace vc
