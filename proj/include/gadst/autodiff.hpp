#pragma once

#include <functional>
#include <vector>

#include "gadst/nn.hpp"
#include "gadst/rng.hpp"
#include "gadst/tensor.hpp"

namespace gadst::ad {

struct Value {
  int32_t id = -1;
  bool ok() const { return id >= 0; }
};

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order;
// backward replays the closures in reverse. One tape per forward pass.
class Tape {
 public:
  Value leaf(Tensor v);
  // Leaf tagged with a parameter slot so its gradient can be harvested.
  Value param(const Tensor& v, int slot);

  // Custom node: `back` receives the tape and the node's own Value and must
  // accumulate into the input gradients.
  Value push(Tensor out, std::function<void(Tape&, Value)> back);

  const Tensor& val(Value v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  Tensor& grad(Value v) { return nodes_[static_cast<size_t>(v.id)].grad; }

  // Root must hold exactly one element. Allocates all gradients.
  void backward(Value root);

  // sink[slot] += gradient of each param leaf. Call after backward.
  void harvest(std::vector<Tensor>& sink) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Value)> back;
    int slot = -1;
  };
  std::vector<Node> nodes_;
};

Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);  // Hadamard
Value scale(Tape& t, Value a, double s);

// x laid out as cells * channels, bias per channel.
Value add_bias_channels(Tape& t, Value x, Value bias);

Value sigmoid_op(Tape& t, Value a);
Value tanh_op(Tape& t, Value a);
Value relu_op(Tape& t, Value a);
Value leaky_relu_op(Tape& t, Value a);
Value softmax_op(Tape& t, Value a);  // rank-1

Value matvec(Tape& t, Value x, Value W);  // x (n) . W (n,m) -> (m)
Value dot(Tape& t, Value a, Value b);     // -> (1)
Value stack_scalars(Tape& t, const std::vector<Value>& xs);
Value weighted_sum(Tape& t, Value weights, const std::vector<Value>& frames);
Value concat_vec(Tape& t, const std::vector<Value>& xs);
Value slice(Tape& t, Value x, int64_t offset, int64_t len);
Value slice_row(Tape& t, Value m, int row, int64_t row_len);

// a has `ca` channels per cell, b has `cb`; result interleaves per cell.
Value concat_channels(Tape& t, Value a, int ca, Value b, int cb);
// (cells * channels) -> (channels), spatial mean
Value mean_channels(Tape& t, Value x, int channels);

Value sum_squares(Tape& t, Value x);  // -> (1)

// x viewed as (rows, features). Train mode uses batch statistics and updates
// the running buffers in place; infer mode normalizes by the buffers.
Value batch_norm_train(Tape& t, Value x, Value gamma, Value beta, int features,
                       Tensor& running_mean, Tensor& running_var,
                       double momentum = kBatchNormMomentum, double eps = kBatchNormEps);
Value batch_norm_infer(Tape& t, Value x, Value gamma, Value beta, const Tensor& mean,
                       const Tensor& var, double eps = kBatchNormEps);

Value dropout_op(Tape& t, Value x, double rate, Rng& rng);

}  // namespace gadst::ad

namespace gadst {

// Named model parameters in registration order; the order is the checkpoint
// manifest and the Adam slot layout. Non-trainable entries are running
// buffers that never receive gradients.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor> values;
  std::vector<char> trainable;

  int add(std::string name, Tensor value, bool train = true);
  int index_of(const std::string& name) const;  // -1 when absent
  size_t size() const { return values.size(); }
  std::vector<Tensor> zero_grads() const;
};

}  // namespace gadst
