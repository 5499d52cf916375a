#pragma once

#include <string>
#include <vector>

#include "gadst/autodiff.hpp"
#include "gadst/quadtree.hpp"
#include "gadst/tensor.hpp"

namespace gadst {

// Per-quadnode convolution with shared weights: each table entry's slice is
// reshaped to (h, w, Cin), convolved with same padding, and the outputs are
// concatenated back in table order.
Tensor ga_conv(const Tensor& frame, const GeoIndexTable& table, const Tensor& kernels,
               const Tensor& bias);

// Gate order everywhere: input, forget, candidate, output.
struct GALayerWeights {
  Tensor wx[4];  // (K,K,Cin,F)
  Tensor wh[4];  // (K,K,F,F)
  Tensor b[4];   // (F)
  Tensor wc[3];  // peepholes for i, f, o over the flattened state

  int cin() const { return wx[0].dim(2); }
  int filters() const { return wx[0].dim(3); }
  int kernel() const { return wx[0].dim(0); }
  void check(const GeoIndexTable& table) const;
};

struct GAStateT {
  Tensor h, c;
};

GAStateT zero_state(const GeoIndexTable& table, int filters);

// One ConvLSTM step with peephole connections on the flattened frames.
GAStateT cell_step(const Tensor& x, const GAStateT& prev, const GALayerWeights& w,
                   const GeoIndexTable& table);

struct LayerForwardResult {
  std::vector<Tensor> hs;  // length T when return_sequences, else length 1 (final h)
  GAStateT final_state;
};

LayerForwardResult layer_forward(const std::vector<Tensor>& xs, const GALayerWeights& w,
                                 const GeoIndexTable& table, bool return_sequences);

// --- tape versions -------------------------------------------------------

// Slot indices of one layer's parameters inside a ParamStore.
struct GAConvLSTMLayer {
  int cin = 0, filters = 0, kernel = 3;
  int wx[4] = {-1, -1, -1, -1};
  int wh[4] = {-1, -1, -1, -1};
  int b[4] = {-1, -1, -1, -1};
  int wc[3] = {-1, -1, -1};
};

// Registers Glorot-initialized parameters under `prefix/...`.
GAConvLSTMLayer add_ga_convlstm(ParamStore& store, const std::string& prefix, int cin,
                                int filters, int kernel, int64_t state_len, Rng& init);

struct BoundGALayer {
  const GAConvLSTMLayer* def = nullptr;
  ad::Value wx[4], wh[4], b[4], wc[3];
};

BoundGALayer bind_layer(ad::Tape& tape, const std::vector<ad::Value>& slots,
                        const GAConvLSTMLayer& def);

struct GAState {
  ad::Value h, c;
};

GAState zero_state(ad::Tape& tape, const GeoIndexTable& table, int filters);

ad::Value ga_conv_op(ad::Tape& tape, ad::Value frame, ad::Value kernels,
                     const GeoIndexTable& table);

GAState cell_step(ad::Tape& tape, const GeoIndexTable& table, const BoundGALayer& layer,
                  ad::Value x, const GAState& prev);

std::vector<ad::Value> layer_forward(ad::Tape& tape, const GeoIndexTable& table,
                                     const BoundGALayer& layer, const std::vector<ad::Value>& xs,
                                     GAState* final_state = nullptr);

}  // namespace gadst
