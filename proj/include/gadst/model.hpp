#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gadst/autodiff.hpp"
#include "gadst/ga_convlstm.hpp"
#include "gadst/quadtree.hpp"
#include "gadst/raster.hpp"

namespace gadst {

struct HyperConfig {
  int filters = 40;
  int kernel = 3;
  int depth = 2;       // GA-ConvLSTM layers in encoder and in decoder
  int d_a = 32;        // attention alignment width
  int ext_units = 10;
  int horizon = 7;
  double dropout = 0.25;
  double lambda1 = 10, lambda2 = 100;
  int batch_size = 16;
  int epochs = 1;
  double lr = 0.001;
  double lr_decay = 1.0;  // per-epoch multiplier on lr
  uint64_t seed = 42;
  bool teacher_forcing = false;

  void validate() const;
};

struct BNLayerDef {
  int gamma = -1, beta = -1;  // trainable
  int mean = -1, var = -1;    // running buffers
};

struct AttentionDef {
  int ws = -1, wh = -1, v = -1;
};

struct ExtDef {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct FusionDef {
  int w1 = -1, w2 = -1;
};

struct ComponentDef {
  std::vector<GAConvLSTMLayer> enc;
  std::vector<BNLayerDef> enc_bn;
  std::vector<GAConvLSTMLayer> dec;
  std::vector<BNLayerDef> dec_bn;
  GAConvLSTMLayer proj;
  AttentionDef att;
};

// One window flattened against a model's table, in scaled space.
struct WindowFrames {
  std::vector<Tensor> week_a, week_b;  // history frames, 1 channel per cell
  std::vector<Tensor> target;          // horizon frames
  std::vector<Tensor> ext;             // horizon x (2)
};

// Additive attention over encoder annotations.
struct AttentionWeightsT {
  Tensor ws;  // (state_dim, d_a)
  Tensor wh;  // (annotation_dim, d_a)
  Tensor v;   // (d_a)
};

struct AttentionResult {
  Tensor context;
  Tensor alpha;
};

AttentionResult attention_context(const Tensor& s_prev, const std::vector<Tensor>& annotations,
                                  const AttentionWeightsT& w);

class GadstModel {
 public:
  GadstModel(GeoIndexTable table_, HyperConfig cfg_);

  // Predictions for one window in scaled space, unclamped. Train mode applies
  // dropout (rng required) and batch statistics; teacher forcing feeds target
  // frames as the decoder's previous-prediction input.
  std::vector<ad::Value> forward(ad::Tape& tape, const WindowFrames& w, Mode mode,
                                 Rng* dropout_rng);

  // Inference-mode component/external outputs for inspection and tests.
  std::vector<Tensor> component_output(const std::vector<Tensor>& week, int comp_idx);
  std::vector<Tensor> external_output(const std::vector<Tensor>& ext);

  double scale_max() const;
  void set_scale_max(double v);

  GeoIndexTable table;
  HyperConfig cfg;
  ParamStore params;
  ComponentDef comp[2];
  FusionDef fusion;
  ExtDef ext;

 private:
  std::vector<ad::Value> component_forward(ad::Tape& tape, ComponentDef& def,
                                           const std::vector<ad::Value>& slots,
                                           const std::vector<Tensor>& week, Mode mode,
                                           Rng* dropout_rng, const std::vector<Tensor>* teacher);
  std::vector<ad::Value> bind_slots(ad::Tape& tape) const;
  int meta_scale_ = -1;
};

WindowFrames window_frames(const SupervisedWindow& w, const GeoIndexTable& table, int horizon);

// (lambda1/N1) * sum (Y-Yhat)^2 + (100*lambda2/N2) * sum ((Y-Yhat)/Y)^2,
// second sum over Y != 0 cells only; N1 counts all cells, N2 the nonzero ones.
double composite_loss(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets,
                      double lambda1, double lambda2);
ad::Value composite_loss_op(ad::Tape& tape, const std::vector<ad::Value>& preds,
                            const std::vector<Tensor>& targets, double lambda1, double lambda2);

std::vector<Tensor> fuse(const std::vector<Tensor>& y1, const std::vector<Tensor>& y2,
                         const Tensor& w1, const Tensor& w2);

// Forecast rasters in count space: clamp at zero, multiply by scale_max.
std::vector<CountGrid> predict(GadstModel& model, const SupervisedWindow& window);

struct EpochStats {
  double train_loss = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct FitResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;  // 0-based; -1 when no validation windows
};

FitResult fit(GadstModel& model, const std::vector<SupervisedWindow>& train,
              const std::vector<SupervisedWindow>& val);
FitResult fit_frames(GadstModel& model, const std::vector<WindowFrames>& train,
                     const std::vector<WindowFrames>& val);

void save_checkpoint(const GadstModel& model, const std::string& path);
void load_checkpoint(GadstModel& model, const std::string& path);

}  // namespace gadst
