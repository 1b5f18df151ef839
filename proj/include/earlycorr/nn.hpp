#pragma once

// Minimal layer library with explicit backward passes. Activations are
// column-major Eigen matrices laid out as (channels, length * batch): sample b
// of a sequence tensor occupies the contiguous columns [b*L, (b+1)*L).
// Recurrent layers use time-major layout instead: column t*B + b.
//
// Each layer caches what its backward pass needs during forward; one forward
// must be followed by at most one backward. Gradients accumulate into
// Param::grad until zero_grad().

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "earlycorr/rng.hpp"

namespace earlycorr::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat<S>::Zero(rows, cols)), grad(Mat<S>::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

template <typename S>
using ParamList = std::vector<Param<S>*>;

/// U(-bound, bound) fill.
template <typename S>
void init_uniform(Mat<S>& m, double bound, Rng& rng);

template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out);
  void init(Rng& rng);
  Mat<S> forward(const Mat<S>& x);
  Mat<S> backward(const Mat<S>& dy);
  void collect(ParamList<S>& out) { out.push_back(&weight_); out.push_back(&bias_); }
  int in() const { return static_cast<int>(weight_.value.cols()); }
  int out() const { return static_cast<int>(weight_.value.rows()); }
  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }

 private:
  Param<S> weight_, bias_;
  Mat<S> x_;
};

/// Stride-1 1D convolution with symmetric zero padding.
template <typename S>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, int in_ch, int out_ch, int kernel, int pad);
  void init(Rng& rng);
  /// x: (in_ch, L*B) -> (out_ch, Lout*B), Lout = L + 2*pad - kernel + 1.
  Mat<S> forward(const Mat<S>& x, int length, int batch);
  Mat<S> backward(const Mat<S>& dy);
  int out_length(int length) const { return length + 2 * pad_ - kernel_ + 1; }
  int out_channels() const { return out_ch_; }
  void collect(ParamList<S>& out) { out.push_back(&weight_); out.push_back(&bias_); }
  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, pad_ = 0;
  Param<S> weight_, bias_;  // weight: (out_ch, kernel*in_ch), column kk*in_ch + c
  Mat<S> cols_;
  int length_ = 0, batch_ = 0;
};

/// Max pooling whose symmetric padding is derived from the input length so
/// that the last partial window is covered.
template <typename S>
class MaxPool1d {
 public:
  MaxPool1d(int kernel = 3, int stride = 3) : kernel_(kernel), stride_(stride) {}
  static int padding_for(int length, int kernel, int stride);
  int out_length(int length) const;
  Mat<S> forward(const Mat<S>& x, int length, int batch);
  Mat<S> backward(const Mat<S>& dy);

 private:
  int kernel_, stride_;
  std::vector<Eigen::Index> argmax_;
  Eigen::Index in_rows_ = 0, in_cols_ = 0;
};

template <typename S>
class Relu {
 public:
  Mat<S> forward(const Mat<S>& x);
  Mat<S> backward(const Mat<S>& dy);

 private:
  Mat<S> y_;
};

template <typename S>
class Elu {
 public:
  Mat<S> forward(const Mat<S>& x);
  Mat<S> backward(const Mat<S>& dy);

 private:
  Mat<S> x_, y_;
};

/// Inverted dropout; identity when not training.
template <typename S>
class Dropout {
 public:
  explicit Dropout(double p = 0.0) : p_(p) {}
  Mat<S> forward(const Mat<S>& x, bool train, Rng& rng);
  Mat<S> backward(const Mat<S>& dy);

 private:
  double p_;
  bool active_ = false;
  Mat<S> mask_;
};

/// Token embedding stored as (dim, vocab) so a lookup is one column copy.
template <typename S>
class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, int vocab, int dim);
  /// Smooth code over log-scaled token values: nearby delays start close.
  void init_log_scale(Rng& rng);
  Mat<S> forward(const std::vector<std::int32_t>& tokens);
  void backward(const Mat<S>& dy);
  void collect(ParamList<S>& out) { out.push_back(&table_); }
  int vocab() const { return static_cast<int>(table_.value.cols()); }

 private:
  Param<S> table_;
  std::vector<std::int32_t> tokens_;
};

/// One LSTM layer, optionally bidirectional, over padded time-major batches.
/// Steps at or past a sample's length leave its state untouched and emit
/// zeros, so padding never reaches the final states.
template <typename S>
class Lstm {
 public:
  Lstm() = default;
  Lstm(const std::string& name, int input, int hidden, bool bidirectional);
  void init(Rng& rng);
  /// x: (input, T*B). Returns (dirs*hidden, T*B).
  Mat<S> forward(const Mat<S>& x, const std::vector<int>& lengths, int steps);
  /// Final hidden state of the forward pass over each sample's valid prefix.
  const Mat<S>& final_forward() const { return dirs_[0].final_h; }
  /// Final hidden state of the reverse pass (after consuming t = 0).
  const Mat<S>& final_backward() const { return dirs_[1].final_h; }
  /// dy: (dirs*hidden, T*B) or empty; d_final_*: (hidden, B) or empty.
  Mat<S> backward(const Mat<S>& dy, const Mat<S>& d_final_fwd, const Mat<S>& d_final_bwd);
  void collect(ParamList<S>& out);
  int hidden() const { return hidden_; }
  int directions() const { return bidirectional_ ? 2 : 1; }

 private:
  struct Direction {
    Param<S> w_ih, w_hh, bias;
    Mat<S> gates;   // (4H, T*B) post-activation, step-major
    Mat<S> states;  // (H, (T+1)*B) h before/after each step
    Mat<S> cells;   // (H, (T+1)*B)
    Mat<S> final_h;
  };
  void run_direction(Direction& d, bool reverse, const Mat<S>& xproj, Mat<S>& out,
                     int row_offset);
  void backprop_direction(Direction& d, bool reverse, const Mat<S>& dy, int row_offset,
                          const Mat<S>& d_final, Mat<S>& dxproj);

  int input_ = 0, hidden_ = 0;
  bool bidirectional_ = true;
  Direction dirs_[2];
  Mat<S> x_;
  std::vector<int> lengths_;
  int steps_ = 0, batch_ = 0;
};

/// Elman recurrent unit with tanh activation; all samples share one length.
template <typename S>
class Rnn {
 public:
  Rnn() = default;
  Rnn(const std::string& name, int input, int hidden);
  void init(Rng& rng);
  /// x: (input, T*B) time-major. Returns the last hidden state (hidden, B).
  Mat<S> forward(const Mat<S>& x, int steps);
  /// Returns dx (input, T*B).
  Mat<S> backward(const Mat<S>& d_last);
  void collect(ParamList<S>& out) {
    out.push_back(&w_ih_);
    out.push_back(&w_hh_);
    out.push_back(&bias_);
  }
  Param<S>& w_ih() { return w_ih_; }
  Param<S>& w_hh() { return w_hh_; }
  Param<S>& bias() { return bias_; }

 private:
  Param<S> w_ih_, w_hh_, bias_;
  Mat<S> x_, states_;
  int steps_ = 0, batch_ = 0;
};

/// Column-wise L2 normalization.
template <typename S>
class L2Normalize {
 public:
  Mat<S> forward(const Mat<S>& x);
  Mat<S> backward(const Mat<S>& dy);

 private:
  Mat<S> y_;
  Vec<S> norms_;
};

/// Adam with bias correction.
template <typename S>
class Adam {
 public:
  Adam(ParamList<S> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();
  long steps() const { return t_; }

 private:
  ParamList<S> params_;
  std::vector<Mat<S>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace earlycorr::nn
