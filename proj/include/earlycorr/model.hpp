#pragma once

// Multi-view embedding network: a convolutional branch over the RAW byte
// matrix, a bidirectional LSTM branch over the token sequence, and a
// convolutional integration layer producing unit-norm embeddings. The
// early_mfc_plus architecture inserts a residual block and a small recurrent
// reconstruction step between the branches and the integration layer.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlycorr/features.hpp"
#include "earlycorr/nn.hpp"

namespace earlycorr {

enum class EmbedMode { kFull, kRawOnly, kIpdOnly };
enum class Arch { kEarlyMfc, kEarlyMfcPlus };

const char* to_string(EmbedMode mode);
EmbedMode embed_mode_from_string(const std::string& s);
const char* to_string(Arch arch);
Arch arch_from_string(const std::string& s);

struct ModelConfig {
  Arch arch = Arch::kEarlyMfc;
  EmbedMode mode = EmbedMode::kFull;
  int raw_packets = 10;
  int raw_bytes = 80;
  int seq_length = 200;
  int vocab = 10000;
  std::vector<int> conv_channels{32, 64, 128};
  int conv_kernel = 5;
  int pool_kernel = 3;
  int pool_stride = 3;
  double dropout_conv = 0.1;
  int cnn_hidden = 256;
  int branch_dim = 64;
  int ipd_embed_dim = 32;
  int lstm_hidden = 64;
  int lstm_layers = 2;
  double dropout_lstm = 0.2;
  bool bidirectional = true;
  int integ_channels = 16;
  int integ_kernel = 3;
  int integ_pad = 1;
  int embedding_dim = 32;
  int reconstruct_hidden = 128;
  int rnn_steps = 8;
  int rnn_features = 8;
  int rnn_hidden = 64;

  /// Throws InvalidConfig.
  void validate() const;
  int raw_length() const { return raw_packets * raw_bytes; }
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// Model input for B samples. raw is a single-channel signal (1, L*B) with
/// each sample's row-major byte matrix contiguous. Tokens are time-major
/// (index t*B + b) over `steps` = the longest valid length in the batch.
template <typename S>
struct Batch {
  int size = 0;
  nn::Mat<S> raw;
  std::vector<std::int32_t> tokens;
  std::vector<int> lengths;
  int steps = 0;
};

/// Throws ShapeMismatch for wrongly sized views and VocabOverflow for tokens
/// outside the vocabulary.
template <typename S>
Batch<S> make_batch(const std::vector<const MultiViewSample*>& samples, const ModelConfig& cfg);

template <typename S>
class CnnBranch {
 public:
  explicit CnnBranch(const ModelConfig& cfg);
  void init(Rng& rng);
  /// raw: (1, L*B) -> (branch_dim, B).
  nn::Mat<S> forward(const nn::Mat<S>& raw, int batch, bool train, Rng& rng);
  void backward(const nn::Mat<S>& dy);
  void collect(nn::ParamList<S>& out);

 private:
  int length_;
  std::vector<nn::Conv1d<S>> conv_;
  nn::Elu<S> elu_;
  std::vector<nn::Relu<S>> relu_;
  std::vector<nn::MaxPool1d<S>> pool_;
  std::vector<nn::Dropout<S>> drop_;
  std::vector<int> lengths_;
  nn::Linear<S> fc1_, fc2_;
  int batch_ = 0;
};

template <typename S>
class IpdBranch {
 public:
  explicit IpdBranch(const ModelConfig& cfg);
  void init(Rng& rng);
  /// -> (branch_dim, B).
  nn::Mat<S> forward(const std::vector<std::int32_t>& tokens, const std::vector<int>& lengths,
                     int steps, bool train, Rng& rng);
  void backward(const nn::Mat<S>& dy);
  void collect(nn::ParamList<S>& out);

 private:
  nn::Embedding<S> embed_;
  std::vector<nn::Lstm<S>> lstm_;
  std::vector<nn::Dropout<S>> drop_;
  nn::Linear<S> fc_;
  int hidden_;
  bool bidirectional_;
};

/// [h1; h2] as one channel of length 2*branch_dim -> conv -> ReLU -> FC ->
/// L2 normalization.
template <typename S>
class Integrator {
 public:
  explicit Integrator(const ModelConfig& cfg);
  void init(Rng& rng);
  nn::Mat<S> forward(const nn::Mat<S>& h1, const nn::Mat<S>& h2);
  /// Returns (dh1, dh2).
  std::pair<nn::Mat<S>, nn::Mat<S>> backward(const nn::Mat<S>& dy);
  void collect(nn::ParamList<S>& out);

 private:
  int dim_;
  nn::Conv1d<S> conv_;
  nn::Relu<S> relu_;
  nn::Linear<S> fc_;
  nn::L2Normalize<S> norm_;
  int batch_ = 0;
};

/// h + ReLU(W2 ReLU(W1 h + b1) + b2).
template <typename S>
class ResidualBlock {
 public:
  explicit ResidualBlock(const ModelConfig& cfg);
  void init(Rng& rng);
  nn::Mat<S> forward(const nn::Mat<S>& h);
  nn::Mat<S> backward(const nn::Mat<S>& dy);
  void collect(nn::ParamList<S>& out);
  nn::Linear<S>& inner() { return l1_; }
  nn::Linear<S>& outer() { return l2_; }

 private:
  nn::Linear<S> l1_, l2_;
  nn::Relu<S> r1_, r2_;
};

/// Fuses h1' + h2, reads the sum as rnn_steps steps of rnn_features values
/// and returns the last hidden state of a tanh RNN.
template <typename S>
class ReconstructNet {
 public:
  explicit ReconstructNet(const ModelConfig& cfg);
  void init(Rng& rng);
  nn::Mat<S> forward(const nn::Mat<S>& h1_res, const nn::Mat<S>& h2);
  /// Gradient w.r.t. the fused sum (equal for both addends).
  nn::Mat<S> backward(const nn::Mat<S>& dy);
  void collect(nn::ParamList<S>& out);
  nn::Rnn<S>& rnn() { return rnn_; }

 private:
  int steps_, features_;
  nn::Rnn<S> rnn_;
  int batch_ = 0;
};

template <typename S>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  /// Deterministic in seed.
  void init(std::uint64_t seed);
  const ModelConfig& config() const { return cfg_; }

  /// Every parameter in a fixed order (used by the optimizer and checkpoints).
  nn::ParamList<S> params();
  void zero_grad();
  std::size_t parameter_count();

  /// (embedding_dim, B) unit-norm columns. Uses the configured mode.
  nn::Mat<S> forward(const Batch<S>& batch, bool train, Rng& rng);
  nn::Mat<S> forward(const Batch<S>& batch, EmbedMode mode, bool train, Rng& rng);
  /// Accumulates parameter gradients for the last forward.
  void backward(const nn::Mat<S>& d_embed);

  CnnBranch<S>& cnn() { return cnn_; }
  IpdBranch<S>& ipd() { return ipd_; }
  Integrator<S>& integrator() { return integ_; }
  ResidualBlock<S>& residual() { return residual_; }
  ReconstructNet<S>& reconstruct() { return recon_; }
  nn::Param<S>& raw_constant() { return raw_const_; }
  nn::Param<S>& ipd_constant() { return ipd_const_; }

 private:
  ModelConfig cfg_;
  CnnBranch<S> cnn_;
  IpdBranch<S> ipd_;
  Integrator<S> integ_;
  ResidualBlock<S> residual_;
  ReconstructNet<S> recon_;
  // Stand-ins for a branch that an ablated model does not compute.
  nn::Param<S> raw_const_, ipd_const_;
  EmbedMode last_mode_ = EmbedMode::kFull;
  int last_batch_ = 0;
};

// Single-sample evaluation-mode wrappers.

template <typename S>
nn::Vec<S> cnn_forward(Model<S>& model, const RawView& raw);
template <typename S>
nn::Vec<S> lstm_forward(Model<S>& model, const IpdView& ipd);
template <typename S>
nn::Vec<S> integrate(Model<S>& model, const nn::Vec<S>& h1, const nn::Vec<S>& h2);
template <typename S>
nn::Vec<S> residual_block(Model<S>& model, const nn::Vec<S>& h1);
template <typename S>
nn::Vec<S> embed(Model<S>& model, const MultiViewSample& sample, EmbedMode mode);
/// Requires an early_mfc_plus model.
template <typename S>
nn::Vec<S> reconstruct_forward(Model<S>& model, const RawView& raw, const IpdView& ipd);

/// Evaluation-mode embeddings of many samples, (embedding_dim, N).
nn::Mat<float> embed_all(Model<float>& model, const std::vector<MultiViewSample>& samples,
                         int batch_size = 64);

}  // namespace earlycorr
