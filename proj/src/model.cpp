#include "earlycorr/model.hpp"

#include "earlycorr/error.hpp"
#include "earlycorr/rng.hpp"

namespace earlycorr {

using nlohmann::json;
using nn::Mat;
using nn::Vec;

const char* to_string(EmbedMode mode) {
  switch (mode) {
    case EmbedMode::kFull: return "full";
    case EmbedMode::kRawOnly: return "raw_only";
    case EmbedMode::kIpdOnly: return "ipd_only";
  }
  return "?";
}

EmbedMode embed_mode_from_string(const std::string& s) {
  if (s == "full") return EmbedMode::kFull;
  if (s == "raw_only") return EmbedMode::kRawOnly;
  if (s == "ipd_only") return EmbedMode::kIpdOnly;
  throw InvalidConfig("unknown embed mode '" + s + "'");
}

const char* to_string(Arch arch) {
  return arch == Arch::kEarlyMfc ? "early_mfc" : "early_mfc_plus";
}

Arch arch_from_string(const std::string& s) {
  if (s == "early_mfc") return Arch::kEarlyMfc;
  if (s == "early_mfc_plus") return Arch::kEarlyMfcPlus;
  throw InvalidConfig("unknown architecture '" + s + "'");
}

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw InvalidConfig(std::string(name) + " must be positive");
  };
  positive(raw_packets, "raw_packets");
  positive(raw_bytes, "raw_bytes");
  positive(seq_length, "seq_length");
  positive(vocab, "vocab");
  positive(conv_kernel, "conv_kernel");
  positive(pool_kernel, "pool_kernel");
  positive(pool_stride, "pool_stride");
  positive(cnn_hidden, "cnn_hidden");
  positive(branch_dim, "branch_dim");
  positive(ipd_embed_dim, "ipd_embed_dim");
  positive(lstm_hidden, "lstm_hidden");
  positive(lstm_layers, "lstm_layers");
  positive(integ_channels, "integ_channels");
  positive(integ_kernel, "integ_kernel");
  positive(embedding_dim, "embedding_dim");
  positive(reconstruct_hidden, "reconstruct_hidden");
  positive(rnn_steps, "rnn_steps");
  positive(rnn_features, "rnn_features");
  positive(rnn_hidden, "rnn_hidden");
  if (conv_channels.empty()) throw InvalidConfig("conv_channels must not be empty");
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    if (conv_channels[i] <= 0) throw InvalidConfig("conv_channels must be positive");
    if (i > 0 && conv_channels[i] <= conv_channels[i - 1])
      throw InvalidConfig("conv_channels must be strictly increasing");
  }
  if (conv_kernel % 2 == 0) throw InvalidConfig("conv_kernel must be odd");
  if (integ_pad < 0 || 2 * branch_dim + 2 * integ_pad - integ_kernel + 1 <= 0)
    throw InvalidConfig("integration conv leaves no output");
  if (!(dropout_conv >= 0.0 && dropout_conv < 1.0))
    throw InvalidConfig("dropout_conv must be in [0,1)");
  if (!(dropout_lstm >= 0.0 && dropout_lstm < 1.0))
    throw InvalidConfig("dropout_lstm must be in [0,1)");
  if (rnn_steps * rnn_features != branch_dim)
    throw InvalidConfig("rnn_steps * rnn_features must equal branch_dim");
  if (rnn_hidden != branch_dim) throw InvalidConfig("rnn_hidden must equal branch_dim");
  if (arch == Arch::kEarlyMfcPlus && mode != EmbedMode::kFull)
    throw InvalidConfig("early_mfc_plus supports only the full embed mode");
}

json ModelConfig::to_json() const {
  return {{"arch", to_string(arch)},
          {"mode", to_string(mode)},
          {"raw_packets", raw_packets},
          {"raw_bytes", raw_bytes},
          {"seq_length", seq_length},
          {"vocab", vocab},
          {"conv_channels", conv_channels},
          {"conv_kernel", conv_kernel},
          {"pool_kernel", pool_kernel},
          {"pool_stride", pool_stride},
          {"dropout_conv", dropout_conv},
          {"cnn_hidden", cnn_hidden},
          {"branch_dim", branch_dim},
          {"ipd_embed_dim", ipd_embed_dim},
          {"lstm_hidden", lstm_hidden},
          {"lstm_layers", lstm_layers},
          {"dropout_lstm", dropout_lstm},
          {"bidirectional", bidirectional},
          {"integ_channels", integ_channels},
          {"integ_kernel", integ_kernel},
          {"integ_pad", integ_pad},
          {"embedding_dim", embedding_dim},
          {"reconstruct_hidden", reconstruct_hidden},
          {"rnn_steps", rnn_steps},
          {"rnn_features", rnn_features},
          {"rnn_hidden", rnn_hidden}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    if (j.contains("arch")) c.arch = arch_from_string(j.at("arch").get<std::string>());
    if (j.contains("mode")) c.mode = embed_mode_from_string(j.at("mode").get<std::string>());
#define READ(field) \
  if (j.contains(#field)) j.at(#field).get_to(c.field)
    READ(raw_packets);
    READ(raw_bytes);
    READ(seq_length);
    READ(vocab);
    READ(conv_channels);
    READ(conv_kernel);
    READ(pool_kernel);
    READ(pool_stride);
    READ(dropout_conv);
    READ(cnn_hidden);
    READ(branch_dim);
    READ(ipd_embed_dim);
    READ(lstm_hidden);
    READ(lstm_layers);
    READ(dropout_lstm);
    READ(bidirectional);
    READ(integ_channels);
    READ(integ_kernel);
    READ(integ_pad);
    READ(embedding_dim);
    READ(reconstruct_hidden);
    READ(rnn_steps);
    READ(rnn_features);
    READ(rnn_hidden);
#undef READ
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- batch

template <typename S>
Batch<S> make_batch(const std::vector<const MultiViewSample*>& samples, const ModelConfig& cfg) {
  Batch<S> batch;
  batch.size = static_cast<int>(samples.size());
  const int L = cfg.raw_length();
  batch.raw.resize(1, static_cast<Eigen::Index>(L) * batch.size);
  batch.lengths.resize(samples.size());
  for (int b = 0; b < batch.size; ++b) {
    const auto& s = *samples[b];
    if (s.raw.n_packets != cfg.raw_packets || s.raw.n_bytes != cfg.raw_bytes ||
        static_cast<int>(s.raw.values.size()) != L)
      throw ShapeMismatch("RAW view of '" + s.flow_id + "' is not " +
                          std::to_string(cfg.raw_packets) + "x" + std::to_string(cfg.raw_bytes));
    if (static_cast<int>(s.ipd.values.size()) != cfg.seq_length || s.ipd.valid_len < 0 ||
        s.ipd.valid_len > cfg.seq_length)
      throw ShapeMismatch("sequence view of '" + s.flow_id + "' is not length " +
                          std::to_string(cfg.seq_length));
    for (int i = 0; i < L; ++i)
      batch.raw(0, static_cast<Eigen::Index>(b) * L + i) = static_cast<S>(s.raw.values[i]);
    batch.lengths[b] = s.ipd.valid_len;
    batch.steps = std::max(batch.steps, s.ipd.valid_len);
  }
  batch.tokens.assign(static_cast<std::size_t>(batch.steps) * batch.size, 0);
  for (int b = 0; b < batch.size; ++b) {
    const auto& ipd = samples[b]->ipd;
    for (int t = 0; t < cfg.seq_length; ++t) {
      std::int32_t v = ipd.values[t];
      if (v < 0 || v >= cfg.vocab)
        throw VocabOverflow("token " + std::to_string(v) + " at position " + std::to_string(t) +
                            " of '" + samples[b]->flow_id + "' outside vocabulary of " +
                            std::to_string(cfg.vocab));
      if (t < ipd.valid_len) batch.tokens[static_cast<std::size_t>(t) * batch.size + b] = v;
    }
  }
  return batch;
}

// ---------------------------------------------------------------- CnnBranch

template <typename S>
CnnBranch<S>::CnnBranch(const ModelConfig& cfg) : length_(cfg.raw_length()) {
  int in = 1;
  int len = length_;
  lengths_.push_back(len);
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    int out = cfg.conv_channels[i];
    conv_.emplace_back("cnn.conv" + std::to_string(i), in, out, cfg.conv_kernel,
                       cfg.conv_kernel / 2);
    pool_.emplace_back(cfg.pool_kernel, cfg.pool_stride);
    drop_.emplace_back(cfg.dropout_conv);
    relu_.emplace_back();
    len = pool_.back().out_length(conv_.back().out_length(len));
    lengths_.push_back(len);
    in = out;
  }
  fc1_ = nn::Linear<S>("cnn.fc1", in * len, cfg.cnn_hidden);
  fc2_ = nn::Linear<S>("cnn.fc2", cfg.cnn_hidden, cfg.branch_dim);
}

template <typename S>
void CnnBranch<S>::init(Rng& rng) {
  for (auto& c : conv_) c.init(rng);
  fc1_.init(rng);
  fc2_.init(rng);
}

template <typename S>
Mat<S> CnnBranch<S>::forward(const Mat<S>& raw, int batch, bool train, Rng& rng) {
  batch_ = batch;
  Mat<S> x = raw;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    Mat<S> y = conv_[i].forward(x, lengths_[i], batch);
    y = i == 0 ? elu_.forward(y) : relu_[i].forward(y);
    y = pool_[i].forward(y, conv_[i].out_length(lengths_[i]), batch);
    x = drop_[i].forward(y, train, rng);
  }
  Mat<S> flat = Eigen::Map<const Mat<S>>(x.data(), x.size() / batch, batch);
  return fc2_.forward(fc1_.forward(flat));
}

template <typename S>
void CnnBranch<S>::backward(const Mat<S>& dy) {
  Mat<S> d = fc1_.backward(fc2_.backward(dy));
  const Eigen::Index channels = conv_.back().out_channels();
  Mat<S> x = Eigen::Map<const Mat<S>>(d.data(), channels, d.size() / channels);
  for (std::size_t k = conv_.size(); k-- > 0;) {
    x = drop_[k].backward(x);
    x = pool_[k].backward(x);
    x = k == 0 ? elu_.backward(x) : relu_[k].backward(x);
    x = conv_[k].backward(x);
  }
}

template <typename S>
void CnnBranch<S>::collect(nn::ParamList<S>& out) {
  for (auto& c : conv_) c.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
}

// ---------------------------------------------------------------- IpdBranch

template <typename S>
IpdBranch<S>::IpdBranch(const ModelConfig& cfg)
    : embed_("ipd.embed", cfg.vocab, cfg.ipd_embed_dim),
      hidden_(cfg.lstm_hidden),
      bidirectional_(cfg.bidirectional) {
  const int dirs = cfg.bidirectional ? 2 : 1;
  int in = cfg.ipd_embed_dim;
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    lstm_.emplace_back("ipd.lstm" + std::to_string(l), in, cfg.lstm_hidden, cfg.bidirectional);
    if (l + 1 < cfg.lstm_layers) drop_.emplace_back(cfg.dropout_lstm);
    in = cfg.lstm_hidden * dirs;
  }
  fc_ = nn::Linear<S>("ipd.fc", cfg.lstm_hidden * dirs, cfg.branch_dim);
}

template <typename S>
void IpdBranch<S>::init(Rng& rng) {
  embed_.init_log_scale(rng);
  for (auto& l : lstm_) l.init(rng);
  fc_.init(rng);
}

template <typename S>
Mat<S> IpdBranch<S>::forward(const std::vector<std::int32_t>& tokens,
                             const std::vector<int>& lengths, int steps, bool train, Rng& rng) {
  Mat<S> x = embed_.forward(tokens);
  for (std::size_t l = 0; l < lstm_.size(); ++l) {
    Mat<S> y = lstm_[l].forward(x, lengths, steps);
    x = l + 1 < lstm_.size() ? drop_[l].forward(y, train, rng) : std::move(y);
  }
  const auto& last = lstm_.back();
  const Eigen::Index B = static_cast<Eigen::Index>(lengths.size());
  Mat<S> final_h(static_cast<Eigen::Index>(last.directions()) * hidden_, B);
  final_h.topRows(hidden_) = last.final_forward();
  if (bidirectional_) final_h.bottomRows(hidden_) = last.final_backward();
  return fc_.forward(final_h);
}

template <typename S>
void IpdBranch<S>::backward(const Mat<S>& dy) {
  Mat<S> d_final = fc_.backward(dy);
  Mat<S> dff = d_final.topRows(hidden_);
  Mat<S> dfb;
  if (bidirectional_) dfb = d_final.bottomRows(hidden_);
  Mat<S> d = lstm_.back().backward(Mat<S>(), dff, dfb);
  for (std::size_t l = lstm_.size() - 1; l-- > 0;) {
    d = drop_[l].backward(d);
    d = lstm_[l].backward(d, Mat<S>(), Mat<S>());
  }
  embed_.backward(d);
}

template <typename S>
void IpdBranch<S>::collect(nn::ParamList<S>& out) {
  embed_.collect(out);
  for (auto& l : lstm_) l.collect(out);
  fc_.collect(out);
}

// ---------------------------------------------------------------- Integrator

template <typename S>
Integrator<S>::Integrator(const ModelConfig& cfg)
    : dim_(cfg.branch_dim),
      conv_("integ.conv", 1, cfg.integ_channels, cfg.integ_kernel, cfg.integ_pad) {
  fc_ = nn::Linear<S>("integ.fc", cfg.integ_channels * conv_.out_length(2 * dim_),
                      cfg.embedding_dim);
}

template <typename S>
void Integrator<S>::init(Rng& rng) {
  conv_.init(rng);
  fc_.init(rng);
}

template <typename S>
Mat<S> Integrator<S>::forward(const Mat<S>& h1, const Mat<S>& h2) {
  if (h1.rows() != dim_ || h2.rows() != dim_ || h1.cols() != h2.cols())
    throw ShapeMismatch("integration inputs must both be " + std::to_string(dim_) + "-vectors");
  batch_ = static_cast<int>(h1.cols());
  Mat<S> x(1, static_cast<Eigen::Index>(2 * dim_) * batch_);
  for (int b = 0; b < batch_; ++b) {
    x.block(0, static_cast<Eigen::Index>(b) * 2 * dim_, 1, dim_) = h1.col(b).transpose();
    x.block(0, static_cast<Eigen::Index>(b) * 2 * dim_ + dim_, 1, dim_) = h2.col(b).transpose();
  }
  Mat<S> y = relu_.forward(conv_.forward(x, 2 * dim_, batch_));
  Mat<S> flat = Eigen::Map<const Mat<S>>(y.data(), y.size() / batch_, batch_);
  return norm_.forward(fc_.forward(flat));
}

template <typename S>
std::pair<Mat<S>, Mat<S>> Integrator<S>::backward(const Mat<S>& dy) {
  Mat<S> d = fc_.backward(norm_.backward(dy));
  const Eigen::Index channels = conv_.out_channels();
  Mat<S> dconv = Eigen::Map<const Mat<S>>(d.data(), channels, d.size() / channels);
  Mat<S> dx = conv_.backward(relu_.backward(dconv));
  Mat<S> dh1(dim_, batch_), dh2(dim_, batch_);
  for (int b = 0; b < batch_; ++b) {
    dh1.col(b) = dx.block(0, static_cast<Eigen::Index>(b) * 2 * dim_, 1, dim_).transpose();
    dh2.col(b) = dx.block(0, static_cast<Eigen::Index>(b) * 2 * dim_ + dim_, 1, dim_).transpose();
  }
  return {std::move(dh1), std::move(dh2)};
}

template <typename S>
void Integrator<S>::collect(nn::ParamList<S>& out) {
  conv_.collect(out);
  fc_.collect(out);
}

// ---------------------------------------------------------------- ResidualBlock

template <typename S>
ResidualBlock<S>::ResidualBlock(const ModelConfig& cfg)
    : l1_("residual.fc1", cfg.branch_dim, cfg.reconstruct_hidden),
      l2_("residual.fc2", cfg.reconstruct_hidden, cfg.branch_dim) {}

template <typename S>
void ResidualBlock<S>::init(Rng& rng) {
  l1_.init(rng);
  l2_.init(rng);
}

template <typename S>
Mat<S> ResidualBlock<S>::forward(const Mat<S>& h) {
  if (h.rows() != l1_.in()) throw ShapeMismatch("residual block input has wrong length");
  return h + r2_.forward(l2_.forward(r1_.forward(l1_.forward(h))));
}

template <typename S>
Mat<S> ResidualBlock<S>::backward(const Mat<S>& dy) {
  return dy + l1_.backward(r1_.backward(l2_.backward(r2_.backward(dy))));
}

template <typename S>
void ResidualBlock<S>::collect(nn::ParamList<S>& out) {
  l1_.collect(out);
  l2_.collect(out);
}

// ---------------------------------------------------------------- ReconstructNet

template <typename S>
ReconstructNet<S>::ReconstructNet(const ModelConfig& cfg)
    : steps_(cfg.rnn_steps),
      features_(cfg.rnn_features),
      rnn_("reconstruct.rnn", cfg.rnn_features, cfg.rnn_hidden) {}

template <typename S>
void ReconstructNet<S>::init(Rng& rng) {
  rnn_.init(rng);
}

template <typename S>
Mat<S> ReconstructNet<S>::forward(const Mat<S>& h1_res, const Mat<S>& h2) {
  batch_ = static_cast<int>(h1_res.cols());
  Mat<S> fused = h1_res + h2;
  Mat<S> seq(features_, static_cast<Eigen::Index>(steps_) * batch_);
  for (int t = 0; t < steps_; ++t)
    for (int b = 0; b < batch_; ++b)
      seq.col(static_cast<Eigen::Index>(t) * batch_ + b) = fused.col(b).segment(t * features_, features_);
  return rnn_.forward(seq, steps_);
}

template <typename S>
Mat<S> ReconstructNet<S>::backward(const Mat<S>& dy) {
  Mat<S> dseq = rnn_.backward(dy);
  Mat<S> dfused(static_cast<Eigen::Index>(steps_) * features_, batch_);
  for (int t = 0; t < steps_; ++t)
    for (int b = 0; b < batch_; ++b)
      dfused.col(b).segment(t * features_, features_) =
          dseq.col(static_cast<Eigen::Index>(t) * batch_ + b);
  return dfused;
}

template <typename S>
void ReconstructNet<S>::collect(nn::ParamList<S>& out) {
  rnn_.collect(out);
}

// ---------------------------------------------------------------- Model

template <typename S>
Model<S>::Model(const ModelConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      cnn_(cfg),
      ipd_(cfg),
      integ_(cfg),
      residual_(cfg),
      recon_(cfg),
      raw_const_("ablation.raw_constant", cfg.branch_dim, 1),
      ipd_const_("ablation.ipd_constant", cfg.branch_dim, 1) {}

template <typename S>
void Model<S>::init(std::uint64_t seed) {
  Rng r_cnn(derive_seed(seed, 101)), r_ipd(derive_seed(seed, 102)),
      r_integ(derive_seed(seed, 103)), r_res(derive_seed(seed, 104)),
      r_rec(derive_seed(seed, 105)), r_const(derive_seed(seed, 106));
  cnn_.init(r_cnn);
  ipd_.init(r_ipd);
  integ_.init(r_integ);
  residual_.init(r_res);
  recon_.init(r_rec);
  nn::init_uniform(raw_const_.value, 0.1, r_const);
  nn::init_uniform(ipd_const_.value, 0.1, r_const);
}

template <typename S>
nn::ParamList<S> Model<S>::params() {
  nn::ParamList<S> out;
  cnn_.collect(out);
  ipd_.collect(out);
  integ_.collect(out);
  if (cfg_.arch == Arch::kEarlyMfcPlus) {
    residual_.collect(out);
    recon_.collect(out);
  }
  out.push_back(&raw_const_);
  out.push_back(&ipd_const_);
  return out;
}

template <typename S>
void Model<S>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template <typename S>
std::size_t Model<S>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : params()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename S>
Mat<S> Model<S>::forward(const Batch<S>& batch, bool train, Rng& rng) {
  return forward(batch, cfg_.mode, train, rng);
}

template <typename S>
Mat<S> Model<S>::forward(const Batch<S>& batch, EmbedMode mode, bool train, Rng& rng) {
  if (cfg_.arch == Arch::kEarlyMfcPlus && mode != EmbedMode::kFull)
    throw InvalidConfig("early_mfc_plus supports only the full embed mode");
  const int B = batch.size;
  last_mode_ = mode;
  last_batch_ = B;
  Mat<S> h1 = mode == EmbedMode::kIpdOnly ? Mat<S>(raw_const_.value.replicate(1, B))
                                          : cnn_.forward(batch.raw, B, train, rng);
  Mat<S> h2 = mode == EmbedMode::kRawOnly
                  ? Mat<S>(ipd_const_.value.replicate(1, B))
                  : ipd_.forward(batch.tokens, batch.lengths, batch.steps, train, rng);
  if (cfg_.arch == Arch::kEarlyMfcPlus) {
    Mat<S> h2r = recon_.forward(residual_.forward(h1), h2);
    return integ_.forward(h1, h2r);
  }
  return integ_.forward(h1, h2);
}

template <typename S>
void Model<S>::backward(const Mat<S>& d_embed) {
  auto [dh1, dh2] = integ_.backward(d_embed);
  if (cfg_.arch == Arch::kEarlyMfcPlus) {
    Mat<S> dfused = recon_.backward(dh2);
    dh1 += residual_.backward(dfused);
    dh2 = std::move(dfused);
  }
  if (last_mode_ == EmbedMode::kIpdOnly)
    raw_const_.grad.col(0) += dh1.rowwise().sum();
  else
    cnn_.backward(dh1);
  if (last_mode_ == EmbedMode::kRawOnly)
    ipd_const_.grad.col(0) += dh2.rowwise().sum();
  else
    ipd_.backward(dh2);
}

// ---------------------------------------------------------------- wrappers

namespace {

MultiViewSample blank_sample(const ModelConfig& cfg) {
  MultiViewSample s;
  s.raw.n_packets = cfg.raw_packets;
  s.raw.n_bytes = cfg.raw_bytes;
  s.raw.values.assign(static_cast<std::size_t>(cfg.raw_length()), 0.0f);
  s.ipd.values.assign(static_cast<std::size_t>(cfg.seq_length), 0);
  return s;
}

}  // namespace

template <typename S>
Vec<S> cnn_forward(Model<S>& model, const RawView& raw) {
  MultiViewSample s = blank_sample(model.config());
  s.raw = raw;
  Batch<S> batch = make_batch<S>({&s}, model.config());
  Rng rng(0);
  return model.cnn().forward(batch.raw, 1, false, rng).col(0);
}

template <typename S>
Vec<S> lstm_forward(Model<S>& model, const IpdView& ipd) {
  MultiViewSample s = blank_sample(model.config());
  s.ipd = ipd;
  Batch<S> batch = make_batch<S>({&s}, model.config());
  Rng rng(0);
  return model.ipd().forward(batch.tokens, batch.lengths, batch.steps, false, rng).col(0);
}

template <typename S>
Vec<S> integrate(Model<S>& model, const Vec<S>& h1, const Vec<S>& h2) {
  return model.integrator().forward(h1, h2).col(0);
}

template <typename S>
Vec<S> residual_block(Model<S>& model, const Vec<S>& h1) {
  return model.residual().forward(h1).col(0);
}

template <typename S>
Vec<S> embed(Model<S>& model, const MultiViewSample& sample, EmbedMode mode) {
  Batch<S> batch = make_batch<S>({&sample}, model.config());
  Rng rng(0);
  return model.forward(batch, mode, false, rng).col(0);
}

template <typename S>
Vec<S> reconstruct_forward(Model<S>& model, const RawView& raw, const IpdView& ipd) {
  if (model.config().arch != Arch::kEarlyMfcPlus)
    throw InvalidConfig("reconstruct_forward needs an early_mfc_plus model");
  MultiViewSample s = blank_sample(model.config());
  s.raw = raw;
  s.ipd = ipd;
  return embed(model, s, EmbedMode::kFull);
}

Mat<float> embed_all(Model<float>& model, const std::vector<MultiViewSample>& samples,
                     int batch_size) {
  Mat<float> out(model.config().embedding_dim, static_cast<Eigen::Index>(samples.size()));
  Rng rng(0);
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const MultiViewSample*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&samples[i]);
    Batch<float> batch = make_batch<float>(ptrs, model.config());
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        model.forward(batch, false, rng);
  }
  return out;
}

#define EARLYCORR_INSTANTIATE(S)                                                        \
  template Batch<S> make_batch<S>(const std::vector<const MultiViewSample*>&,           \
                                  const ModelConfig&);                                  \
  template class CnnBranch<S>;                                                          \
  template class IpdBranch<S>;                                                          \
  template class Integrator<S>;                                                         \
  template class ResidualBlock<S>;                                                      \
  template class ReconstructNet<S>;                                                     \
  template class Model<S>;                                                              \
  template Vec<S> cnn_forward<S>(Model<S>&, const RawView&);                            \
  template Vec<S> lstm_forward<S>(Model<S>&, const IpdView&);                           \
  template Vec<S> integrate<S>(Model<S>&, const Vec<S>&, const Vec<S>&);                \
  template Vec<S> residual_block<S>(Model<S>&, const Vec<S>&);                          \
  template Vec<S> embed<S>(Model<S>&, const MultiViewSample&, EmbedMode);               \
  template Vec<S> reconstruct_forward<S>(Model<S>&, const RawView&, const IpdView&);

EARLYCORR_INSTANTIATE(float)
EARLYCORR_INSTANTIATE(double)

#undef EARLYCORR_INSTANTIATE

}  // namespace earlycorr
