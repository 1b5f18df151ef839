#include "earlycorr/nn.hpp"

#include <cmath>
#include <limits>

namespace earlycorr::nn {

namespace {

template <typename S>
Mat<S> sigmoid(const Mat<S>& x) {
  return (S(1) / (S(1) + (-x.array()).exp())).matrix();
}

}  // namespace

template <typename S>
void init_uniform(Mat<S>& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------- Linear

template <typename S>
Linear<S>::Linear(const std::string& name, int in, int out)
    : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {}

template <typename S>
void Linear<S>::init(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in()));
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

template <typename S>
Mat<S> Linear<S>::forward(const Mat<S>& x) {
  x_ = x;
  Mat<S> y = weight_.value * x;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename S>
Mat<S> Linear<S>::backward(const Mat<S>& dy) {
  weight_.grad.noalias() += dy * x_.transpose();
  bias_.grad.col(0) += dy.rowwise().sum();
  return weight_.value.transpose() * dy;
}

// ---------------------------------------------------------------- Conv1d

template <typename S>
Conv1d<S>::Conv1d(const std::string& name, int in_ch, int out_ch, int kernel, int pad)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      pad_(pad),
      weight_(name + ".weight", out_ch, kernel * in_ch),
      bias_(name + ".bias", out_ch, 1) {}

template <typename S>
void Conv1d<S>::init(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_ch_ * kernel_));
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

template <typename S>
Mat<S> Conv1d<S>::forward(const Mat<S>& x, int length, int batch) {
  length_ = length;
  batch_ = batch;
  const int lout = out_length(length);
  cols_.setZero(static_cast<Eigen::Index>(kernel_) * in_ch_,
                static_cast<Eigen::Index>(lout) * batch);
  for (int b = 0; b < batch; ++b) {
    for (int l = 0; l < lout; ++l) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * lout + l;
      for (int kk = 0; kk < kernel_; ++kk) {
        int src = l + kk - pad_;
        if (src < 0 || src >= length) continue;
        cols_.block(static_cast<Eigen::Index>(kk) * in_ch_, col, in_ch_, 1) =
            x.col(static_cast<Eigen::Index>(b) * length + src);
      }
    }
  }
  Mat<S> y = weight_.value * cols_;
  y.colwise() += bias_.value.col(0);
  return y;
}

template <typename S>
Mat<S> Conv1d<S>::backward(const Mat<S>& dy) {
  weight_.grad.noalias() += dy * cols_.transpose();
  bias_.grad.col(0) += dy.rowwise().sum();
  Mat<S> dcols = weight_.value.transpose() * dy;
  const int lout = out_length(length_);
  Mat<S> dx = Mat<S>::Zero(in_ch_, static_cast<Eigen::Index>(length_) * batch_);
  for (int b = 0; b < batch_; ++b) {
    for (int l = 0; l < lout; ++l) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * lout + l;
      for (int kk = 0; kk < kernel_; ++kk) {
        int src = l + kk - pad_;
        if (src < 0 || src >= length_) continue;
        dx.col(static_cast<Eigen::Index>(b) * length_ + src) +=
            dcols.block(static_cast<Eigen::Index>(kk) * in_ch_, col, in_ch_, 1);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- MaxPool1d

template <typename S>
int MaxPool1d<S>::padding_for(int length, int kernel, int stride) {
  int lout = length <= kernel ? 1 : (length - kernel + stride - 1) / stride + 1;
  int total = (lout - 1) * stride + kernel - length;
  return total <= 0 ? 0 : (total + 1) / 2;
}

template <typename S>
int MaxPool1d<S>::out_length(int length) const {
  int pad = padding_for(length, kernel_, stride_);
  return (length + 2 * pad - kernel_) / stride_ + 1;
}

template <typename S>
Mat<S> MaxPool1d<S>::forward(const Mat<S>& x, int length, int batch) {
  const int pad = padding_for(length, kernel_, stride_);
  const int lout = out_length(length);
  const Eigen::Index ch = x.rows();
  in_rows_ = x.rows();
  in_cols_ = x.cols();
  Mat<S> y(ch, static_cast<Eigen::Index>(lout) * batch);
  argmax_.assign(static_cast<std::size_t>(y.size()), 0);
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < lout; ++o) {
      const int start = o * stride_ - pad;
      const Eigen::Index ocol = static_cast<Eigen::Index>(b) * lout + o;
      for (Eigen::Index c = 0; c < ch; ++c) {
        S best = -std::numeric_limits<S>::infinity();
        Eigen::Index best_idx = -1;
        for (int kk = 0; kk < kernel_; ++kk) {
          int src = start + kk;
          if (src < 0 || src >= length) continue;
          Eigen::Index icol = static_cast<Eigen::Index>(b) * length + src;
          S v = x(c, icol);
          if (best_idx < 0 || v > best) {
            best = v;
            best_idx = icol * ch + c;
          }
        }
        y(c, ocol) = best;
        argmax_[static_cast<std::size_t>(ocol * ch + c)] = best_idx;
      }
    }
  }
  return y;
}

template <typename S>
Mat<S> MaxPool1d<S>::backward(const Mat<S>& dy) {
  Mat<S> dx = Mat<S>::Zero(in_rows_, in_cols_);
  S* out = dx.data();
  const S* in = dy.data();
  for (std::size_t i = 0; i < argmax_.size(); ++i) out[argmax_[i]] += in[i];
  return dx;
}

// ---------------------------------------------------------------- activations

template <typename S>
Mat<S> Relu<S>::forward(const Mat<S>& x) {
  y_ = x.cwiseMax(S(0));
  return y_;
}

template <typename S>
Mat<S> Relu<S>::backward(const Mat<S>& dy) {
  return (y_.array() > S(0)).select(dy, S(0));
}

template <typename S>
Mat<S> Elu<S>::forward(const Mat<S>& x) {
  x_ = x;
  y_ = (x.array() > S(0)).select(x, (x.array().exp() - S(1)).matrix());
  return y_;
}

template <typename S>
Mat<S> Elu<S>::backward(const Mat<S>& dy) {
  return (x_.array() > S(0)).select(dy, (dy.array() * (y_.array() + S(1))).matrix());
}

template <typename S>
Mat<S> Dropout<S>::forward(const Mat<S>& x, bool train, Rng& rng) {
  active_ = train && p_ > 0.0;
  if (!active_) return x;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p_));
  mask_.resize(x.rows(), x.cols());
  S* m = mask_.data();
  for (Eigen::Index i = 0; i < mask_.size(); ++i) m[i] = rng.uniform() < p_ ? S(0) : keep_scale;
  return x.cwiseProduct(mask_);
}

template <typename S>
Mat<S> Dropout<S>::backward(const Mat<S>& dy) {
  if (!active_) return dy;
  return dy.cwiseProduct(mask_);
}

// ---------------------------------------------------------------- Embedding

template <typename S>
Embedding<S>::Embedding(const std::string& name, int vocab, int dim)
    : table_(name + ".table", dim, vocab) {}

template <typename S>
void Embedding<S>::init_log_scale(Rng& rng) {
  const Eigen::Index dim = table_.value.rows();
  const Eigen::Index vocab = table_.value.cols();
  const double denom = std::log1p(static_cast<double>(vocab - 1));
  for (Eigen::Index v = 0; v < vocab; ++v) {
    double x = std::log1p(static_cast<double>(v)) / denom;
    for (Eigen::Index r = 0; r < dim; ++r) {
      double freq = static_cast<double>(r / 2 + 1);
      double base = (r % 2 == 0) ? std::sin(M_PI * freq * x) : std::cos(M_PI * freq * x);
      table_.value(r, v) = static_cast<S>(base + 0.01 * rng.normal());
    }
  }
}

template <typename S>
Mat<S> Embedding<S>::forward(const std::vector<std::int32_t>& tokens) {
  tokens_ = tokens;
  Mat<S> y(table_.value.rows(), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    y.col(static_cast<Eigen::Index>(i)) = table_.value.col(tokens[i]);
  return y;
}

template <typename S>
void Embedding<S>::backward(const Mat<S>& dy) {
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    table_.grad.col(tokens_[i]) += dy.col(static_cast<Eigen::Index>(i));
}

// ---------------------------------------------------------------- Lstm

template <typename S>
Lstm<S>::Lstm(const std::string& name, int input, int hidden, bool bidirectional)
    : input_(input), hidden_(hidden), bidirectional_(bidirectional) {
  for (int d = 0; d < directions(); ++d) {
    std::string prefix = name + (d == 0 ? ".fwd" : ".bwd");
    dirs_[d].w_ih = Param<S>(prefix + ".w_ih", 4 * hidden, input);
    dirs_[d].w_hh = Param<S>(prefix + ".w_hh", 4 * hidden, hidden);
    dirs_[d].bias = Param<S>(prefix + ".bias", 4 * hidden, 1);
  }
}

template <typename S>
void Lstm<S>::init(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (int d = 0; d < directions(); ++d) {
    init_uniform(dirs_[d].w_ih.value, bound, rng);
    init_uniform(dirs_[d].w_hh.value, bound, rng);
    init_uniform(dirs_[d].bias.value, bound, rng);
  }
}

template <typename S>
void Lstm<S>::collect(ParamList<S>& out) {
  for (int d = 0; d < directions(); ++d) {
    out.push_back(&dirs_[d].w_ih);
    out.push_back(&dirs_[d].w_hh);
    out.push_back(&dirs_[d].bias);
  }
}

template <typename S>
Mat<S> Lstm<S>::forward(const Mat<S>& x, const std::vector<int>& lengths, int steps) {
  x_ = x;
  lengths_ = lengths;
  steps_ = steps;
  batch_ = static_cast<int>(lengths.size());
  Mat<S> out = Mat<S>::Zero(static_cast<Eigen::Index>(directions()) * hidden_, x.cols());
  for (int d = 0; d < directions(); ++d) {
    Mat<S> xproj = dirs_[d].w_ih.value * x;
    xproj.colwise() += dirs_[d].bias.value.col(0);
    run_direction(dirs_[d], d == 1, xproj, out, d * hidden_);
  }
  return out;
}

template <typename S>
void Lstm<S>::run_direction(Direction& d, bool reverse, const Mat<S>& xproj, Mat<S>& out,
                            int row_offset) {
  const int T = steps_, B = batch_, H = hidden_;
  d.gates.resize(4 * H, static_cast<Eigen::Index>(T) * B);
  d.states.setZero(H, static_cast<Eigen::Index>(T + 1) * B);
  d.cells.setZero(H, static_cast<Eigen::Index>(T + 1) * B);
  Mat<S> h = Mat<S>::Zero(H, B), c = Mat<S>::Zero(H, B);
  Mat<S> pre(4 * H, B);
  for (int s = 0; s < T; ++s) {
    const int t = reverse ? T - 1 - s : s;
    pre.noalias() = d.w_hh.value * h;
    pre += xproj.middleCols(static_cast<Eigen::Index>(t) * B, B);
    auto gates = d.gates.middleCols(static_cast<Eigen::Index>(s) * B, B);
    gates.topRows(2 * H) = sigmoid<S>(pre.topRows(2 * H));
    gates.middleRows(2 * H, H) = pre.middleRows(2 * H, H).array().tanh().matrix();
    gates.bottomRows(H) = sigmoid<S>(pre.bottomRows(H));
    for (int b = 0; b < B; ++b) {
      if (t >= lengths_[b]) continue;
      auto i = gates.col(b).segment(0, H).array();
      auto f = gates.col(b).segment(H, H).array();
      auto g = gates.col(b).segment(2 * H, H).array();
      auto o = gates.col(b).segment(3 * H, H).array();
      c.col(b) = (f * c.col(b).array() + i * g).matrix();
      h.col(b) = (o * c.col(b).array().tanh()).matrix();
      out.block(row_offset, static_cast<Eigen::Index>(t) * B + b, H, 1) = h.col(b);
    }
    d.states.middleCols(static_cast<Eigen::Index>(s + 1) * B, B) = h;
    d.cells.middleCols(static_cast<Eigen::Index>(s + 1) * B, B) = c;
  }
  d.final_h = h;
}

template <typename S>
Mat<S> Lstm<S>::backward(const Mat<S>& dy, const Mat<S>& d_final_fwd,
                         const Mat<S>& d_final_bwd) {
  Mat<S> dx = Mat<S>::Zero(input_, x_.cols());
  for (int d = 0; d < directions(); ++d) {
    Mat<S> dxproj = Mat<S>::Zero(4 * hidden_, x_.cols());
    backprop_direction(dirs_[d], d == 1, dy, d * hidden_, d == 0 ? d_final_fwd : d_final_bwd,
                       dxproj);
    dirs_[d].w_ih.grad.noalias() += dxproj * x_.transpose();
    dirs_[d].bias.grad.col(0) += dxproj.rowwise().sum();
    dx.noalias() += dirs_[d].w_ih.value.transpose() * dxproj;
  }
  return dx;
}

template <typename S>
void Lstm<S>::backprop_direction(Direction& d, bool reverse, const Mat<S>& dy, int row_offset,
                                 const Mat<S>& d_final, Mat<S>& dxproj) {
  const int T = steps_, B = batch_, H = hidden_;
  Mat<S> dh = d_final.size() ? d_final : Mat<S>::Zero(H, B);
  Mat<S> dc = Mat<S>::Zero(H, B);
  Mat<S> dpre(4 * H, B), dh_prev(H, B);
  for (int s = T - 1; s >= 0; --s) {
    const int t = reverse ? T - 1 - s : s;
    const auto gates = d.gates.middleCols(static_cast<Eigen::Index>(s) * B, B);
    const auto c_prev = d.cells.middleCols(static_cast<Eigen::Index>(s) * B, B);
    const auto c_cur = d.cells.middleCols(static_cast<Eigen::Index>(s + 1) * B, B);
    const auto h_prev = d.states.middleCols(static_cast<Eigen::Index>(s) * B, B);
    bool any_active = false;
    for (int b = 0; b < B; ++b) {
      if (t >= lengths_[b]) {
        dpre.col(b).setZero();
        continue;
      }
      any_active = true;
      auto dh_b = dh.col(b).array();
      Eigen::Array<S, Eigen::Dynamic, 1> dh_total = dh_b;
      if (dy.size())
        dh_total += dy.block(row_offset, static_cast<Eigen::Index>(t) * B + b, H, 1).array();
      auto i = gates.col(b).segment(0, H).array();
      auto f = gates.col(b).segment(H, H).array();
      auto g = gates.col(b).segment(2 * H, H).array();
      auto o = gates.col(b).segment(3 * H, H).array();
      Eigen::Array<S, Eigen::Dynamic, 1> tc = c_cur.col(b).array().tanh();
      Eigen::Array<S, Eigen::Dynamic, 1> dct =
          dc.col(b).array() + dh_total * o * (S(1) - tc * tc);
      dpre.col(b).segment(0, H) = (dct * g * i * (S(1) - i)).matrix();
      dpre.col(b).segment(H, H) = (dct * c_prev.col(b).array() * f * (S(1) - f)).matrix();
      dpre.col(b).segment(2 * H, H) = (dct * i * (S(1) - g * g)).matrix();
      dpre.col(b).segment(3 * H, H) = (dh_total * tc * o * (S(1) - o)).matrix();
      dc.col(b) = (dct * f).matrix();
    }
    if (!any_active) continue;
    dxproj.middleCols(static_cast<Eigen::Index>(t) * B, B) = dpre;
    d.w_hh.grad.noalias() += dpre * h_prev.transpose();
    dh_prev.noalias() = d.w_hh.value.transpose() * dpre;
    for (int b = 0; b < B; ++b)
      if (t < lengths_[b]) dh.col(b) = dh_prev.col(b);
  }
}

// ---------------------------------------------------------------- Rnn

template <typename S>
Rnn<S>::Rnn(const std::string& name, int input, int hidden)
    : w_ih_(name + ".w_ih", hidden, input),
      w_hh_(name + ".w_hh", hidden, hidden),
      bias_(name + ".bias", hidden, 1) {}

template <typename S>
void Rnn<S>::init(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(w_hh_.value.rows()));
  init_uniform(w_ih_.value, bound, rng);
  init_uniform(w_hh_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

template <typename S>
Mat<S> Rnn<S>::forward(const Mat<S>& x, int steps) {
  x_ = x;
  steps_ = steps;
  batch_ = static_cast<int>(x.cols() / steps);
  const Eigen::Index H = w_hh_.value.rows();
  Mat<S> xproj = w_ih_.value * x;
  xproj.colwise() += bias_.value.col(0);
  states_.setZero(H, static_cast<Eigen::Index>(steps + 1) * batch_);
  Mat<S> h = Mat<S>::Zero(H, batch_);
  for (int t = 0; t < steps; ++t) {
    Mat<S> pre = xproj.middleCols(static_cast<Eigen::Index>(t) * batch_, batch_);
    pre.noalias() += w_hh_.value * h;
    h = pre.array().tanh().matrix();
    states_.middleCols(static_cast<Eigen::Index>(t + 1) * batch_, batch_) = h;
  }
  return h;
}

template <typename S>
Mat<S> Rnn<S>::backward(const Mat<S>& d_last) {
  const Eigen::Index H = w_hh_.value.rows();
  Mat<S> dxproj(H, x_.cols());
  Mat<S> dh = d_last;
  for (int t = steps_ - 1; t >= 0; --t) {
    auto h_t = states_.middleCols(static_cast<Eigen::Index>(t + 1) * batch_, batch_);
    auto h_prev = states_.middleCols(static_cast<Eigen::Index>(t) * batch_, batch_);
    Mat<S> dpre = (dh.array() * (S(1) - h_t.array().square())).matrix();
    w_hh_.grad.noalias() += dpre * h_prev.transpose();
    dxproj.middleCols(static_cast<Eigen::Index>(t) * batch_, batch_) = dpre;
    dh = w_hh_.value.transpose() * dpre;
  }
  w_ih_.grad.noalias() += dxproj * x_.transpose();
  bias_.grad.col(0) += dxproj.rowwise().sum();
  return w_ih_.value.transpose() * dxproj;
}

// ---------------------------------------------------------------- L2Normalize

template <typename S>
Mat<S> L2Normalize<S>::forward(const Mat<S>& x) {
  norms_ = x.colwise().norm().transpose();
  y_ = x;
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    S n = std::max(norms_(b), S(1e-12));
    norms_(b) = n;
    y_.col(b) /= n;
  }
  return y_;
}

template <typename S>
Mat<S> L2Normalize<S>::backward(const Mat<S>& dy) {
  Mat<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index b = 0; b < dy.cols(); ++b) {
    S proj = y_.col(b).dot(dy.col(b));
    dx.col(b) = (dy.col(b) - y_.col(b) * proj) / norms_(b);
  }
  return dx;
}

// ---------------------------------------------------------------- Adam

template <typename S>
Adam<S>::Adam(ParamList<S> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
  }
}

template <typename S>
void Adam<S>::step() {
  ++t_;
  const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
  const S c1 = static_cast<S>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const S c2 = static_cast<S>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const S lr = static_cast<S>(lr_), eps = static_cast<S>(eps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = b1 * m_[i] + (S(1) - b1) * p.grad;
    v_[i] = b2 * v_[i] + (S(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

#define EARLYCORR_INSTANTIATE(S)                          \
  template void init_uniform<S>(Mat<S>&, double, Rng&);   \
  template class Linear<S>;                               \
  template class Conv1d<S>;                               \
  template class MaxPool1d<S>;                            \
  template class Relu<S>;                                 \
  template class Elu<S>;                                  \
  template class Dropout<S>;                              \
  template class Embedding<S>;                            \
  template class Lstm<S>;                                 \
  template class Rnn<S>;                                  \
  template class L2Normalize<S>;                          \
  template class Adam<S>;

EARLYCORR_INSTANTIATE(float)
EARLYCORR_INSTANTIATE(double)

#undef EARLYCORR_INSTANTIATE

}  // namespace earlycorr::nn
