#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diral/config.hpp"
#include "diral/rng.hpp"

namespace diral {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

enum class NetArch { lstm, fnn };

// Architecture of the shared Q-network: per-step input of size B+K, one
// recurrent (or flattened-window dense) layer of `hidden` units, one ReLU
// hidden dense layer, and a linear head with one output per resource.
struct QNetConfig {
  int input_size = 43;
  int n_actions = 3;
  int hidden = 256;
  int history_len = 6;  // L
  NetArch arch = NetArch::lstm;
};

namespace nn {

template <typename S>
Mat<S> sigmoid(const Mat<S>& x) {
  return ((-x.array()).exp() + S(1)).inverse().matrix();
}

// Uniform in +-1/sqrt(fan_in).
template <typename S>
void init_uniform(Mat<S>& w, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
}

}  // namespace nn

// Fully connected layer, row-major batches: y = act(x * W + b).
template <typename S>
struct DenseLayer {
  enum class Activation { relu, identity };

  Mat<S> w;  // in x out
  Mat<S> b;  // 1 x out
  Activation activation = Activation::identity;

  struct Cache {
    Mat<S> input;
    Mat<S> pre;  // pre-activation
  };

  struct Grads {
    Mat<S> w;
    Mat<S> b;
  };

  void init(int in, int out, Activation act, Rng& rng) {
    activation = act;
    w.resize(in, out);
    b.setZero(1, out);
    nn::init_uniform(w, in, rng);
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache = nullptr) const {
    Mat<S> pre = x * w;
    pre.rowwise() += b.row(0);
    if (cache) {
      cache->input = x;
      cache->pre = pre;
    }
    if (activation == Activation::relu) return pre.cwiseMax(S(0));
    return pre;
  }

  // Returns the gradient w.r.t. the layer input.
  Mat<S> backward(const Mat<S>& dout, const Cache& cache, Grads& grads) const {
    Mat<S> dpre = dout;
    if (activation == Activation::relu)
      dpre = dpre.cwiseProduct((cache.pre.array() > S(0)).template cast<S>().matrix());
    grads.w = cache.input.transpose() * dpre;
    grads.b = dpre.colwise().sum();
    return dpre * w.transpose();
  }
};

// Single LSTM layer unrolled over a fixed-length window, standard sigmoid
// gates and tanh candidate/cell output. Gate order in the fused weight
// matrices: input, forget, candidate, output.
template <typename S>
struct LstmLayer {
  int input_size = 0;
  int hidden_size = 0;
  Mat<S> wx;  // input_size x 4H
  Mat<S> wh;  // hidden_size x 4H
  Mat<S> b;   // 1 x 4H

  struct StepCache {
    Mat<S> x, h_prev, c_prev;
    Mat<S> i, f, g, o, c, tanh_c;
  };
  using Cache = std::vector<StepCache>;

  struct Grads {
    Mat<S> wx, wh, b;
  };

  void init(int in, int hidden, Rng& rng) {
    input_size = in;
    hidden_size = hidden;
    wx.resize(in, 4 * hidden);
    wh.resize(hidden, 4 * hidden);
    b.setZero(1, 4 * hidden);
    nn::init_uniform(wx, in, rng);
    nn::init_uniform(wh, hidden, rng);
  }

  // sequence: one (batch x input_size) matrix per step, oldest first.
  // Returns the final hidden state (batch x hidden_size), from a zero
  // initial state.
  Mat<S> forward(const std::vector<Mat<S>>& sequence, Cache* cache = nullptr) const {
    if (sequence.empty()) throw std::invalid_argument("lstm: empty sequence");
    const Eigen::Index batch = sequence[0].rows();
    const int hs = hidden_size;
    Mat<S> h = Mat<S>::Zero(batch, hs);
    Mat<S> c = Mat<S>::Zero(batch, hs);
    if (cache) cache->clear();
    for (const Mat<S>& x : sequence) {
      if (x.cols() != input_size) throw std::invalid_argument("lstm: input width mismatch");
      Mat<S> z = x * wx + h * wh;
      z.rowwise() += b.row(0);
      Mat<S> i = nn::sigmoid<S>(z.leftCols(hs));
      Mat<S> f = nn::sigmoid<S>(z.middleCols(hs, hs));
      Mat<S> g = z.middleCols(2 * hs, hs).array().tanh().matrix();
      Mat<S> o = nn::sigmoid<S>(z.rightCols(hs));
      Mat<S> c_next = f.cwiseProduct(c) + i.cwiseProduct(g);
      Mat<S> tanh_c = c_next.array().tanh().matrix();
      Mat<S> h_next = o.cwiseProduct(tanh_c);
      if (cache) cache->push_back(StepCache{x, h, c, i, f, g, o, c_next, tanh_c});
      h = std::move(h_next);
      c = std::move(c_next);
    }
    return h;
  }

  // Backpropagation through time from the gradient of the final hidden state.
  void backward(const Mat<S>& dh_final, const Cache& cache, Grads& grads) const {
    const int hs = hidden_size;
    grads.wx = Mat<S>::Zero(wx.rows(), wx.cols());
    grads.wh = Mat<S>::Zero(wh.rows(), wh.cols());
    grads.b = Mat<S>::Zero(1, 4 * hs);
    Mat<S> dh = dh_final;
    Mat<S> dc = Mat<S>::Zero(dh.rows(), hs);
    for (int t = static_cast<int>(cache.size()) - 1; t >= 0; --t) {
      const StepCache& s = cache[t];
      Mat<S> d_o = dh.cwiseProduct(s.tanh_c);
      dc += dh.cwiseProduct(s.o).cwiseProduct(
          (S(1) - s.tanh_c.array().square()).matrix());
      Mat<S> d_i = dc.cwiseProduct(s.g);
      Mat<S> d_g = dc.cwiseProduct(s.i);
      Mat<S> d_f = dc.cwiseProduct(s.c_prev);
      Mat<S> dc_prev = dc.cwiseProduct(s.f);
      Mat<S> dz(dh.rows(), 4 * hs);
      dz.leftCols(hs) = d_i.cwiseProduct(s.i).cwiseProduct((S(1) - s.i.array()).matrix());
      dz.middleCols(hs, hs) =
          d_f.cwiseProduct(s.f).cwiseProduct((S(1) - s.f.array()).matrix());
      dz.middleCols(2 * hs, hs) =
          d_g.cwiseProduct((S(1) - s.g.array().square()).matrix());
      dz.rightCols(hs) = d_o.cwiseProduct(s.o).cwiseProduct((S(1) - s.o.array()).matrix());
      grads.wx += s.x.transpose() * dz;
      grads.wh += s.h_prev.transpose() * dz;
      grads.b += dz.colwise().sum();
      dh = dz * wh.transpose();
      dc = std::move(dc_prev);
    }
  }
};

// Q-network mapping an L-step observation window to one Q-value per action.
// lstm arch: LSTM -> dense ReLU -> linear head. fnn arch: the recurrent layer
// is replaced by a ReLU dense layer over the flattened window.
template <typename S>
struct QNetwork {
  QNetConfig cfg;
  LstmLayer<S> lstm;
  DenseLayer<S> front;  // fnn arch only
  DenseLayer<S> hidden;
  DenseLayer<S> head;

  struct Cache {
    typename LstmLayer<S>::Cache lstm;
    typename DenseLayer<S>::Cache front, hidden, head;
    Mat<S> flat;  // fnn arch: flattened window
  };

  struct Grads {
    typename LstmLayer<S>::Grads lstm;
    typename DenseLayer<S>::Grads front, hidden, head;
  };

  void init(const QNetConfig& c, Rng& rng) {
    cfg = c;
    if (cfg.arch == NetArch::lstm) {
      lstm.init(cfg.input_size, cfg.hidden, rng);
    } else {
      front.init(cfg.input_size * cfg.history_len, cfg.hidden,
                 DenseLayer<S>::Activation::relu, rng);
    }
    hidden.init(cfg.hidden, cfg.hidden, DenseLayer<S>::Activation::relu, rng);
    head.init(cfg.hidden, cfg.n_actions, DenseLayer<S>::Activation::identity, rng);
  }

  // sequence: history_len matrices of (batch x input_size), oldest first.
  Mat<S> forward(const std::vector<Mat<S>>& sequence, Cache* cache = nullptr) const {
    Mat<S> feat;
    if (cfg.arch == NetArch::lstm) {
      feat = lstm.forward(sequence, cache ? &cache->lstm : nullptr);
    } else {
      Mat<S> flat(sequence[0].rows(), cfg.input_size * cfg.history_len);
      for (size_t t = 0; t < sequence.size(); ++t)
        flat.middleCols(static_cast<Eigen::Index>(t) * cfg.input_size, cfg.input_size) =
            sequence[t];
      if (cache) cache->flat = flat;
      feat = front.forward(flat, cache ? &cache->front : nullptr);
    }
    Mat<S> h = hidden.forward(feat, cache ? &cache->hidden : nullptr);
    return head.forward(h, cache ? &cache->head : nullptr);
  }

  void backward(const Mat<S>& dq, const Cache& cache, Grads& grads) const {
    Mat<S> dh = head.backward(dq, cache.head, grads.head);
    Mat<S> dfeat = hidden.backward(dh, cache.hidden, grads.hidden);
    if (cfg.arch == NetArch::lstm) {
      lstm.backward(dfeat, cache.lstm, grads.lstm);
    } else {
      front.backward(dfeat, cache.front, grads.front);
    }
  }

  // Parameter blocks in a fixed order, shared by the optimizer, the
  // checkpoint format and the gradient check.
  std::vector<Mat<S>*> params() {
    if (cfg.arch == NetArch::lstm)
      return {&lstm.wx, &lstm.wh, &lstm.b, &hidden.w, &hidden.b, &head.w, &head.b};
    return {&front.w, &front.b, &hidden.w, &hidden.b, &head.w, &head.b};
  }

  std::vector<const Mat<S>*> params() const {
    if (cfg.arch == NetArch::lstm)
      return {&lstm.wx, &lstm.wh, &lstm.b, &hidden.w, &hidden.b, &head.w, &head.b};
    return {&front.w, &front.b, &hidden.w, &hidden.b, &head.w, &head.b};
  }

  std::vector<Mat<S>> grads_as_list(const Grads& g) const {
    if (cfg.arch == NetArch::lstm)
      return {g.lstm.wx, g.lstm.wh, g.lstm.b, g.hidden.w, g.hidden.b, g.head.w, g.head.b};
    return {g.front.w, g.front.b, g.hidden.w, g.hidden.b, g.head.w, g.head.b};
  }
};

// Adam with bias correction over the network's parameter block list.
template <typename S>
class AdamOptimizer {
 public:
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void step(std::vector<Mat<S>*> params, const std::vector<Mat<S>>& grads) {
    if (params.size() != grads.size())
      throw std::invalid_argument("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
        v_.push_back(Mat<S>::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const S bc1 = static_cast<S>(1.0 - std::pow(beta1, t_));
    const S bc2 = static_cast<S>(1.0 - std::pow(beta2, t_));
    const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
    const S lr = static_cast<S>(learning_rate), eps = static_cast<S>(epsilon);
    for (size_t k = 0; k < params.size(); ++k) {
      m_[k] = b1 * m_[k] + (S(1) - b1) * grads[k];
      v_[k] = b2 * v_[k] + (S(1) - b2) * grads[k].cwiseProduct(grads[k]);
      params[k]->array() -=
          lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + eps);
    }
  }

  long step_count() const { return t_; }

 private:
  long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

// --- checkpoint io ---------------------------------------------------------
//
// Binary format, little-endian:
//   magic "DIRALQN1", arch u8, input/hidden/actions/history i32,
//   bins i32, radius f64, then eval and target networks as
//   (n_blocks u32, per block rows/cols i32 + doubles).

namespace ckpt {

constexpr char kMagic[8] = {'D', 'I', 'R', 'A', 'L', 'Q', 'N', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("checkpoint: truncated file");
  return v;
}

template <typename S>
void write_net(std::ostream& out, const QNetwork<S>& net) {
  auto blocks = net.params();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (const Mat<S>* m : blocks) {
    write_pod<std::int32_t>(out, static_cast<std::int32_t>(m->rows()));
    write_pod<std::int32_t>(out, static_cast<std::int32_t>(m->cols()));
    for (Eigen::Index i = 0; i < m->size(); ++i)
      write_pod<double>(out, static_cast<double>(m->data()[i]));
  }
}

template <typename S>
void read_net(std::istream& in, QNetwork<S>& net) {
  auto blocks = net.params();
  auto n = read_pod<std::uint32_t>(in);
  if (n != blocks.size()) throw ConfigError("checkpoint: parameter block count mismatch");
  for (Mat<S>* m : blocks) {
    auto rows = read_pod<std::int32_t>(in);
    auto cols = read_pod<std::int32_t>(in);
    if (rows != m->rows() || cols != m->cols())
      throw ConfigError("checkpoint: parameter shape mismatch");
    for (Eigen::Index i = 0; i < m->size(); ++i)
      m->data()[i] = static_cast<S>(read_pod<double>(in));
  }
}

}  // namespace ckpt

// Observation geometry travels with the weights so eval can verify shape
// compatibility against the requested scenario.
struct CheckpointMeta {
  QNetConfig net;
  int bins = 40;
  double radius = 100.0;
};

template <typename S>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const QNetwork<S>& eval_net, const QNetwork<S>& target_net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(ckpt::kMagic, sizeof(ckpt::kMagic));
  ckpt::write_pod<std::uint8_t>(out, meta.net.arch == NetArch::lstm ? 0 : 1);
  ckpt::write_pod<std::int32_t>(out, meta.net.input_size);
  ckpt::write_pod<std::int32_t>(out, meta.net.hidden);
  ckpt::write_pod<std::int32_t>(out, meta.net.n_actions);
  ckpt::write_pod<std::int32_t>(out, meta.net.history_len);
  ckpt::write_pod<std::int32_t>(out, meta.bins);
  ckpt::write_pod<double>(out, meta.radius);
  ckpt::write_net(out, eval_net);
  ckpt::write_net(out, target_net);
}

template <typename S>
CheckpointMeta load_checkpoint(const std::string& path, QNetwork<S>& eval_net,
                               QNetwork<S>& target_net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(ckpt::kMagic, 8))
    throw ConfigError("checkpoint: bad magic in " + path);
  CheckpointMeta meta;
  meta.net.arch = ckpt::read_pod<std::uint8_t>(in) == 0 ? NetArch::lstm : NetArch::fnn;
  meta.net.input_size = ckpt::read_pod<std::int32_t>(in);
  meta.net.hidden = ckpt::read_pod<std::int32_t>(in);
  meta.net.n_actions = ckpt::read_pod<std::int32_t>(in);
  meta.net.history_len = ckpt::read_pod<std::int32_t>(in);
  meta.bins = ckpt::read_pod<std::int32_t>(in);
  meta.radius = ckpt::read_pod<double>(in);
  Rng init_rng(0);
  eval_net.init(meta.net, init_rng);
  target_net.init(meta.net, init_rng);
  ckpt::read_net(in, eval_net);
  ckpt::read_net(in, target_net);
  return meta;
}

}  // namespace diral
