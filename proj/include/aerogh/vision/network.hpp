#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "aerogh/vision/image.hpp"

namespace aerogh::vision {

/// Shape of the classifier: a stack of [3x3 conv, ReLU, 2x2 max-pool] blocks
/// followed by one hidden dense layer and a 3-way output.
struct Architecture {
  int width = 64;
  int height = 64;
  int channels_in = 3;
  std::vector<int> conv_channels{8, 16, 32};
  int hidden = 64;
  int classes = kNumLeafClasses;

  bool operator==(const Architecture&) const = default;
};

inline void validate(const Architecture& a) {
  const int shrink = 1 << a.conv_channels.size();
  if (a.width <= 0 || a.height <= 0 || a.width % shrink || a.height % shrink)
    throw ValidationError("input size must be a positive multiple of 2^blocks");
  if (a.channels_in != 3) throw ValidationError("input must be RGB");
  for (int c : a.conv_channels)
    if (c <= 0) throw ValidationError("conv channel counts must be > 0");
  if (a.hidden <= 0) throw ValidationError("hidden width must be > 0");
  if (a.classes != kNumLeafClasses) throw ValidationError("output dimension must be 3");
}

struct Prediction {
  LeafClass label;
  std::array<double, kNumLeafClasses> probabilities;
};

template <typename Scalar>
std::vector<Scalar> softmax(std::span<const Scalar> logits) {
  const Scalar m = *std::max_element(logits.begin(), logits.end());
  std::vector<Scalar> p(logits.size());
  Scalar sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
  for (auto& v : p) v /= sum;
  return p;
}

/// Lowest index wins ties.
template <typename Scalar>
int argmax(std::span<const Scalar> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct BatchStats {
  double loss = 0.0;
  std::size_t correct = 0;
};

/// Small convolutional classifier with a hand-written backward pass.
///
/// All weights live in one flat parameter vector: conv blocks first (the
/// backbone), then the dense head. Layout per layer is weights (out x in,
/// row-major) followed by biases. Forward/backward reuse internal scratch
/// buffers, so one instance must not be used from two threads at once.
template <typename Scalar>
class ConvNet {
 public:
  using Batch = std::span<const LabeledImage>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatMap = Eigen::Map<Matrix>;
  using CMatMap = Eigen::Map<const Matrix>;
  using VecMap = Eigen::Map<Vector>;
  using CVecMap = Eigen::Map<const Vector>;

  bool frozen_backbone = false;

  explicit ConvNet(Architecture arch = {}) : arch_(std::move(arch)) {
    validate(arch_);
    layout();
    params_.assign(n_params_, Scalar(0));
  }

  /// He-normal initialisation from a seeded stream; biases start at zero.
  ConvNet(Architecture arch, std::uint64_t seed) : ConvNet(std::move(arch)) {
    std::mt19937_64 rng(seed);
    for (const auto& c : convs_) fill_normal(rng, c.w_off, c.out_c * c.in_c * 9, std::sqrt(2.0 / (c.in_c * 9)));
    fill_normal(rng, hidden_.w_off, hidden_.out * hidden_.in, std::sqrt(2.0 / hidden_.in));
    fill_normal(rng, output_.w_off, output_.out * output_.in, std::sqrt(1.0 / output_.in));
  }

  const Architecture& architecture() const { return arch_; }
  std::span<Scalar> parameters() { return params_; }
  std::span<const Scalar> parameters() const { return params_; }
  std::size_t parameter_count() const { return n_params_; }
  /// Parameters [0, backbone_size()) belong to the convolutional blocks.
  std::size_t backbone_size() const { return backbone_size_; }

  /// (offset, size) of every weight matrix and bias vector, in layout order.
  std::vector<std::pair<std::size_t, std::size_t>> parameter_blocks() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : convs_) {
      out.emplace_back(c.w_off, c.b_off - c.w_off);
      out.emplace_back(c.b_off, static_cast<std::size_t>(c.out_c));
    }
    for (const Dense* d : {&hidden_, &output_}) {
      out.emplace_back(d->w_off, d->b_off - d->w_off);
      out.emplace_back(d->b_off, static_cast<std::size_t>(d->out));
    }
    return out;
  }

  template <typename Other>
  ConvNet<Other> cast() const {
    ConvNet<Other> out(arch_);
    out.frozen_backbone = frozen_backbone;
    auto dst = out.parameters();
    for (std::size_t i = 0; i < n_params_; ++i) dst[i] = static_cast<Other>(params_[i]);
    return out;
  }

  std::vector<Scalar> logits(const LabeledImage& im) {
    forward(im);
    return std::vector<Scalar>(ws_.out.data(), ws_.out.data() + ws_.out.size());
  }

  std::vector<std::vector<Scalar>> forward_batch(Batch batch) {
    std::vector<std::vector<Scalar>> out;
    out.reserve(batch.size());
    for (const auto& im : batch) out.push_back(logits(im));
    return out;
  }

  Prediction predict(const LabeledImage& im) {
    const auto z = logits(im);
    const auto p = softmax<Scalar>(z);
    Prediction pr{static_cast<LeafClass>(argmax<Scalar>(p)), {}};
    for (int c = 0; c < kNumLeafClasses; ++c) pr.probabilities[c] = static_cast<double>(p[c]);
    return pr;
  }

  /// Mean softmax cross-entropy over the batch.
  double loss(Batch batch) {
    signature_ = kFnvBasis;
    double total = 0.0;
    for (const auto& im : batch) {
      forward(im);
      total += sample_loss(im);
    }
    return total / static_cast<double>(batch.size());
  }

  /// Hash of every ReLU on/off state and max-pool winner seen by the last
  /// loss() or loss_and_gradient() call. Two evaluations with equal
  /// signatures ran through the same piecewise-linear region.
  std::uint64_t activation_signature() const { return signature_; }

  /// Mean loss; writes d(loss)/d(params) into `grad` (overwritten).
  double loss_and_gradient(Batch batch, std::span<Scalar> grad) {
    return loss_and_gradient(batch, grad, false).loss;
  }

  /// As above. With `head_only` the backbone gradient is left at zero and
  /// its backward pass skipped.
  BatchStats loss_and_gradient(Batch batch, std::span<Scalar> grad, bool head_only) {
    if (grad.size() != n_params_) throw std::invalid_argument("gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), Scalar(0));
    signature_ = kFnvBasis;
    BatchStats stats;
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(batch.size());
    for (const auto& im : batch) {
      forward(im);
      stats.loss += sample_loss(im);
      const int truth = static_cast<int>(im.label);
      if (argmax<Scalar>(std::span<const Scalar>(ws_.out.data(), ws_.out.size())) == truth)
        stats.correct += 1;
      backward(truth, inv_n, grad, head_only);
    }
    stats.loss /= static_cast<double>(batch.size());
    return stats;
  }

 private:
  struct Conv {
    int in_c, out_c, h, w;  // input spatial size
    std::size_t w_off, b_off;
  };
  struct Dense {
    int in, out;
    std::size_t w_off, b_off;
  };

  struct Workspace {
    std::vector<Matrix> input;  // per block: in_c x (h*w)
    std::vector<Matrix> cols;   // per block: (in_c*9) x (h*w)
    std::vector<Matrix> act;    // per block after ReLU: out_c x (h*w)
    std::vector<Matrix> pooled;  // per block: out_c x (h/2*w/2)
    std::vector<std::vector<int>> pool_idx;
    Vector hidden_pre, hidden, out;
  };

  void layout() {
    std::size_t off = 0;
    int c = arch_.channels_in, h = arch_.height, w = arch_.width;
    for (int oc : arch_.conv_channels) {
      Conv l{c, oc, h, w, off, 0};
      off += static_cast<std::size_t>(oc) * c * 9;
      l.b_off = off;
      off += oc;
      convs_.push_back(l);
      c = oc;
      h /= 2;
      w /= 2;
    }
    backbone_size_ = off;
    flat_ = c * h * w;
    hidden_ = {flat_, arch_.hidden, off, 0};
    off += static_cast<std::size_t>(arch_.hidden) * flat_;
    hidden_.b_off = off;
    off += arch_.hidden;
    output_ = {arch_.hidden, arch_.classes, off, 0};
    off += static_cast<std::size_t>(arch_.classes) * arch_.hidden;
    output_.b_off = off;
    off += arch_.classes;
    n_params_ = off;

    const auto n = convs_.size();
    ws_.input.resize(n);
    ws_.cols.resize(n);
    ws_.act.resize(n);
    ws_.pooled.resize(n);
    ws_.pool_idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& l = convs_[i];
      ws_.input[i].resize(l.in_c, l.h * l.w);
      ws_.cols[i].resize(l.in_c * 9, l.h * l.w);
      ws_.act[i].resize(l.out_c, l.h * l.w);
      ws_.pooled[i].resize(l.out_c, (l.h / 2) * (l.w / 2));
      ws_.pool_idx[i].resize(static_cast<std::size_t>(l.out_c) * (l.h / 2) * (l.w / 2));
    }
  }

  static constexpr std::uint64_t kFnvBasis = 1469598103934665603ULL;

  void mix_signature(std::uint64_t v) { signature_ = (signature_ ^ v) * 1099511628211ULL; }

  void fill_normal(std::mt19937_64& rng, std::size_t off, std::size_t n, double sd) {
    std::normal_distribution<double> dist(0.0, sd);
    for (std::size_t i = 0; i < n; ++i) params_[off + i] = static_cast<Scalar>(dist(rng));
  }

  CMatMap weights(const Conv& l) const { return {params_.data() + l.w_off, l.out_c, l.in_c * 9}; }
  CMatMap weights(const Dense& l) const { return {params_.data() + l.w_off, l.out, l.in}; }
  CVecMap bias(std::size_t off, int n) const { return {params_.data() + off, n}; }

  static void im2col(const Matrix& in, int h, int w, Matrix& cols) {
    const int ch = static_cast<int>(in.rows());
    for (int c = 0; c < ch; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          Scalar* row = cols.row(c * 9 + ky * 3 + kx).data();
          const Scalar* src = in.row(c).data();
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            for (int x = 0; x < w; ++x) {
              const int sx = x + kx - 1;
              row[y * w + x] = (sy < 0 || sy >= h || sx < 0 || sx >= w) ? Scalar(0) : src[sy * w + sx];
            }
          }
        }
  }

  static void col2im(const Matrix& cols, int h, int w, Matrix& out) {
    out.setZero();
    const int ch = static_cast<int>(out.rows());
    for (int c = 0; c < ch; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const Scalar* row = cols.row(c * 9 + ky * 3 + kx).data();
          Scalar* dst = out.row(c).data();
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            for (int x = 0; x < w; ++x) {
              const int sx = x + kx - 1;
              if (sx >= 0 && sx < w) dst[sy * w + sx] += row[y * w + x];
            }
          }
        }
  }

  void load_input(const LabeledImage& im) {
    if (im.width != arch_.width || im.height != arch_.height || !im.valid())
      throw ValidationError("image is " + std::to_string(im.width) + "x" + std::to_string(im.height) +
                            ", model expects " + std::to_string(arch_.width) + "x" +
                            std::to_string(arch_.height));
    Matrix& x = ws_.input[0];
    const int n = im.width * im.height;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) x(c, i) = static_cast<Scalar>(im.pixels[3 * i + c]) / Scalar(255) - Scalar(0.5);
  }

  void forward(const LabeledImage& im) {
    load_input(im);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      const auto& l = convs_[i];
      im2col(ws_.input[i], l.h, l.w, ws_.cols[i]);
      ws_.act[i].noalias() = weights(l) * ws_.cols[i];
      ws_.act[i].colwise() += bias(l.b_off, l.out_c);
      ws_.act[i] = ws_.act[i].cwiseMax(Scalar(0));
      // 2x2 max-pool, first maximum wins
      const int ph = l.h / 2, pw = l.w / 2;
      Matrix& pooled = ws_.pooled[i];
      auto& idx = ws_.pool_idx[i];
      for (int c = 0; c < l.out_c; ++c) {
        const Scalar* a = ws_.act[i].row(c).data();
        for (int y = 0; y < ph; ++y)
          for (int x = 0; x < pw; ++x) {
            int best = (2 * y) * l.w + 2 * x;
            for (int k : {best + 1, best + l.w, best + l.w + 1})
              if (a[k] > a[best]) best = k;
            pooled(c, y * pw + x) = a[best];
            mix_signature(static_cast<std::uint64_t>(best) << 1 | (a[best] > Scalar(0)));
            idx[static_cast<std::size_t>(c) * ph * pw + y * pw + x] = best;
          }
      }
      if (i + 1 < convs_.size()) ws_.input[i + 1] = pooled;
    }
    const Matrix& last = ws_.pooled.back();
    CVecMap flat(last.data(), flat_);
    ws_.hidden_pre.noalias() = weights(hidden_) * flat;
    ws_.hidden_pre += bias(hidden_.b_off, hidden_.out);
    ws_.hidden = ws_.hidden_pre.cwiseMax(Scalar(0));
    for (int i = 0; i < hidden_.out; ++i) mix_signature(ws_.hidden_pre[i] > Scalar(0));
    ws_.out.noalias() = weights(output_) * ws_.hidden;
    ws_.out += bias(output_.b_off, output_.out);
  }

  double sample_loss(const LabeledImage& im) const {
    const auto p = softmax<Scalar>(std::span<const Scalar>(ws_.out.data(), ws_.out.size()));
    return -std::log(std::max(static_cast<double>(p[static_cast<int>(im.label)]),
                              std::numeric_limits<double>::min()));
  }

  void backward(int truth, Scalar scale, std::span<Scalar> grad, bool head_only) {
    auto p = softmax<Scalar>(std::span<const Scalar>(ws_.out.data(), ws_.out.size()));
    Vector dout(arch_.classes);
    for (int c = 0; c < arch_.classes; ++c) dout[c] = (p[c] - (c == truth ? Scalar(1) : Scalar(0))) * scale;

    MatMap(grad.data() + output_.w_off, output_.out, output_.in).noalias() += dout * ws_.hidden.transpose();
    VecMap(grad.data() + output_.b_off, output_.out) += dout;
    Vector dh = weights(output_).transpose() * dout;
    for (int i = 0; i < hidden_.out; ++i)
      if (ws_.hidden_pre[i] <= Scalar(0)) dh[i] = Scalar(0);

    const Matrix& last = ws_.pooled.back();
    CVecMap flat(last.data(), flat_);
    MatMap(grad.data() + hidden_.w_off, hidden_.out, hidden_.in).noalias() += dh * flat.transpose();
    VecMap(grad.data() + hidden_.b_off, hidden_.out) += dh;
    if (head_only) return;

    Vector dflat = weights(hidden_).transpose() * dh;
    Matrix dpooled = Eigen::Map<Matrix>(dflat.data(), last.rows(), last.cols());
    for (std::size_t ii = convs_.size(); ii-- > 0;) {
      const auto& l = convs_[ii];
      const int ph = l.h / 2, pw = l.w / 2;
      Matrix dact = Matrix::Zero(l.out_c, l.h * l.w);
      const auto& idx = ws_.pool_idx[ii];
      for (int c = 0; c < l.out_c; ++c)
        for (int k = 0; k < ph * pw; ++k) {
          const int src = idx[static_cast<std::size_t>(c) * ph * pw + k];
          if (ws_.act[ii](c, src) > Scalar(0)) dact(c, src) += dpooled(c, k);
        }
      MatMap(grad.data() + l.w_off, l.out_c, l.in_c * 9).noalias() += dact * ws_.cols[ii].transpose();
      VecMap(grad.data() + l.b_off, l.out_c) += dact.rowwise().sum();
      if (ii == 0) break;
      Matrix dcols = weights(l).transpose() * dact;
      dpooled.resize(l.in_c, l.h * l.w);
      col2im(dcols, l.h, l.w, dpooled);
    }
  }

  Architecture arch_;
  std::vector<Conv> convs_;
  Dense hidden_{}, output_{};
  int flat_ = 0;
  std::size_t backbone_size_ = 0;
  std::size_t n_params_ = 0;
  std::vector<Scalar> params_;
  Workspace ws_;
  std::uint64_t signature_ = kFnvBasis;
};

}  // namespace aerogh::vision
