#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/nn/tensor.hpp"

namespace towerlab::nn {

enum class LayerKind { conv2d, dense, relu, flatten, concat };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::concat: return "concat";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  // dense; for concat, in_features is the width appended to the input
  std::size_t in_features = 0;
  std::size_t out_features = 0;

  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride) {
    return {LayerKind::conv2d, in_ch, out_ch, kernel, stride, 0, 0};
  }
  static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, 0, 0, 0, 1, in, out}; }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec concat(std::size_t extra) { return {LayerKind::concat, 0, 0, 0, 1, extra, 0}; }
};

// Valid (unpadded) convolution output extent.
inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0 || in < kernel) return 0;
  return (in - kernel) / stride + 1;
}

// Per-sample output shape of a layer (no batch dimension). Throws
// ConfigError when the input shape is incompatible.
inline Shape output_shape(const LayerSpec& spec, const Shape& in, const std::string& name = "") {
  const std::string who = name.empty() ? to_string(spec.kind) : name;
  auto fail = [&](const std::string& expected) -> Shape {
    throw ConfigError("layer '" + who + "': input shape " + shape_str(in) + " incompatible with expected " + expected);
  };
  switch (spec.kind) {
    case LayerKind::conv2d: {
      if (in.size() != 3 || in[0] != spec.in_channels)
        return fail("[" + std::to_string(spec.in_channels) + "xHxW]");
      const auto oh = conv_out_extent(in[1], spec.kernel, spec.stride);
      const auto ow = conv_out_extent(in[2], spec.kernel, spec.stride);
      if (oh < 1 || ow < 1)
        throw ConfigError("layer '" + who + "': kernel " + std::to_string(spec.kernel) + " stride " +
                          std::to_string(spec.stride) + " on input " + shape_str(in) + " yields empty output");
      return {spec.out_channels, oh, ow};
    }
    case LayerKind::dense:
      if (in.size() != 1 || in[0] != spec.in_features) return fail("[" + std::to_string(spec.in_features) + "]");
      return {spec.out_features};
    case LayerKind::relu: return in;
    case LayerKind::flatten: return {shape_numel(in)};
    case LayerKind::concat:
      if (in.size() != 1) return fail("rank-1 features");
      return {in[0] + spec.in_features};
  }
  return in;
}

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline Shape batch_shape(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

inline Shape sample_shape(const Shape& batched) { return Shape(batched.begin() + 1, batched.end()); }

// Single-input layer operating on batched tensors [N, ...]. forward() keeps
// whatever backward() needs; backward() accumulates into parameter grads and
// returns the input gradient.
template <class T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& input) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;

  const std::string& name() const noexcept { return name_; }

  // When off, backward() still accumulates parameter gradients but returns
  // an empty tensor instead of the input gradient. Used for layers that read
  // raw data, whose input gradient nobody consumes.
  void set_input_grad(bool on) noexcept { input_grad_ = on; }
  bool input_grad() const noexcept { return input_grad_; }

 protected:
  void check_input(const Tensor<T>& input) const {
    if (input.rank() < 2) throw ConfigError("layer '" + name_ + "': expected batched input, got " + shape_str(input.shape()));
    (void)output_shape(spec(), sample_shape(input.shape()), name_);
  }
  void check_grad(const Tensor<T>& grad_out, const Shape& expected) const {
    if (!has_forward_) throw UsageError("layer '" + name_ + "': backward called before forward");
    if (grad_out.shape() != expected)
      throw UsageError("layer '" + name_ + "': output gradient shape " + shape_str(grad_out.shape()) +
                       " does not match forward output " + shape_str(expected));
  }

  std::string name_;
  bool has_forward_ = false;
  bool input_grad_ = true;
};

template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride)
      : Layer<T>(std::move(name)),
        spec_(LayerSpec::conv2d(in_ch, out_ch, kernel, stride)),
        weight_{this->name_ + ".weight", Tensor<T>({out_ch, in_ch, kernel, kernel})},
        bias_{this->name_ + ".bias", Tensor<T>({out_ch})} {}

  LayerSpec spec() const override { return spec_; }
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  Tensor<T> forward(const Tensor<T>& input) override {
    this->check_input(input);
    input_ = input;
    const Geometry g = geometry(input.shape());
    Tensor<T> out({g.n, spec_.out_channels, g.oh, g.ow});
    ConstMatMap<T> w(weight_.value.data().data(), spec_.out_channels, g.k);
    for (std::size_t n0 = 0; n0 < g.n; n0 += kChunk) {
      const std::size_t nc = std::min(kChunk, g.n - n0);
      im2col(input, g, n0, nc, cols_);
      y_.noalias() = w * cols_;
      for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t oc = 0; oc < spec_.out_channels; ++oc) {
          T* dst = out.data().data() + ((n0 + i) * spec_.out_channels + oc) * g.p;
          const T b = bias_.value[oc];
          const T* src = y_.data() + oc * y_.cols() + i * g.p;
          for (std::size_t p = 0; p < g.p; ++p) dst[p] = src[p] + b;
        }
    }
    out_shape_ = out.shape();
    this->has_forward_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    this->check_grad(grad_out, out_shape_);
    const Geometry g = geometry(input_.shape());
    Tensor<T> grad_in;
    if (this->input_grad_) grad_in = Tensor<T>(input_.shape());
    auto wg = weight_.value.grad();
    auto bg = bias_.value.grad();
    MatMap<T> dw(wg.data(), spec_.out_channels, g.k);
    ConstMatMap<T> w(weight_.value.data().data(), spec_.out_channels, g.k);
    for (std::size_t n0 = 0; n0 < g.n; n0 += kChunk) {
      const std::size_t nc = std::min(kChunk, g.n - n0);
      im2col(input_, g, n0, nc, cols_);
      y_.resize(spec_.out_channels, nc * g.p);
      for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t oc = 0; oc < spec_.out_channels; ++oc) {
          const T* src = grad_out.data().data() + ((n0 + i) * spec_.out_channels + oc) * g.p;
          T* dst = y_.data() + oc * y_.cols() + i * g.p;
          std::copy(src, src + g.p, dst);
        }
      dw.noalias() += y_ * cols_.transpose();
      for (std::size_t oc = 0; oc < spec_.out_channels; ++oc) bg[oc] += y_.row(oc).sum();
      if (this->input_grad_) {
        cols_.noalias() = w.transpose() * y_;
        col2im(cols_, g, n0, nc, grad_in);
      }
    }
    return grad_in;
  }

 private:
  static constexpr std::size_t kChunk = 32;

  struct Geometry {
    std::size_t n, c, h, w, oh, ow, p, k;
  };

  Geometry geometry(const Shape& s) const {
    Geometry g{};
    g.n = s[0];
    g.c = s[1];
    g.h = s[2];
    g.w = s[3];
    g.oh = conv_out_extent(g.h, spec_.kernel, spec_.stride);
    g.ow = conv_out_extent(g.w, spec_.kernel, spec_.stride);
    g.p = g.oh * g.ow;
    g.k = g.c * spec_.kernel * spec_.kernel;
    return g;
  }

  // Rows index (channel, ky, kx); columns index (sample, oy, ox).
  void im2col(const Tensor<T>& x, const Geometry& g, std::size_t n0, std::size_t nc, RowMat<T>& cols) const {
    const std::size_t kk = spec_.kernel, s = spec_.stride;
    cols.resize(g.k, nc * g.p);
    const T* src = x.data().data();
    for (std::size_t c = 0; c < g.c; ++c)
      for (std::size_t ky = 0; ky < kk; ++ky)
        for (std::size_t kx = 0; kx < kk; ++kx) {
          T* row = cols.data() + ((c * kk + ky) * kk + kx) * cols.cols();
          for (std::size_t i = 0; i < nc; ++i) {
            const T* plane = src + ((n0 + i) * g.c + c) * g.h * g.w;
            T* dst = row + i * g.p;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const T* line = plane + (oy * s + ky) * g.w + kx;
              for (std::size_t ox = 0; ox < g.ow; ++ox) dst[oy * g.ow + ox] = line[ox * s];
            }
          }
        }
  }

  void col2im(const RowMat<T>& dcols, const Geometry& g, std::size_t n0, std::size_t nc, Tensor<T>& dx) const {
    const std::size_t kk = spec_.kernel, s = spec_.stride;
    T* dst_all = dx.data().data();
    for (std::size_t c = 0; c < g.c; ++c)
      for (std::size_t ky = 0; ky < kk; ++ky)
        for (std::size_t kx = 0; kx < kk; ++kx) {
          const T* row = dcols.data() + ((c * kk + ky) * kk + kx) * dcols.cols();
          for (std::size_t i = 0; i < nc; ++i) {
            T* plane = dst_all + ((n0 + i) * g.c + c) * g.h * g.w;
            const T* src = row + i * g.p;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              T* line = plane + (oy * s + ky) * g.w + kx;
              for (std::size_t ox = 0; ox < g.ow; ++ox) line[ox * s] += src[oy * g.ow + ox];
            }
          }
        }
  }

  LayerSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
  Shape out_shape_;
  RowMat<T> cols_, y_;  // scratch, reused across calls
};

template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in, std::size_t out)
      : Layer<T>(std::move(name)),
        spec_(LayerSpec::dense(in, out)),
        weight_{this->name_ + ".weight", Tensor<T>({out, in})},
        bias_{this->name_ + ".bias", Tensor<T>({out})} {}

  LayerSpec spec() const override { return spec_; }
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

  Tensor<T> forward(const Tensor<T>& input) override {
    this->check_input(input);
    input_ = input;
    const std::size_t n = input.dim(0);
    Tensor<T> out({n, spec_.out_features});
    ConstMatMap<T> x(input.data().data(), n, spec_.in_features);
    ConstMatMap<T> w(weight_.value.data().data(), spec_.out_features, spec_.in_features);
    MatMap<T> y(out.data().data(), n, spec_.out_features);
    y.noalias() = x * w.transpose();
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data().data(), spec_.out_features);
    y.rowwise() += b;
    this->has_forward_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const std::size_t n = input_.rank() ? input_.dim(0) : 0;
    this->check_grad(grad_out, Shape{n, spec_.out_features});
    Tensor<T> grad_in({n, spec_.in_features});
    ConstMatMap<T> dy(grad_out.data().data(), n, spec_.out_features);
    ConstMatMap<T> x(input_.data().data(), n, spec_.in_features);
    ConstMatMap<T> w(weight_.value.data().data(), spec_.out_features, spec_.in_features);
    MatMap<T> dw(weight_.value.grad().data(), spec_.out_features, spec_.in_features);
    dw.noalias() += dy.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.value.grad().data(), spec_.out_features);
    db += dy.colwise().sum();
    MatMap<T> dx(grad_in.data().data(), n, spec_.in_features);
    dx.noalias() = dy * w;
    return grad_in;
  }

 private:
  LayerSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

template <class T>
class ReLU final : public Layer<T> {
 public:
  explicit ReLU(std::string name) : Layer<T>(std::move(name)) {}

  LayerSpec spec() const override { return LayerSpec::relu(); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }

  Tensor<T> forward(const Tensor<T>& input) override {
    this->check_input(input);
    Tensor<T> out = input;
    mask_.resize(input.size());
    auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      mask_[i] = d[i] > T{0};
      if (!mask_[i]) d[i] = T{0};
    }
    shape_ = input.shape();
    this->has_forward_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    this->check_grad(grad_out, shape_);
    Tensor<T> grad_in = grad_out;
    auto d = grad_in.data();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!mask_[i]) d[i] = T{0};
    return grad_in;
  }

  // Active-unit pattern of the last forward pass.
  const std::vector<unsigned char>& mask() const noexcept { return mask_; }

 private:
  std::vector<unsigned char> mask_;
  Shape shape_;
};

template <class T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(std::string name) : Layer<T>(std::move(name)) {}

  LayerSpec spec() const override { return LayerSpec::flatten(); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

  Tensor<T> forward(const Tensor<T>& input) override {
    this->check_input(input);
    shape_ = input.shape();
    Tensor<T> out = input;
    out.reshape({shape_[0], input.size() / shape_[0]});
    this->has_forward_ = true;
    return out;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    this->check_grad(grad_out, Shape{shape_[0], shape_numel(shape_) / shape_[0]});
    Tensor<T> grad_in = grad_out;
    grad_in.reshape(shape_);
    return grad_in;
  }

 private:
  Shape shape_;
};

// Appends a [N, extra] side input to a [N, F] feature tensor.
template <class T>
class Concat {
 public:
  explicit Concat(std::string name, std::size_t extra) : name_(std::move(name)), extra_(extra) {}

  LayerSpec spec() const { return LayerSpec::concat(extra_); }

  Tensor<T> forward(const Tensor<T>& features, const Tensor<T>& side) {
    if (features.rank() != 2 || side.rank() != 2 || side.dim(1) != extra_ || side.dim(0) != features.dim(0))
      throw ConfigError("layer '" + name_ + "': cannot concatenate " + shape_str(features.shape()) + " with " +
                        shape_str(side.shape()) + " (expected side width " + std::to_string(extra_) + ")");
    n_ = features.dim(0);
    f_ = features.dim(1);
    Tensor<T> out({n_, f_ + extra_});
    for (std::size_t i = 0; i < n_; ++i) {
      std::copy_n(features.data().data() + i * f_, f_, out.data().data() + i * (f_ + extra_));
      std::copy_n(side.data().data() + i * extra_, extra_, out.data().data() + i * (f_ + extra_) + f_);
    }
    has_forward_ = true;
    return out;
  }

  // Returns only the gradient for the feature input; the side input is data.
  Tensor<T> backward(const Tensor<T>& grad_out) {
    if (!has_forward_) throw UsageError("layer '" + name_ + "': backward called before forward");
    if (grad_out.shape() != Shape{n_, f_ + extra_})
      throw UsageError("layer '" + name_ + "': output gradient shape " + shape_str(grad_out.shape()) + " mismatch");
    Tensor<T> grad_in({n_, f_});
    for (std::size_t i = 0; i < n_; ++i)
      std::copy_n(grad_out.data().data() + i * (f_ + extra_), f_, grad_in.data().data() + i * f_);
    return grad_in;
  }

 private:
  std::string name_;
  std::size_t extra_;
  std::size_t n_ = 0, f_ = 0;
  bool has_forward_ = false;
};

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const std::string& name) {
  switch (spec.kind) {
    case LayerKind::conv2d:
      return std::make_unique<Conv2d<T>>(name, spec.in_channels, spec.out_channels, spec.kernel, spec.stride);
    case LayerKind::dense: return std::make_unique<Dense<T>>(name, spec.in_features, spec.out_features);
    case LayerKind::relu: return std::make_unique<ReLU<T>>(name);
    case LayerKind::flatten: return std::make_unique<Flatten<T>>(name);
    case LayerKind::concat: break;
  }
  throw ConfigError("layer '" + name + "': concat takes two inputs and is not a sequential layer");
}

// Chain of single-input layers.
template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& o) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& o) {
    if (this != &o) {
      layers_.clear();
      for (const auto& l : o.layers_) layers_.push_back(l->clone());
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Layer<T>& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *layers_.back();
  }
  Layer<T>& add(const LayerSpec& spec, const std::string& name) { return add(make_layer<T>(spec, name)); }

  Tensor<T> forward(const Tensor<T>& input) {
    Tensor<T> x = input;
    for (auto& l : layers_) x = l->forward(x);
    return x;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    Tensor<T> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->parameters()) out.push_back(p);
    return out;
  }

  // Per-sample output shape for a per-sample input shape.
  Shape output_shape_for(Shape in) const {
    for (const auto& l : layers_) in = output_shape(l->spec(), in, l->name());
    return in;
  }

  // Concatenated ReLU masks of the last forward pass.
  std::vector<unsigned char> activation_pattern() const {
    std::vector<unsigned char> out;
    for (const auto& l : layers_)
      if (auto* r = dynamic_cast<const ReLU<T>*>(l.get())) out.insert(out.end(), r->mask().begin(), r->mask().end());
    return out;
  }

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace towerlab::nn
