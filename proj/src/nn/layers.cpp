#include "vise/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace vise::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw NnError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

struct ConvGeometry {
  std::size_t n, c_in, h, w, c_out, k;
  std::size_t hw() const { return h * w; }
  std::size_t patch() const { return c_in * k * k; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& weight) {
  if (input.rank() != 4 || weight.rank() != 4) shape_error("conv2d", input.shape(), weight.shape());
  const std::size_t k = weight.dim(2);
  if (weight.dim(1) != input.dim(1) || weight.dim(3) != k || k % 2 == 0) {
    shape_error("conv2d", input.shape(), weight.shape());
  }
  if (input.dim(2) == 0 || input.dim(3) == 0) throw NnError("conv2d: spatial dims must be >= 1");
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), k};
}

// Column buffer [C_in * k * k, H * W] for one sample.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const long pad = static_cast<long>(g.k / 2);
  const long h = static_cast<long>(g.h);
  const long w = static_cast<long>(g.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const T* plane = image + c * g.hw();
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        T* out = col + row * g.hw();
        const long dy = static_cast<long>(ky) - pad;
        const long dx = static_cast<long>(kx) - pad;
        for (long y = 0; y < h; ++y) {
          const long sy = y + dy;
          T* out_row = out + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(out_row, out_row + w, T{0});
            continue;
          }
          const T* src = plane + sy * w;
          for (long x = 0; x < w; ++x) {
            const long sx = x + dx;
            out_row[x] = (sx < 0 || sx >= w) ? T{0} : src[sx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* image) {
  const long pad = static_cast<long>(g.k / 2);
  const long h = static_cast<long>(g.h);
  const long w = static_cast<long>(g.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    T* plane = image + c * g.hw();
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        const T* in = col + row * g.hw();
        const long dy = static_cast<long>(ky) - pad;
        const long dx = static_cast<long>(kx) - pad;
        for (long y = 0; y < h; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          T* dst = plane + sy * w;
          const T* in_row = in + y * w;
          for (long x = 0; x < w; ++x) {
            const long sx = x + dx;
            if (sx >= 0 && sx < w) dst[sx] += in_row[x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  const ConvGeometry g = conv_geometry(input, weight);
  if (bias.numel() != g.c_out) shape_error("conv2d bias", bias.shape(), weight.shape());
  BasicTensor<T> out({g.n, g.c_out, g.h, g.w});
  std::vector<T> col(g.patch() * g.hw());
  ConstMatrixMap<T> wmat(weight.data(), static_cast<long>(g.c_out), static_cast<long>(g.patch()));
  ConstMatrixMap<T> cmat(col.data(), static_cast<long>(g.patch()), static_cast<long>(g.hw()));
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data(), static_cast<long>(g.c_out));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.data() + n * g.c_in * g.hw(), g, col.data());
    MatrixMap<T> omat(out.data() + n * g.c_out * g.hw(), static_cast<long>(g.c_out), static_cast<long>(g.hw()));
    omat.noalias() = wmat * cmat;
    omat.colwise() += bvec;
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output, bool need_input_grad) {
  const ConvGeometry g = conv_geometry(input, weight);
  const Shape expected{g.n, g.c_out, g.h, g.w};
  if (grad_output.shape() != expected) shape_error("conv2d backward", grad_output.shape(), expected);

  Conv2dGrads<T> grads;
  grads.weight = BasicTensor<T>(weight.shape());
  grads.bias = BasicTensor<T>({g.c_out});
  if (need_input_grad) grads.input = BasicTensor<T>(input.shape());

  std::vector<T> col(g.patch() * g.hw());
  std::vector<T> dcol(need_input_grad ? g.patch() * g.hw() : 0);
  ConstMatrixMap<T> wmat(weight.data(), static_cast<long>(g.c_out), static_cast<long>(g.patch()));
  MatrixMap<T> dwmat(grads.weight.data(), static_cast<long>(g.c_out), static_cast<long>(g.patch()));
  ConstMatrixMap<T> cmat(col.data(), static_cast<long>(g.patch()), static_cast<long>(g.hw()));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.data() + n * g.c_in * g.hw(), g, col.data());
    ConstMatrixMap<T> gmat(grad_output.data() + n * g.c_out * g.hw(), static_cast<long>(g.c_out),
                           static_cast<long>(g.hw()));
    dwmat.noalias() += gmat * cmat.transpose();
    for (std::size_t c = 0; c < g.c_out; ++c) grads.bias[c] += gmat.row(static_cast<long>(c)).sum();
    if (need_input_grad) {
      MatrixMap<T> dcmat(dcol.data(), static_cast<long>(g.patch()), static_cast<long>(g.hw()));
      dcmat.noalias() = wmat.transpose() * gmat;
      col2im_add(dcol.data(), g, grads.input.data() + n * g.c_in * g.hw());
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> batchnorm2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                                   const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                                   BasicTensor<T>& running_var, Mode mode, BatchNormCache<T>* cache,
                                   const BatchNormOptions& options) {
  if (input.rank() != 4) throw NnError("batchnorm2d: expected [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  for (const BasicTensor<T>* t : {&gamma, &beta, static_cast<const BasicTensor<T>*>(&running_mean),
                                  static_cast<const BasicTensor<T>*>(&running_var)}) {
    if (t->numel() != c) shape_error("batchnorm2d", t->shape(), input.shape());
  }
  if (mode == Mode::Train && n < 2) throw NnError("batch too small for batch statistics");

  BasicTensor<T> out(input.shape());
  const double count = static_cast<double>(n * hw);
  if (cache) {
    cache->normalized = BasicTensor<T>(input.shape());
    cache->inv_std.assign(c, T{0});
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean;
    double var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = input.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) sum += p[j];
      }
      mean = sum / count;
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = input.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = p[j] - mean;
          sq += d * d;
        }
      }
      var = sq / count;
      running_mean[ch] = static_cast<T>((1.0 - options.momentum) * running_mean[ch] + options.momentum * mean);
      running_var[ch] = static_cast<T>((1.0 - options.momentum) * running_var[ch] + options.momentum * var);
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + options.eps));
    const T m = static_cast<T>(mean);
    if (cache) cache->inv_std[ch] = inv_std;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const T xhat = (input[base + j] - m) * inv_std;
        if (cache) cache->normalized[base + j] = xhat;
        out[base + j] = gamma[ch] * xhat + beta[ch];
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> batchnorm2d_infer(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                 const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var, double eps) {
  BasicTensor<T> mean = running_mean;
  BasicTensor<T> var = running_var;
  BatchNormOptions options;
  options.eps = eps;
  return batchnorm2d_forward<T>(input, gamma, beta, mean, var, Mode::Infer, nullptr, options);
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const BasicTensor<T>& gamma,
                                       const BasicTensor<T>& grad_output) {
  const auto& xhat = cache.normalized;
  if (grad_output.shape() != xhat.shape()) shape_error("batchnorm2d backward", grad_output.shape(), xhat.shape());
  const std::size_t n = xhat.dim(0), c = xhat.dim(1), hw = xhat.dim(2) * xhat.dim(3);
  const double count = static_cast<double>(n * hw);
  BatchNormGrads<T> grads{BasicTensor<T>(xhat.shape()), BasicTensor<T>({c}), BasicTensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += grad_output[base + j];
        sum_dy_xhat += static_cast<double>(grad_output[base + j]) * xhat[base + j];
      }
    }
    grads.beta[ch] = static_cast<T>(sum_dy);
    grads.gamma[ch] = static_cast<T>(sum_dy_xhat);
    const double scale = static_cast<double>(gamma[ch]) * cache.inv_std[ch];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        grads.input[base + j] =
            static_cast<T>(scale * (grad_output[base + j] - mean_dy - xhat[base + j] * mean_dy_xhat));
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.numel(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_output) {
  if (input.shape() != grad_output.shape()) shape_error("relu backward", input.shape(), grad_output.shape());
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.numel(); ++i) out[i] = input[i] > T{0} ? grad_output[i] : T{0};
  return out;
}

template <typename T>
BasicTensor<T> maxpool2d_forward(const BasicTensor<T>& input, std::vector<std::size_t>* argmax) {
  if (input.rank() != 4) throw NnError("maxpool2d: expected [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw NnError("maxpool2d: spatial dims must be even, got " + shape_string(input.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  BasicTensor<T> out({n, c, oh, ow});
  if (argmax) argmax->assign(out.numel(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        std::size_t best = base + (2 * y) * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * y + dy) * w + 2 * x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        out[o] = input[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& grad_output) {
  if (argmax.size() != grad_output.numel()) throw NnError("maxpool2d backward: argmax/grad size mismatch");
  BasicTensor<T> out(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) out[argmax[i]] += grad_output[i];
  return out;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || input.dim(1) != weight.dim(1)) {
    shape_error("linear", input.shape(), weight.shape());
  }
  if (bias.numel() != weight.dim(0)) shape_error("linear bias", bias.shape(), weight.shape());
  const long n = static_cast<long>(input.dim(0));
  const long fin = static_cast<long>(input.dim(1));
  const long fout = static_cast<long>(weight.dim(0));
  BasicTensor<T> out({input.dim(0), weight.dim(0)});
  ConstMatrixMap<T> wm(weight.data(), fout, fin);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), fout);
  // Row by row, so a sample's output does not depend on its batch.
  for (long i = 0; i < n; ++i) {
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(input.data() + i * fin, fin);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y(out.data() + i * fout, fout);
    y.noalias() = wm * x;
    y += b;
  }
  return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_output) {
  const Shape expected{input.dim(0), weight.dim(0)};
  if (grad_output.shape() != expected) shape_error("linear backward", grad_output.shape(), expected);
  const long n = static_cast<long>(input.dim(0));
  const long fin = static_cast<long>(input.dim(1));
  const long fout = static_cast<long>(weight.dim(0));
  LinearGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weight.shape()), BasicTensor<T>({weight.dim(0)})};
  ConstMatrixMap<T> x(input.data(), n, fin);
  ConstMatrixMap<T> wm(weight.data(), fout, fin);
  ConstMatrixMap<T> dy(grad_output.data(), n, fout);
  MatrixMap<T>(g.input.data(), n, fin).noalias() = dy * wm;
  MatrixMap<T>(g.weight.data(), fout, fin).noalias() = dy.transpose() * x;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.bias.data(), fout) = dy.colwise().sum();
  return g;
}

template <typename T>
BasicTensor<T> dropout_forward(const BasicTensor<T>& input, double p, Mode mode, Rng& rng, std::vector<T>* mask) {
  if (!(p >= 0.0 && p < 1.0)) throw NnError("dropout probability must be in [0, 1)");
  if (mode == Mode::Infer || p == 0.0) {
    if (mask) mask->assign(input.numel(), T{1});
    return input;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  BasicTensor<T> out(input.shape());
  if (mask) mask->resize(input.numel());
  for (std::size_t i = 0; i < input.numel(); ++i) {
    const T factor = rng.uniform() < p ? T{0} : keep_scale;
    if (mask) (*mask)[i] = factor;
    out[i] = input[i] * factor;
  }
  return out;
}

template <typename T>
BasicTensor<T> dropout_backward(const std::vector<T>& mask, const BasicTensor<T>& grad_output) {
  if (mask.size() != grad_output.numel()) throw NnError("dropout backward: mask size mismatch");
  BasicTensor<T> out(grad_output.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = grad_output[i] * mask[i];
  return out;
}

template <typename T>
double l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) shape_error("l1_loss", pred.shape(), target.shape());
  if (pred.numel() == 0) throw NnError("l1_loss on empty tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    sum += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  }
  return sum / static_cast<double>(pred.numel());
}

template <typename T>
BasicTensor<T> l1_loss_backward(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) shape_error("l1_loss backward", pred.shape(), target.shape());
  BasicTensor<T> out(pred.shape());
  const T inv = static_cast<T>(1.0 / static_cast<double>(pred.numel()));
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    out[i] = pred[i] > target[i] ? inv : (pred[i] < target[i] ? -inv : T{0});
  }
  return out;
}

#define VISE_INSTANTIATE_LAYERS(T)                                                                          \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                          bool);                                                            \
  template BasicTensor<T> batchnorm2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                              const BasicTensor<T>&, BasicTensor<T>&, BasicTensor<T>&, Mode, \
                                              BatchNormCache<T>*, const BatchNormOptions&);                 \
  template BasicTensor<T> batchnorm2d_infer(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                            const BasicTensor<T>&, const BasicTensor<T>&, double);           \
  template BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>&, const BasicTensor<T>&,          \
                                                  const BasicTensor<T>&);                                   \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                              \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> maxpool2d_forward(const BasicTensor<T>&, std::vector<std::size_t>*);              \
  template BasicTensor<T> maxpool2d_backward(const Shape&, const std::vector<std::size_t>&,                 \
                                             const BasicTensor<T>&);                                        \
  template BasicTensor<T> linear_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> dropout_forward(const BasicTensor<T>&, double, Mode, Rng&, std::vector<T>*);      \
  template BasicTensor<T> dropout_backward(const std::vector<T>&, const BasicTensor<T>&);                   \
  template double l1_loss(const BasicTensor<T>&, const BasicTensor<T>&);                                    \
  template BasicTensor<T> l1_loss_backward(const BasicTensor<T>&, const BasicTensor<T>&);

VISE_INSTANTIATE_LAYERS(float)
VISE_INSTANTIATE_LAYERS(double)

#undef VISE_INSTANTIATE_LAYERS

}  // namespace vise::nn
