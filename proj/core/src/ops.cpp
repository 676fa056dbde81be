#include "stic/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace stic {

using detail::GradTable;
using detail::TensorNode;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Requires-grad of the result is the OR over inputs; the backprop closure is
// recorded only in that case (constants build no graph).
Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<std::shared_ptr<TensorNode>> parents,
                   std::function<void(TensorNode*, const std::vector<double>&, GradTable&)> fn) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->id = detail::next_node_id();
  bool needs_graph = false;
  for (const auto& p : parents) needs_graph = needs_graph || p->requires_grad;
  node->requires_grad = needs_graph;
  if (needs_graph) {
    node->parents = std::move(parents);
    TensorNode* self = node.get();
    node->backprop = [self, fn = std::move(fn)](const std::vector<double>& up, GradTable& table) {
      fn(self, up, table);
    };
  }
  return Tensor(node);
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast binary_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.numel() == 1) return Broadcast::kLeftScalar;
  if (b.numel() == 1) return Broadcast::kRightScalar;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

struct AxisSplit {
  std::int64_t outer, len, inner;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) s.inner *= shape[i];
  return s;
}

Tensor unary(const Tensor& a, std::function<double(double)> f,
             std::function<double(double value, double out)> dfn) {
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(
      a.shape(), std::move(out), {a.node()},
      [dfn = std::move(dfn)](TensorNode* self, const std::vector<double>& up, GradTable& table) {
        const auto& parent = self->parents[0];
        auto& buf = table.at(parent.get());
        for (std::size_t i = 0; i < up.size(); ++i) {
          buf[i] += up[i] * dfn(parent->values[i], self->values[i]);
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Broadcast mode = binary_mode(a, b, "add");
  const Shape& shape = mode == Broadcast::kLeftScalar ? b.shape() : a.shape();
  std::int64_t n = shape_numel(shape);
  std::vector<double> out(n);
  auto av = a.data(), bv = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = av[mode == Broadcast::kLeftScalar ? 0 : i] + bv[mode == Broadcast::kRightScalar ? 0 : i];
  }
  return make_result(shape, std::move(out), {a.node(), b.node()},
                     [mode](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       auto& gb = table.at(self->parents[1].get());
                       for (std::size_t i = 0; i < up.size(); ++i) {
                         ga[mode == Broadcast::kLeftScalar ? 0 : i] += up[i];
                         gb[mode == Broadcast::kRightScalar ? 0 : i] += up[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Broadcast mode = binary_mode(a, b, "sub");
  const Shape& shape = mode == Broadcast::kLeftScalar ? b.shape() : a.shape();
  std::int64_t n = shape_numel(shape);
  std::vector<double> out(n);
  auto av = a.data(), bv = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = av[mode == Broadcast::kLeftScalar ? 0 : i] - bv[mode == Broadcast::kRightScalar ? 0 : i];
  }
  return make_result(shape, std::move(out), {a.node(), b.node()},
                     [mode](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       auto& gb = table.at(self->parents[1].get());
                       for (std::size_t i = 0; i < up.size(); ++i) {
                         ga[mode == Broadcast::kLeftScalar ? 0 : i] += up[i];
                         gb[mode == Broadcast::kRightScalar ? 0 : i] -= up[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Broadcast mode = binary_mode(a, b, "mul");
  const Shape& shape = mode == Broadcast::kLeftScalar ? b.shape() : a.shape();
  std::int64_t n = shape_numel(shape);
  std::vector<double> out(n);
  auto av = a.data(), bv = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = av[mode == Broadcast::kLeftScalar ? 0 : i] * bv[mode == Broadcast::kRightScalar ? 0 : i];
  }
  return make_result(
      shape, std::move(out), {a.node(), b.node()},
      [mode](TensorNode* self, const std::vector<double>& up, GradTable& table) {
        const auto& pa = self->parents[0];
        const auto& pb = self->parents[1];
        auto& ga = table.at(pa.get());
        auto& gb = table.at(pb.get());
        for (std::size_t i = 0; i < up.size(); ++i) {
          double va = pa->values[mode == Broadcast::kLeftScalar ? 0 : i];
          double vb = pb->values[mode == Broadcast::kRightScalar ? 0 : i];
          ga[mode == Broadcast::kLeftScalar ? 0 : i] += up[i] * vb;
          gb[mode == Broadcast::kRightScalar ? 0 : i] += up[i] * va;
        }
      });
}

Tensor scalar_mul(const Tensor& a, double c) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  return make_result(a.shape(), std::move(out), {a.node()},
                     [c](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * c;
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2,
          "matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  require(k == k2, "matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  auto av = a.data(), bv = b.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av_ip = av[i * k + p];
      if (av_ip == 0.0) continue;
      for (int j = 0; j < n; ++j) out[i * n + j] += av_ip * bv[p * n + j];
    }
  }
  return make_result(
      {m, n}, std::move(out), {a.node(), b.node()},
      [m, k, n](TensorNode* self, const std::vector<double>& up, GradTable& table) {
        const auto& pa = self->parents[0];
        const auto& pb = self->parents[1];
        auto& ga = table.at(pa.get());
        auto& gb = table.at(pb.get());
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            double u = up[i * n + j];
            if (u == 0.0) continue;
            for (int p = 0; p < k; ++p) {
              ga[i * k + p] += u * pb->values[p * n + j];
              gb[p * n + j] += u * pa->values[i * k + p];
            }
          }
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require(input.shape().size() == 3, "conv2d: input must be (C_in, H, W), got " +
                                         shape_str(input.shape()));
  require(weight.shape().size() == 4, "conv2d: weight must be (C_out, C_in, kh, kw), got " +
                                          shape_str(weight.shape()));
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  require(padding >= 0, "conv2d: negative padding");
  const int cin = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const int cout = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
  require(weight.shape()[1] == cin, "conv2d: channel mismatch, input " + shape_str(input.shape()) +
                                        " vs weight " + shape_str(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.shape() == Shape{cout}, "conv2d: bias must be (C_out), got " +
                                             shape_str(bias.shape()));
  }
  const int ho = (h + 2 * padding - kh) / stride + 1;
  const int wo = (w + 2 * padding - kw) / stride + 1;
  require(ho >= 1 && wo >= 1, "conv2d: kernel larger than padded input");

  auto xv = input.data();
  auto wv = weight.data();
  std::vector<double> out(static_cast<std::size_t>(cout) * ho * wo, 0.0);
  for (int co = 0; co < cout; ++co) {
    double b = has_bias ? bias.data()[co] : 0.0;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = b;
        for (int ci = 0; ci < cin; ++ci) {
          for (int r = 0; r < kh; ++r) {
            int iy = oy * stride - padding + r;
            if (iy < 0 || iy >= h) continue;
            for (int c = 0; c < kw; ++c) {
              int ix = ox * stride - padding + c;
              if (ix < 0 || ix >= w) continue;
              acc += xv[(ci * h + iy) * w + ix] * wv[((co * cin + ci) * kh + r) * kw + c];
            }
          }
        }
        out[(co * ho + oy) * wo + ox] = acc;
      }
    }
  }

  std::vector<std::shared_ptr<TensorNode>> parents{input.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result(
      {cout, ho, wo}, std::move(out), std::move(parents),
      [=](TensorNode* self, const std::vector<double>& up, GradTable& table) {
        const auto& px = self->parents[0];
        const auto& pw = self->parents[1];
        auto& gx = table.at(px.get());
        auto& gw = table.at(pw.get());
        double* gb = has_bias ? table.at(self->parents[2].get()).data() : nullptr;
        for (int co = 0; co < cout; ++co) {
          for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
              double u = up[(co * ho + oy) * wo + ox];
              if (u == 0.0) continue;
              if (gb) gb[co] += u;
              for (int ci = 0; ci < cin; ++ci) {
                for (int r = 0; r < kh; ++r) {
                  int iy = oy * stride - padding + r;
                  if (iy < 0 || iy >= h) continue;
                  for (int c = 0; c < kw; ++c) {
                    int ix = ox * stride - padding + c;
                    if (ix < 0 || ix >= w) continue;
                    gx[(ci * h + iy) * w + ix] +=
                        u * pw->values[((co * cin + ci) * kh + r) * kw + c];
                    gw[((co * cin + ci) * kh + r) * kw + c] +=
                        u * px->values[(ci * h + iy) * w + ix];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride, int padding) {
  require(input.shape().size() == 3, "conv_transpose2d: input must be (C_in, H, W), got " +
                                         shape_str(input.shape()));
  require(weight.shape().size() == 4,
          "conv_transpose2d: weight must be (C_in, C_out, kh, kw), got " +
              shape_str(weight.shape()));
  require(stride == 1 || stride == 2, "conv_transpose2d: stride must be 1 or 2");
  const int cin = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const int cout = weight.shape()[1], kh = weight.shape()[2], kw = weight.shape()[3];
  require(weight.shape()[0] == cin, "conv_transpose2d: channel mismatch, input " +
                                        shape_str(input.shape()) + " vs weight " +
                                        shape_str(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.shape() == Shape{cout}, "conv_transpose2d: bias must be (C_out), got " +
                                             shape_str(bias.shape()));
  }
  const int ho = (h - 1) * stride + kh - 2 * padding;
  const int wo = (w - 1) * stride + kw - 2 * padding;
  require(ho >= 1 && wo >= 1, "conv_transpose2d: empty output");

  auto xv = input.data();
  auto wv = weight.data();
  std::vector<double> out(static_cast<std::size_t>(cout) * ho * wo, 0.0);
  if (has_bias) {
    for (int co = 0; co < cout; ++co) {
      double b = bias.data()[co];
      for (int i = 0; i < ho * wo; ++i) out[co * ho * wo + i] = b;
    }
  }
  for (int ci = 0; ci < cin; ++ci) {
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        double v = xv[(ci * h + iy) * w + ix];
        if (v == 0.0) continue;
        for (int co = 0; co < cout; ++co) {
          for (int r = 0; r < kh; ++r) {
            int oy = iy * stride - padding + r;
            if (oy < 0 || oy >= ho) continue;
            for (int c = 0; c < kw; ++c) {
              int ox = ix * stride - padding + c;
              if (ox < 0 || ox >= wo) continue;
              out[(co * ho + oy) * wo + ox] += v * wv[((ci * cout + co) * kh + r) * kw + c];
            }
          }
        }
      }
    }
  }

  std::vector<std::shared_ptr<TensorNode>> parents{input.node(), weight.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result(
      {cout, ho, wo}, std::move(out), std::move(parents),
      [=](TensorNode* self, const std::vector<double>& up, GradTable& table) {
        const auto& px = self->parents[0];
        const auto& pw = self->parents[1];
        auto& gx = table.at(px.get());
        auto& gw = table.at(pw.get());
        if (has_bias) {
          auto& gb = table.at(self->parents[2].get());
          for (int co = 0; co < cout; ++co) {
            for (int i = 0; i < ho * wo; ++i) gb[co] += up[co * ho * wo + i];
          }
        }
        for (int ci = 0; ci < cin; ++ci) {
          for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
              double xval = px->values[(ci * h + iy) * w + ix];
              for (int co = 0; co < cout; ++co) {
                for (int r = 0; r < kh; ++r) {
                  int oy = iy * stride - padding + r;
                  if (oy < 0 || oy >= ho) continue;
                  for (int c = 0; c < kw; ++c) {
                    int ox = ix * stride - padding + c;
                    if (ox < 0 || ox >= wo) continue;
                    double u = up[(co * ho + oy) * wo + ox];
                    gx[(ci * h + iy) * w + ix] +=
                        u * pw->values[((ci * cout + co) * kh + r) * kw + c];
                    gw[((ci * cout + co) * kh + r) * kw + c] += u * xval;
                  }
                }
              }
            }
          }
        }
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double v) { return std::tanh(v); }, [](double, double t) { return 1.0 - t * t; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double v) { return std::exp(v); }, [](double, double e) { return e; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor logsumexp(const Tensor& a, int axis) {
  AxisSplit s = split_axis(a.shape(), axis, "logsumexp");
  Shape out_shape;
  for (int i = 0; i < static_cast<int>(a.shape().size()); ++i) {
    if (i != axis) out_shape.push_back(a.shape()[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  auto av = a.data();
  std::vector<double> out(static_cast<std::size_t>(s.outer) * s.inner);
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      double m = av[(o * s.len + 0) * s.inner + i];
      for (std::int64_t k = 1; k < s.len; ++k) m = std::max(m, av[(o * s.len + k) * s.inner + i]);
      double acc = 0.0;
      for (std::int64_t k = 0; k < s.len; ++k) acc += std::exp(av[(o * s.len + k) * s.inner + i] - m);
      out[o * s.inner + i] = m + std::log(acc);
    }
  }
  return make_result(out_shape, std::move(out), {a.node()},
                     [s](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       const auto& pa = self->parents[0];
                       auto& ga = table.at(pa.get());
                       for (std::int64_t o = 0; o < s.outer; ++o) {
                         for (std::int64_t i = 0; i < s.inner; ++i) {
                           double lse = self->values[o * s.inner + i];
                           double u = up[o * s.inner + i];
                           for (std::int64_t k = 0; k < s.len; ++k) {
                             std::int64_t idx = (o * s.len + k) * s.inner + i;
                             ga[idx] += u * std::exp(pa->values[idx] - lse);
                           }
                         }
                       }
                     });
}

Tensor softmax(const Tensor& a, int axis) {
  AxisSplit s = split_axis(a.shape(), axis, "softmax");
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      double m = av[(o * s.len + 0) * s.inner + i];
      for (std::int64_t k = 1; k < s.len; ++k) m = std::max(m, av[(o * s.len + k) * s.inner + i]);
      double acc = 0.0;
      for (std::int64_t k = 0; k < s.len; ++k) {
        std::int64_t idx = (o * s.len + k) * s.inner + i;
        out[idx] = std::exp(av[idx] - m);
        acc += out[idx];
      }
      for (std::int64_t k = 0; k < s.len; ++k) out[(o * s.len + k) * s.inner + i] /= acc;
    }
  }
  return make_result(a.shape(), std::move(out), {a.node()},
                     [s](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       for (std::int64_t o = 0; o < s.outer; ++o) {
                         for (std::int64_t i = 0; i < s.inner; ++i) {
                           double dot = 0.0;
                           for (std::int64_t k = 0; k < s.len; ++k) {
                             std::int64_t idx = (o * s.len + k) * s.inner + i;
                             dot += up[idx] * self->values[idx];
                           }
                           for (std::int64_t k = 0; k < s.len; ++k) {
                             std::int64_t idx = (o * s.len + k) * s.inner + i;
                             ga[idx] += self->values[idx] * (up[idx] - dot);
                           }
                         }
                       }
                     });
}

Tensor cross_entropy_soft(const Tensor& logits, const Tensor& target) {
  require(logits.shape().size() == 1, "cross_entropy_soft: logits must be rank 1, got " +
                                          shape_str(logits.shape()));
  require(logits.shape() == target.shape(),
          "cross_entropy_soft: shape mismatch " + shape_str(logits.shape()) + " vs " +
              shape_str(target.shape()));
  auto lv = logits.data();
  auto tv = target.data();
  double tsum = 0.0;
  for (double t : tv) {
    require(t >= -1e-12, "cross_entropy_soft: negative target mass");
    tsum += t;
  }
  require(std::abs(tsum - 1.0) <= 1e-9,
          "cross_entropy_soft: target sums to " + std::to_string(tsum) + ", expected 1");
  const std::int64_t n = logits.numel();
  double m = lv[0];
  for (std::int64_t i = 1; i < n; ++i) m = std::max(m, lv[i]);
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::exp(lv[i] - m);
  double lse = m + std::log(acc);
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) loss -= tv[i] * (lv[i] - lse);
  return make_result(
      {1}, {loss}, {logits.node(), target.node()},
      [n, lse](TensorNode* self, const std::vector<double>& up, GradTable& table) {
        const auto& pl = self->parents[0];
        const auto& pt = self->parents[1];
        auto& gl = table.at(pl.get());
        double u = up[0];
        for (std::int64_t i = 0; i < n; ++i) {
          gl[i] += u * (std::exp(pl->values[i] - lse) - pt->values[i]);
        }
        if (pt->requires_grad) {
          auto& gt = table.at(pt.get());
          for (std::int64_t i = 0; i < n; ++i) gt[i] -= u * (pl->values[i] - lse);
        }
      });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  std::int64_t n = a.numel();
  return make_result({1}, {acc}, {a.node()},
                     [n](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       for (std::int64_t i = 0; i < n; ++i) ga[i] += up[0];
                     });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  std::int64_t n = a.numel();
  return make_result({1}, {acc / static_cast<double>(n)}, {a.node()},
                     [n](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       double u = up[0] / static_cast<double>(n);
                       for (std::int64_t i = 0; i < n; ++i) ga[i] += u;
                     });
}

Tensor reshape(const Tensor& a, const Shape& new_shape) {
  require(shape_numel(new_shape) == a.numel(),
          "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(new_shape, std::move(out), {a.node()},
                     [](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i];
                     });
}

Tensor transpose(const Tensor& a) {
  require(a.shape().size() == 2, "transpose: expected rank-2 tensor, got " + shape_str(a.shape()));
  const int m = a.shape()[0], n = a.shape()[1];
  auto av = a.data();
  std::vector<double> out(av.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  }
  return make_result({n, m}, std::move(out), {a.node()},
                     [m, n](TensorNode* self, const std::vector<double>& up, GradTable& table) {
                       auto& ga = table.at(self->parents[0].get());
                       for (int i = 0; i < m; ++i) {
                         for (int j = 0; j < n; ++j) ga[i * n + j] += up[j * m + i];
                       }
                     });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  require(axis >= 0 && axis < static_cast<int>(first.size()),
          "concat: axis " + std::to_string(axis) + " out of range for shape " + shape_str(first));
  Shape out_shape = first;
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    require(s.size() == first.size(), "concat: rank mismatch " + shape_str(first) + " vs " +
                                          shape_str(s));
    for (int d = 0; d < static_cast<int>(s.size()); ++d) {
      if (d != axis) {
        require(s[d] == first[d],
                "concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s));
      }
    }
    out_shape[axis] += s[axis];
  }

  AxisSplit split = split_axis(first, axis, "concat");  // outer/inner shared by all parts
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::int64_t> lens;
  std::int64_t total_len = out_shape[axis];
  std::int64_t offset = 0;
  for (const Tensor& part : parts) {
    std::int64_t len = part.shape()[axis];
    lens.push_back(len);
    auto pv = part.data();
    for (std::int64_t o = 0; o < split.outer; ++o) {
      for (std::int64_t k = 0; k < len; ++k) {
        for (std::int64_t i = 0; i < split.inner; ++i) {
          out[(o * total_len + offset + k) * split.inner + i] = pv[(o * len + k) * split.inner + i];
        }
      }
    }
    offset += len;
  }

  std::vector<std::shared_ptr<TensorNode>> parents;
  for (const Tensor& part : parts) parents.push_back(part.node());
  auto outer = split.outer;
  auto inner = split.inner;
  return make_result(out_shape, std::move(out), std::move(parents),
                     [outer, inner, lens, total_len](TensorNode* self,
                                                     const std::vector<double>& up,
                                                     GradTable& table) {
                       std::int64_t offset = 0;
                       for (std::size_t p = 0; p < self->parents.size(); ++p) {
                         auto& gp = table.at(self->parents[p].get());
                         std::int64_t len = lens[p];
                         for (std::int64_t o = 0; o < outer; ++o) {
                           for (std::int64_t k = 0; k < len; ++k) {
                             for (std::int64_t i = 0; i < inner; ++i) {
                               gp[(o * len + k) * inner + i] +=
                                   up[(o * total_len + offset + k) * inner + i];
                             }
                           }
                         }
                         offset += len;
                       }
                     });
}

Tensor random_normal(const Shape& shape, Rng& rng, double mean, double stddev,
                     bool requires_grad) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.normal(mean, stddev);
  return Tensor::from(shape, std::move(values), requires_grad);
}

Tensor random_uniform(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor::from(shape, std::move(values), requires_grad);
}

}  // namespace stic
