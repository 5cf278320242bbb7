#include "elp/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elp::nn {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw Error("layers: " + what);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor embedding_rows(Tensor table, std::span<const int> tokens,
                      bool frozen) {
  require(table.valid() && table.shape().size() == 2,
          "embedding table must be 2D");
  const std::size_t v = table.rows(), d = table.cols();
  require(!tokens.empty(), "embedding_rows needs at least one token");
  std::vector<int> toks(tokens.begin(), tokens.end());
  for (int t : toks)
    require(t >= 0 && t < static_cast<int>(v),
            "token " + std::to_string(t) + " out of range for " +
                std::to_string(v) + " ids");

  Tensor out = frozen
                   ? Tensor::make_op({toks.size(), d}, {})
                   : Tensor::make_op({toks.size(), d}, {table.node()});
  auto* tn = table.node().get();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == 0) continue;  // PAD row stays zero
    std::copy_n(tn->value.begin() +
                    static_cast<std::ptrdiff_t>(toks[i] * static_cast<int>(d)),
                d, out.value().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  if (!frozen) {
    auto* on = out.node().get();
    out.node()->backward_fn = [on, tn, toks, d]() {
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i] == 0) continue;
        const std::size_t row = static_cast<std::size_t>(toks[i]) * d;
        for (std::size_t c = 0; c < d; ++c)
          tn->grad[row + c] += on->grad[i * d + c];
      }
    };
  }
  return out;
}

Tensor conv1d_same(Tensor x, Tensor w, Tensor b) {
  require(x.valid() && x.shape().size() == 2, "conv input must be 2D");
  require(w.valid() && w.shape().size() == 3, "conv weight must be F x K x d");
  const std::size_t t_len = x.rows(), d = x.cols();
  const std::size_t f_n = w.shape()[0], k = w.shape()[1];
  require(t_len >= 1, "conv input must have at least 1 step");
  require(w.shape()[2] == d, "conv weight depth mismatch");
  require(k % 2 == 1, "conv kernel must be odd for same padding");
  require(b.valid() && b.size() == f_n, "conv bias length mismatch");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  Tensor out =
      Tensor::make_op({t_len, f_n}, {x.node(), w.node(), b.node()});
  auto* xn = x.node().get();
  auto* wn = w.node().get();
  auto* bn = b.node().get();
  auto* on = out.node().get();

  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t f = 0; f < f_n; ++f) {
      double acc = bn->value[f];
      for (std::size_t kk = 0; kk < k; ++kk) {
        const std::ptrdiff_t src =
            static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(kk) -
            pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
        const double* xrow =
            xn->value.data() + static_cast<std::size_t>(src) * d;
        const double* wrow = wn->value.data() + (f * k + kk) * d;
        for (std::size_t c = 0; c < d; ++c) acc += wrow[c] * xrow[c];
      }
      on->value[t * f_n + f] = acc;
    }

  out.node()->backward_fn = [xn, wn, bn, on, t_len, d, f_n, k, pad]() {
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t f = 0; f < f_n; ++f) {
        const double gy = on->grad[t * f_n + f];
        if (gy == 0.0) continue;
        bn->grad[f] += gy;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) +
                                     static_cast<std::ptrdiff_t>(kk) - pad;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
          const std::size_t xoff = static_cast<std::size_t>(src) * d;
          const std::size_t woff = (f * k + kk) * d;
          for (std::size_t c = 0; c < d; ++c) {
            wn->grad[woff + c] += gy * xn->value[xoff + c];
            xn->grad[xoff + c] += gy * wn->value[woff + c];
          }
        }
      }
  };
  return out;
}

Tensor relu(Tensor x) {
  require(x.valid(), "relu on null tensor");
  Tensor out = Tensor::make_op(x.shape(), {x.node()});
  auto* xn = x.node().get();
  auto* on = out.node().get();
  for (std::size_t i = 0; i < xn->value.size(); ++i)
    on->value[i] = xn->value[i] > 0.0 ? xn->value[i] : 0.0;
  out.node()->backward_fn = [xn, on]() {
    for (std::size_t i = 0; i < xn->value.size(); ++i)
      if (xn->value[i] > 0.0) xn->grad[i] += on->grad[i];
  };
  return out;
}

Tensor maxpool1d(Tensor x, std::size_t size, std::size_t stride) {
  require(x.valid() && x.shape().size() == 2, "maxpool input must be 2D");
  require(size >= 1 && stride >= 1, "maxpool size and stride must be >= 1");
  const std::size_t t_len = x.rows(), d = x.cols();
  require(t_len >= size, "maxpool window longer than input (" +
                             std::to_string(t_len) + " < " +
                             std::to_string(size) + ")");
  const std::size_t t_out = (t_len - size) / stride + 1;

  Tensor out = Tensor::make_op({t_out, d}, {x.node()});
  auto* xn = x.node().get();
  auto* on = out.node().get();
  std::vector<std::size_t> argmax(t_out * d);
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t best = t * stride;
      double best_v = xn->value[best * d + c];
      for (std::size_t i = 1; i < size; ++i) {
        const std::size_t row = t * stride + i;
        if (xn->value[row * d + c] > best_v) {  // first index wins ties
          best_v = xn->value[row * d + c];
          best = row;
        }
      }
      argmax[t * d + c] = best;
      on->value[t * d + c] = best_v;
    }
  out.node()->backward_fn = [xn, on, argmax, d]() {
    for (std::size_t i = 0; i < on->grad.size(); ++i)
      xn->grad[argmax[i] * d + i % d] += on->grad[i];
  };
  return out;
}

Tensor lstm_layer(Tensor x, Tensor w, Tensor u, Tensor b, bool reverse) {
  require(x.valid() && x.shape().size() == 2, "lstm input must be 2D");
  const std::size_t t_len = x.rows(), d = x.cols();
  require(t_len >= 1, "lstm needs at least one step");
  require(w.valid() && w.shape().size() == 2 && w.cols() == d,
          "lstm w must be 4h x d");
  const std::size_t h4 = w.rows();
  require(h4 % 4 == 0, "lstm w rows must be 4h");
  const std::size_t h = h4 / 4;
  require(u.valid() && u.rows() == h4 && u.cols() == h, "lstm u must be 4h x h");
  require(b.valid() && b.size() == h4, "lstm b must be 4h");

  Tensor out = Tensor::make_op({t_len, h},
                               {x.node(), w.node(), u.node(), b.node()});
  auto* xn = x.node().get();
  auto* wn = w.node().get();
  auto* un = u.node().get();
  auto* bn = b.node().get();
  auto* on = out.node().get();

  // Memos for BPTT, indexed by processing step s (not time).
  std::vector<double> gi(t_len * h), gf(t_len * h), gg(t_len * h),
      go(t_len * h), cell(t_len * h);

  auto time_of = [t_len, reverse](std::size_t s) {
    return reverse ? t_len - 1 - s : s;
  };

  std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0), z(h4);
  for (std::size_t s = 0; s < t_len; ++s) {
    const std::size_t t = time_of(s);
    const double* xrow = xn->value.data() + t * d;
    for (std::size_t r = 0; r < h4; ++r) {
      double acc = bn->value[r];
      const double* wrow = wn->value.data() + r * d;
      for (std::size_t c = 0; c < d; ++c) acc += wrow[c] * xrow[c];
      const double* urow = un->value.data() + r * h;
      for (std::size_t c = 0; c < h; ++c) acc += urow[c] * h_prev[c];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double iv = sigmoid(z[j]);
      const double fv = sigmoid(z[h + j]);
      const double gv = std::tanh(z[2 * h + j]);
      const double ov = sigmoid(z[3 * h + j]);
      const double cv = fv * c_prev[j] + iv * gv;
      gi[s * h + j] = iv;
      gf[s * h + j] = fv;
      gg[s * h + j] = gv;
      go[s * h + j] = ov;
      cell[s * h + j] = cv;
      on->value[t * h + j] = ov * std::tanh(cv);
      h_prev[j] = on->value[t * h + j];
      c_prev[j] = cv;
    }
  }

  out.node()->backward_fn = [xn, wn, un, bn, on, gi, gf, gg, go, cell, t_len,
                             d, h, h4, time_of]() {
    std::vector<double> dh(h, 0.0), dc(h, 0.0), dz(h4);
    for (std::size_t s = t_len; s-- > 0;) {
      const std::size_t t = time_of(s);
      for (std::size_t j = 0; j < h; ++j) dh[j] += on->grad[t * h + j];

      const double* c_prev =
          s > 0 ? cell.data() + (s - 1) * h : nullptr;  // zero at s=0
      const std::size_t prev_t = s > 0 ? time_of(s - 1) : 0;
      for (std::size_t j = 0; j < h; ++j) {
        const double iv = gi[s * h + j], fv = gf[s * h + j],
                     gv = gg[s * h + j], ov = go[s * h + j];
        const double tc = std::tanh(cell[s * h + j]);
        const double d_o = dh[j] * tc;
        double d_c = dc[j] + dh[j] * ov * (1.0 - tc * tc);
        const double cp = c_prev != nullptr ? c_prev[j] : 0.0;
        const double d_f = d_c * cp;
        const double d_i = d_c * gv;
        const double d_g = d_c * iv;
        dc[j] = d_c * fv;  // flows to previous step
        dz[j] = d_i * iv * (1.0 - iv);
        dz[h + j] = d_f * fv * (1.0 - fv);
        dz[2 * h + j] = d_g * (1.0 - gv * gv);
        dz[3 * h + j] = d_o * ov * (1.0 - ov);
      }

      const double* xrow = xn->value.data() + t * d;
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t r = 0; r < h4; ++r) {
        const double gz = dz[r];
        if (gz == 0.0) continue;
        bn->grad[r] += gz;
        double* wgrow = wn->grad.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) wgrow[c] += gz * xrow[c];
        double* xgrow = xn->grad.data() + t * d;
        const double* wrow = wn->value.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) xgrow[c] += gz * wrow[c];
        if (s > 0) {
          const double* hprev = on->value.data() + prev_t * h;
          double* ugrow = un->grad.data() + r * h;
          for (std::size_t c = 0; c < h; ++c) ugrow[c] += gz * hprev[c];
          const double* urow = un->value.data() + r * h;
          for (std::size_t c = 0; c < h; ++c) dh[c] += gz * urow[c];
        }
      }
    }
  };
  return out;
}

Tensor concat_cols(Tensor a, Tensor b) {
  require(a.valid() && b.valid(), "concat on null tensor");
  require(a.shape().size() == 2 && b.shape().size() == 2,
          "concat needs 2D tensors");
  require(a.rows() == b.rows(), "concat row mismatch");
  const std::size_t t_len = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out = Tensor::make_op({t_len, ca + cb}, {a.node(), b.node()});
  auto* an = a.node().get();
  auto* bn = b.node().get();
  auto* on = out.node().get();
  for (std::size_t t = 0; t < t_len; ++t) {
    std::copy_n(an->value.begin() + static_cast<std::ptrdiff_t>(t * ca), ca,
                on->value.begin() + static_cast<std::ptrdiff_t>(t * (ca + cb)));
    std::copy_n(bn->value.begin() + static_cast<std::ptrdiff_t>(t * cb), cb,
                on->value.begin() +
                    static_cast<std::ptrdiff_t>(t * (ca + cb) + ca));
  }
  out.node()->backward_fn = [an, bn, on, t_len, ca, cb]() {
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t c = 0; c < ca; ++c)
        an->grad[t * ca + c] += on->grad[t * (ca + cb) + c];
      for (std::size_t c = 0; c < cb; ++c)
        bn->grad[t * cb + c] += on->grad[t * (ca + cb) + ca + c];
    }
  };
  return out;
}

Tensor masked_mean(Tensor x, const std::vector<bool>& mask) {
  require(x.valid() && x.shape().size() == 2, "masked_mean input must be 2D");
  require(mask.size() == x.rows(), "masked_mean mask length mismatch");
  const std::size_t t_len = x.rows(), d = x.cols();
  std::size_t n_valid = 0;
  for (bool m : mask)
    if (m) ++n_valid;
  require(n_valid > 0, "masked_mean: every step is masked");

  Tensor out = Tensor::make_op({std::size_t{1}, d}, {x.node()});
  auto* xn = x.node().get();
  auto* on = out.node().get();
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    for (std::size_t c = 0; c < d; ++c)
      on->value[c] += xn->value[t * d + c];
  }
  const double inv = 1.0 / static_cast<double>(n_valid);
  for (std::size_t c = 0; c < d; ++c) on->value[c] *= inv;
  out.node()->backward_fn = [xn, on, mask, t_len, d, inv]() {
    for (std::size_t t = 0; t < t_len; ++t) {
      if (!mask[t]) continue;
      for (std::size_t c = 0; c < d; ++c)
        xn->grad[t * d + c] += inv * on->grad[c];
    }
  };
  return out;
}

AttentionOut attention_pool(Tensor f, Tensor w, Tensor b, Tensor v,
                            const std::vector<bool>& mask) {
  require(f.valid() && f.shape().size() == 2, "attention input must be 2D");
  const std::size_t t_len = f.rows(), h = f.cols();
  require(mask.size() == t_len, "attention mask length mismatch");
  require(w.valid() && w.shape().size() == 2 && w.cols() == h,
          "attention w must be a x h");
  const std::size_t a_dim = w.rows();
  require(b.valid() && b.size() == a_dim, "attention b length mismatch");
  require(v.valid() && v.size() == a_dim, "attention v length mismatch");
  std::size_t n_valid = 0;
  for (bool m : mask)
    if (m) ++n_valid;
  require(n_valid > 0, "attention: every step is masked");

  Tensor out = Tensor::make_op(
      {std::size_t{1}, h}, {f.node(), w.node(), b.node(), v.node()});
  auto* fn = f.node().get();
  auto* wn = w.node().get();
  auto* bn = b.node().get();
  auto* vn = v.node().get();
  auto* on = out.node().get();

  // Forward memo: pre-activations' tanh and the softmax weights.
  std::vector<double> act(t_len * a_dim, 0.0);
  std::vector<double> scores(t_len, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    const double* frow = fn->value.data() + t * h;
    double s = 0.0;
    for (std::size_t r = 0; r < a_dim; ++r) {
      double q = bn->value[r];
      const double* wrow = wn->value.data() + r * h;
      for (std::size_t c = 0; c < h; ++c) q += wrow[c] * frow[c];
      const double tq = std::tanh(q);
      act[t * a_dim + r] = tq;
      s += vn->value[r] * tq;
    }
    scores[t] = s;
  }

  double smax = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < t_len; ++t)
    if (mask[t]) smax = std::max(smax, scores[t]);
  std::vector<double> alpha(t_len, 0.0);
  double z = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    alpha[t] = std::exp(scores[t] - smax);
    z += alpha[t];
  }
  for (std::size_t t = 0; t < t_len; ++t) alpha[t] /= z;

  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    const double* frow = fn->value.data() + t * h;
    for (std::size_t c = 0; c < h; ++c) on->value[c] += alpha[t] * frow[c];
  }

  out.node()->backward_fn = [fn, wn, bn, vn, on, act, alpha, mask, t_len, h,
                             a_dim]() {
    // d(context) -> d(alpha) and direct d(f).
    std::vector<double> dalpha(t_len, 0.0);
    for (std::size_t t = 0; t < t_len; ++t) {
      if (!mask[t]) continue;
      const double* frow = fn->value.data() + t * h;
      double* fgrow = fn->grad.data() + t * h;
      for (std::size_t c = 0; c < h; ++c) {
        dalpha[t] += on->grad[c] * frow[c];
        fgrow[c] += alpha[t] * on->grad[c];
      }
    }
    // Softmax backward over the unmasked steps.
    double dot = 0.0;
    for (std::size_t t = 0; t < t_len; ++t)
      if (mask[t]) dot += alpha[t] * dalpha[t];
    for (std::size_t t = 0; t < t_len; ++t) {
      if (!mask[t]) continue;
      const double ds = alpha[t] * (dalpha[t] - dot);
      if (ds == 0.0) continue;
      const double* frow = fn->value.data() + t * h;
      double* fgrow = fn->grad.data() + t * h;
      for (std::size_t r = 0; r < a_dim; ++r) {
        const double tq = act[t * a_dim + r];
        vn->grad[r] += ds * tq;
        const double dq = ds * vn->value[r] * (1.0 - tq * tq);
        if (dq == 0.0) continue;
        bn->grad[r] += dq;
        double* wgrow = wn->grad.data() + r * h;
        const double* wrow = wn->value.data() + r * h;
        for (std::size_t c = 0; c < h; ++c) {
          wgrow[c] += dq * frow[c];
          fgrow[c] += dq * wrow[c];
        }
      }
    }
  };

  AttentionOut res;
  res.context = out;
  res.weights = alpha;
  return res;
}

Tensor dense(Tensor x, Tensor w, Tensor b) {
  require(x.valid(), "dense on null tensor");
  require(x.rows() == 1, "dense expects a 1 x in row");
  const std::size_t in = x.cols();
  require(w.valid() && w.shape().size() == 2 && w.cols() == in,
          "dense w must be out x in");
  const std::size_t out_n = w.rows();
  require(b.valid() && b.size() == out_n, "dense b length mismatch");

  Tensor out = Tensor::make_op({std::size_t{1}, out_n},
                               {x.node(), w.node(), b.node()});
  auto* xn = x.node().get();
  auto* wn = w.node().get();
  auto* bn = b.node().get();
  auto* on = out.node().get();
  for (std::size_t j = 0; j < out_n; ++j) {
    double acc = bn->value[j];
    const double* wrow = wn->value.data() + j * in;
    for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * xn->value[i];
    on->value[j] = acc;
  }
  out.node()->backward_fn = [xn, wn, bn, on, in, out_n]() {
    for (std::size_t j = 0; j < out_n; ++j) {
      const double gy = on->grad[j];
      if (gy == 0.0) continue;
      bn->grad[j] += gy;
      double* wgrow = wn->grad.data() + j * in;
      const double* wrow = wn->value.data() + j * in;
      for (std::size_t i = 0; i < in; ++i) {
        wgrow[i] += gy * xn->value[i];
        xn->grad[i] += gy * wrow[i];
      }
    }
  };
  return out;
}

Tensor flatten(Tensor x) {
  require(x.valid(), "flatten on null tensor");
  Tensor out = Tensor::make_op({std::size_t{1}, x.size()}, {x.node()});
  auto* xn = x.node().get();
  auto* on = out.node().get();
  std::copy(xn->value.begin(), xn->value.end(), on->value.begin());
  out.node()->backward_fn = [xn, on]() {
    for (std::size_t i = 0; i < xn->grad.size(); ++i)
      xn->grad[i] += on->grad[i];
  };
  return out;
}

Tensor dropout(Tensor x, double keep, Rng& rng, bool train) {
  require(x.valid(), "dropout on null tensor");
  require(keep > 0.0 && keep <= 1.0, "dropout keep must be in (0, 1]");
  if (!train || keep == 1.0) return x;
  Tensor out = Tensor::make_op(x.shape(), {x.node()});
  auto* xn = x.node().get();
  auto* on = out.node().get();
  std::vector<double> scale(x.size());
  const double inv = 1.0 / keep;
  for (std::size_t i = 0; i < scale.size(); ++i)
    scale[i] = rng.uniform() < keep ? inv : 0.0;
  for (std::size_t i = 0; i < scale.size(); ++i)
    on->value[i] = xn->value[i] * scale[i];
  out.node()->backward_fn = [xn, on, scale]() {
    for (std::size_t i = 0; i < scale.size(); ++i)
      xn->grad[i] += on->grad[i] * scale[i];
  };
  return out;
}

std::vector<double> softmax_values(std::span<const double> logits) {
  if (logits.empty()) throw Error("softmax on empty logits");
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Tensor softmax_cross_entropy(Tensor logits, std::size_t label,
                             std::vector<double>* probs) {
  require(logits.valid() && logits.rows() == 1, "loss expects 1 x C logits");
  const std::size_t c_n = logits.cols();
  require(label < c_n, "label " + std::to_string(label) +
                           " out of range for " + std::to_string(c_n) +
                           " classes");
  std::vector<double> p = softmax_values(logits.value());
  if (probs != nullptr) *probs = p;

  Tensor out = Tensor::make_op({std::size_t{1}}, {logits.node()});
  out.value()[0] = -std::log(std::max(p[label], 1e-12));
  auto* ln = logits.node().get();
  auto* on = out.node().get();
  out.node()->backward_fn = [ln, on, p, label]() {
    const double g = on->grad[0];
    for (std::size_t i = 0; i < p.size(); ++i)
      ln->grad[i] += g * (p[i] - (i == label ? 1.0 : 0.0));
  };
  return out;
}

}  // namespace elp::nn
