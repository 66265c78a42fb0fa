#include "a3ps/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "a3ps/errors.hpp"

namespace a3ps::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Tape& tape_of(Var a) {
  if (!a.tape) throw ContractError("operand is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands live on different tapes");
  return tape_of(a);
}

std::string shapes(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": incompatible operands " + a.shape_string() + " and " + b.shape_string();
}

// How operand b maps onto the shape of operand a.
enum class Broadcast { Same, Row, Col, Scalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::Col;
  throw ShapeError(shapes(op, a, b));
}

std::size_t b_index(Broadcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Broadcast::Same: return r * cols + c;
    case Broadcast::Row: return c;
    case Broadcast::Col: return r;
    case Broadcast::Scalar: return 0;
  }
  return 0;
}

Tensor shaped_like(const Tensor& t) { return Tensor({t.rows(), t.cols()}); }

// out (n x m) += a (n x k) * b (k x m). Each output element accumulates in
// ascending k regardless of n, so a row's result does not depend on the
// batch it is evaluated in. Zero entries of a are skipped.
void gemm_rows(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t r = 0; r < n; ++r) {
    double* o = out + r * m;
    const double* ar = a + r * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ar[kk];
      if (av == 0.0) continue;
      const double* br = b + kk * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

void add_row_bias(Tensor& out, const Tensor& bias) {
  const std::size_t m = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* o = out.data() + r * m;
    for (std::size_t j = 0; j < m; ++j) o[j] += bias[j];
  }
}

// Generic elementwise binary op; df returns (d/da, d/db) at (a, b).
template <typename F, typename DF>
Var binary(const char* op, Var a, Var b, F f, DF df) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast k = broadcast_kind(op, av, bv);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = shaped_like(av);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = f(av[r * cols + c], bv[b_index(k, r, c, cols)]);
    }
  }
  const int ia = a.id, ib = b.id;
  return tape.record(op, std::move(out), {a, b}, [ia, ib, k, df](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    const std::size_t rows = av.rows(), cols = av.cols();
    const bool ga = t.needs_grad(ia), gb = t.needs_grad(ib);
    Tensor* da = ga ? &t.grad(ia) : nullptr;
    Tensor* db = gb ? &t.grad(ib) : nullptr;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        const std::size_t j = b_index(k, r, c, cols);
        const auto [pa, pb] = df(av[i], bv[j]);
        if (da) (*da)[i] += g[i] * pa;
        if (db) (*db)[j] += g[i] * pb;
      }
    }
  });
}

template <typename F, typename DF>
Var unary(const char* op, Var a, F f, DF df) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = shaped_like(av);
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const int ia = a.id;
  return tape.record(op, std::move(out), {a}, [ia, df](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor& dx = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += g[i] * df(x[i], y[i]);
  });
}

void check_labels(const char* op, const Tensor& x, const std::vector<int>& labels) {
  if (labels.size() != x.rows()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(x.rows()) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= x.cols()) {
      throw ShapeError(std::string(op) + ": label " + std::to_string(l) + " out of range");
    }
  }
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y = shaped_like(x);
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* in = x.data() + r * cols;
    double* out = y.data() + r * cols;
    const double m = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(std::max(in[c] - m, -80.0));
      z += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= z;
  }
  return y;
}

Tensor log_softmax_rows(const Tensor& x) {
  Tensor y = shaped_like(x);
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* in = x.data() + r * cols;
    double* out = y.data() + r * cols;
    const double m = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(in[c] - m);
    const double lse = m + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) out[c] = in[c] - lse;
  }
  return y;
}

}  // namespace

Var add(Var a, Var b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return std::pair{1.0, 1.0}; });
}

Var sub(Var a, Var b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return std::pair{1.0, -1.0}; });
}

Var mul(Var a, Var b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double x, double y) { return std::pair{y, x}; });
}

Var minimum(Var a, Var b) {
  // Ties route the gradient to a.
  return binary("minimum", a, b, [](double x, double y) { return std::min(x, y); },
                [](double x, double y) { return x <= y ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0}; });
}

Var scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var one_minus(Var a) {
  return unary("one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(std::clamp(x, -80.0, 80.0)); },
               [](double x, double y) { return (x > -80.0 && x < 80.0) ? y : 0.0; });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) throw ShapeError(shapes("matmul", av, bv));
  Tensor out = Tensor::zeros(av.rows(), bv.cols());
  gemm_rows(av.data(), bv.data(), out.data(), av.rows(), av.cols(), bv.cols());
  const int ia = a.id, ib = b.id;
  return tape.record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) as_matrix(t.grad(ia)).noalias() += as_matrix(g) * as_matrix(t.value(ib)).transpose();
    if (t.needs_grad(ib)) as_matrix(t.grad(ib)).noalias() += as_matrix(t.value(ia)).transpose() * as_matrix(g);
  });
}

Var affine(Var x, Var w, Var b) {
  Tape& tape = tape_of(x, w);
  tape_of(x, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.cols() != wv.rows()) throw ShapeError(shapes("affine(x, W)", xv, wv));
  if (bv.rows() != 1 || bv.cols() != wv.cols()) throw ShapeError(shapes("affine(W, b)", wv, bv));
  Tensor out = Tensor::zeros(xv.rows(), wv.cols());
  gemm_rows(xv.data(), wv.data(), out.data(), xv.rows(), xv.cols(), wv.cols());
  add_row_bias(out, bv);
  const int ix = x.id, iw = w.id, ib = b.id;
  return tape.record("affine", std::move(out), {x, w, b}, [ix, iw, ib](Tape& t, int self) {
    const auto g = as_matrix(t.grad(self));
    if (t.needs_grad(ix)) as_matrix(t.grad(ix)).noalias() += g * as_matrix(t.value(iw)).transpose();
    if (t.needs_grad(iw)) as_matrix(t.grad(iw)).noalias() += as_matrix(t.value(ix)).transpose() * g;
    if (t.needs_grad(ib)) as_matrix(t.grad(ib)).row(0) += g.colwise().sum();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape& tape = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.rows() != rows) throw ShapeError(shapes("concat_cols", parts.front().value(), p.value()));
    cols += p.cols();
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * v.cols(), v.cols(), out.data() + r * cols + off);
    }
    ids.push_back(p.id);
    offsets.push_back(off);
    off += v.cols();
  }
  return tape.record("concat_cols", std::move(out), parts, [ids, offsets](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const std::size_t cols = g.cols();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.needs_grad(ids[k])) continue;
      Tensor& d = t.grad(ids[k]);
      const std::size_t w = d.cols();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < w; ++c) d[r * w + c] += g[r * cols + offsets[k] + c];
      }
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t len) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  if (len == 0 || start + len > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") outside " + av.shape_string());
  }
  Tensor out = Tensor::zeros(av.rows(), len);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * av.cols() + start, len, out.data() + r * len);
  }
  const int ia = a.id;
  return tape.record("slice_cols", std::move(out), {a}, [ia, start, len](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(ia);
    const std::size_t cols = d.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < len; ++c) d[r * cols + start + c] += g[r * len + c];
    }
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const int ia = a.id;
  return tape.record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, int self) {
    const double g = t.grad(self)[0];
    for (double& d : t.grad(ia).values()) d += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_cols(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = Tensor::zeros(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out[r] += av(r, c);
  }
  const int ia = a.id;
  return tape.record("sum_cols", std::move(out), {a}, [ia](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(ia);
    const std::size_t cols = d.cols();
    for (std::size_t r = 0; r < d.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r];
    }
  });
}

Var gather_cols(Var a, const std::vector<int>& index) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  check_labels("gather_cols", av, index);
  Tensor out = Tensor::zeros(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) out[r] = av(r, static_cast<std::size_t>(index[r]));
  const int ia = a.id;
  return tape.record("gather_cols", std::move(out), {a}, [ia, index](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) d(r, static_cast<std::size_t>(index[r])) += g[r];
  });
}

Var embed(Var table, const std::vector<int>& indices) {
  Tape& tape = tape_of(table);
  const Tensor& tv = table.value();
  if (indices.empty()) throw ShapeError("embed: empty index list");
  const std::size_t dim = tv.cols();
  Tensor out = Tensor::zeros(indices.size(), dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= tv.rows()) {
      throw ShapeError("embed: index " + std::to_string(idx) + " outside table " + tv.shape_string());
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idx) * dim, dim, out.data() + i * dim);
  }
  const int it = table.id;
  return tape.record("embed", std::move(out), {table}, [it, indices, dim](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(it);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      double* row = d.data() + static_cast<std::size_t>(indices[i]) * dim;
      for (std::size_t c = 0; c < dim; ++c) row[c] += g[i * dim + c];
    }
  });
}

Var softmax(Var logits) {
  Tape& tape = tape_of(logits);
  Tensor y = softmax_rows(logits.value());
  const int ix = logits.id;
  return tape.record("softmax", std::move(y), {logits}, [ix](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& d = t.grad(ix);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
}

Var log_softmax(Var logits) {
  Tape& tape = tape_of(logits);
  Tensor y = log_softmax_rows(logits.value());
  const int ix = logits.id;
  return tape.record("log_softmax", std::move(y), {logits}, [ix](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& d = t.grad(ix);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r * cols + c] - std::exp(y[r * cols + c]) * gs;
    }
  });
}

Var cross_entropy(Var probabilities, const std::vector<int>& labels) {
  Tape& tape = tape_of(probabilities);
  const Tensor& p = probabilities.value();
  check_labels("cross_entropy", p, labels);
  double loss = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double q = p(r, static_cast<std::size_t>(labels[r]));
    if (!(q > 0.0)) throw NumericError("cross_entropy: zero probability on the label");
    loss -= std::log(q);
  }
  const double n = static_cast<double>(p.rows());
  const int ip = probabilities.id;
  return tape.record("cross_entropy", Tensor::scalar(loss / n), {probabilities}, [ip, labels, n](Tape& t, int self) {
    const double g = t.grad(self)[0];
    const Tensor& p = t.value(ip);
    Tensor& d = t.grad(ip);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const auto c = static_cast<std::size_t>(labels[r]);
      d(r, c) -= g / (n * p(r, c));
    }
  });
}

Var cross_entropy_logits(Var logits, const std::vector<int>& labels, double smoothing) {
  Tape& tape = tape_of(logits);
  const Tensor& x = logits.value();
  check_labels("cross_entropy_logits", x, labels);
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ContractError("cross_entropy_logits: smoothing must be in [0, 1)");
  const Tensor lp = log_softmax_rows(x);
  const double k = static_cast<double>(x.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double target = (static_cast<int>(c) == labels[r] ? 1.0 - smoothing : 0.0) + smoothing / k;
      if (target != 0.0) loss -= target * lp(r, c);
    }
  }
  const double n = static_cast<double>(x.rows());
  const int ix = logits.id;
  return tape.record("cross_entropy_logits", Tensor::scalar(loss / n), {logits},
                     [ix, labels, n, smoothing, k](Tape& t, int self) {
                       const double g = t.grad(self)[0];
                       const Tensor p = softmax_rows(t.value(ix));
                       Tensor& d = t.grad(ix);
                       for (std::size_t r = 0; r < p.rows(); ++r) {
                         for (std::size_t c = 0; c < p.cols(); ++c) {
                           const double target =
                               (static_cast<int>(c) == labels[r] ? 1.0 - smoothing : 0.0) + smoothing / k;
                           d(r, c) += g * (p(r, c) - target) / n;
                         }
                       }
                     });
}

Var patch_affine(Var images, Var w, Var b, std::size_t height, std::size_t width, std::size_t channels,
                 std::size_t patch) {
  Tape& tape = tape_of(images, w);
  tape_of(images, b);
  const Tensor& iv = images.value();
  const Tensor& wv = w.value();
  if (patch == 0 || height % patch || width % patch) {
    throw ShapeError("patch_affine: patch size must divide the image");
  }
  if (iv.cols() != height * width * channels) {
    throw ShapeError("patch_affine: image rows have " + std::to_string(iv.cols()) + " values, expected " +
                     std::to_string(height * width * channels));
  }
  const std::size_t tile_len = patch * patch * channels;
  if (wv.rows() != tile_len) throw ShapeError(shapes("patch_affine(tiles, W)", Tensor({1, tile_len}), wv));
  if (b.value().rows() != 1 || b.value().cols() != wv.cols()) {
    throw ShapeError(shapes("patch_affine(W, b)", wv, b.value()));
  }
  const std::size_t tiles_y = height / patch, tiles_x = width / patch, tiles = tiles_y * tiles_x;
  const std::size_t batch = iv.rows();

  // Source offset for each element of each tile, shared by forward and backward.
  std::vector<std::size_t> src(tiles * tile_len);
  for (std::size_t ty = 0; ty < tiles_y; ++ty) {
    for (std::size_t tx = 0; tx < tiles_x; ++tx) {
      std::size_t* s = src.data() + (ty * tiles_x + tx) * tile_len;
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < patch; ++dy) {
        for (std::size_t dx = 0; dx < patch; ++dx) {
          for (std::size_t c = 0; c < channels; ++c) {
            s[k++] = ((ty * patch + dy) * width + (tx * patch + dx)) * channels + c;
          }
        }
      }
    }
  }
  auto gather = [batch, tiles, tile_len](const std::vector<std::size_t>& src, const Tensor& img) {
    Tensor m = Tensor::zeros(batch * tiles, tile_len);
    const std::size_t row_len = img.cols();
    for (std::size_t bi = 0; bi < batch; ++bi) {
      for (std::size_t i = 0; i < tiles * tile_len; ++i) m[bi * tiles * tile_len + i] = img[bi * row_len + src[i]];
    }
    return m;
  };
  const Tensor tile_matrix = gather(src, iv);
  const std::size_t out_dim = wv.cols();
  Tensor prod = Tensor::zeros(batch * tiles, out_dim);
  gemm_rows(tile_matrix.data(), wv.data(), prod.data(), batch * tiles, tile_len, out_dim);
  add_row_bias(prod, b.value());
  Tensor out({batch, tiles * out_dim}, std::move(prod.values()));

  const int ii = images.id, iw = w.id, ib = b.id;
  return tape.record("patch_affine", std::move(out), {images, w, b},
                     [ii, iw, ib, src, batch, tiles, tile_len, out_dim, gather](Tape& t, int self) {
                       const Tensor& g = t.grad(self);
                       const ConstMap gm(g.data(), static_cast<Eigen::Index>(batch * tiles),
                                         static_cast<Eigen::Index>(out_dim));
                       if (t.needs_grad(iw)) {
                         const Tensor tm = gather(src, t.value(ii));
                         as_matrix(t.grad(iw)).noalias() += as_matrix(tm).transpose() * gm;
                       }
                       if (t.needs_grad(ib)) as_matrix(t.grad(ib)).row(0) += gm.colwise().sum();
                       if (t.needs_grad(ii)) {
                         RowMatrix dt = gm * as_matrix(t.value(iw)).transpose();
                         Tensor& d = t.grad(ii);
                         const std::size_t row_len = d.cols();
                         for (std::size_t bi = 0; bi < batch; ++bi) {
                           for (std::size_t i = 0; i < tiles * tile_len; ++i) {
                             d[bi * row_len + src[i]] += dt.data()[bi * tiles * tile_len + i];
                           }
                         }
                       }
                     });
}

}  // namespace a3ps::nn
