#pragma once

#include <vector>

#include "a3ps/nn/tape.hpp"

namespace a3ps::nn {

// Binary elementwise ops broadcast b over a when b is 1xN, Bx1 or 1x1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var minimum(Var a, Var b);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var one_minus(Var a);
Var square(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
// Arguments are clamped to [-80, 80] before exponentiation.
Var exp(Var a);
// Strictly positive inputs only.
Var log(Var a);
Var clamp(Var a, double lo, double hi);

Var matmul(Var a, Var b);
// x (B x in) * w (in x out) + b (1 x out).
Var affine(Var x, Var w, Var b);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t len);

Var sum(Var a);
Var mean(Var a);
Var sum_cols(Var a);  // B x N -> B x 1
Var gather_cols(Var a, const std::vector<int>& index);  // picks a(i, index[i])

// Rows of table selected by indices (B x d).
Var embed(Var table, const std::vector<int>& indices);

// Row-wise, max-subtracted.
Var softmax(Var logits);
Var log_softmax(Var logits);
// Mean over rows of -log p(label) given probabilities.
Var cross_entropy(Var probabilities, const std::vector<int>& labels);
// Fused log-softmax + negative log likelihood, mean over rows.
// smoothing spreads that much target mass uniformly over all classes.
Var cross_entropy_logits(Var logits, const std::vector<int>& labels, double smoothing = 0.0);

// Shared affine map applied to non-overlapping patch x patch tiles of an
// image stored as (height x width x channels) per row, followed by nothing;
// output is (B x tiles * out) with tiles in row-major order.
Var patch_affine(Var images, Var w, Var b, std::size_t height, std::size_t width, std::size_t channels,
                 std::size_t patch);

}  // namespace a3ps::nn
