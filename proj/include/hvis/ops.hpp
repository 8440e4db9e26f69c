#pragma once

#include <vector>

#include "hvis/tensor.hpp"

namespace hvis::ad {

// Elementwise arithmetic. Shapes must match exactly.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);
TensorPtr neg(const TensorPtr& x);

// Elementwise nonlinearities.
TensorPtr tanh(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr relu(const TensorPtr& x);

// Inverted dropout: at train time keeps each value with probability 1-rate
// and rescales by 1/(1-rate); identity in eval mode. rate must be in [0,1).
TensorPtr dropout(const TensorPtr& x, double rate, bool train, Rng& rng);

// Full reductions to a scalar tensor of shape [1].
TensorPtr sum(const TensorPtr& x);
TensorPtr mean(const TensorPtr& x);

// Rank-2 linear algebra.
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);   // [m x k]*[k x n]
TensorPtr matvec(const TensorPtr& w, const TensorPtr& x);   // [m x k]*[k]
TensorPtr transpose(const TensorPtr& x);

// Adds bias b [R] to every column of x [R x C].
TensorPtr add_bias_cols(const TensorPtr& x, const TensorPtr& b);

// Layout ops (copying views with exact gradient routing).
TensorPtr reshape(const TensorPtr& x, Shape shape);
TensorPtr concat_vec(const std::vector<TensorPtr>& parts);            // rank-1 pieces
TensorPtr stack_cols(const std::vector<TensorPtr>& cols);             // B x [R] -> [R x B]
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);           // [R x Ci] -> [R x sum(Ci)]
TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b);        // [R1 x C],[R2 x C] -> [(R1+R2) x C]
TensorPtr slice_cols(const TensorPtr& x, int start, int len);
TensorPtr slice_rows(const TensorPtr& x, int start, int len);
TensorPtr gather_cols(const TensorPtr& x, const std::vector<int>& idx);
TensorPtr column(const TensorPtr& x, int j);                          // [R x C] -> [R]
// Repeats every row of x `times` times consecutively: out[i*times+s] = x[i].
TensorPtr repeat_rows_each(const TensorPtr& x, int times);

// Causal dilated 1-D convolution over the last axis. x is [Cin x T], kernel
// is [Cout x Cin x K]; the output at time t taps x[t], x[t-d], ...,
// x[t-(K-1)d] with zero padding left of t=0, so no future frame leaks in.
TensorPtr conv1d_causal(const TensorPtr& x, const TensorPtr& kernel, int dilation);
// Same, treating the columns of x as B back-to-back segments of seg_len
// frames; each segment is padded and convolved independently.
TensorPtr conv1d_causal_seg(const TensorPtr& x, const TensorPtr& kernel, int dilation, int seg_len);

// Gated recurrent unit cell. w* are [H x In], u* are [H x H], b* are [H].
struct GruParams {
    TensorPtr wz, uz, bz;
    TensorPtr wr, ur, br;
    TensorPtr wc, uc, bc;
};

// x [In] with h [H], or batched x [In x B] with h [H x B].
// h' = h + z * (candidate - h), so a saturated update gate hands the state
// over to the candidate entirely.
TensorPtr gru_cell(const TensorPtr& x, const TensorPtr& h, const GruParams& p);

// In-place clamp of values to [-c, c]. Not recorded on the tape; meant for
// post-step weight clipping.
void clip_values(const TensorPtr& t, double c);

}  // namespace hvis::ad
