#include "hvis/ops.hpp"

#include <cmath>
#include <cstddef>

namespace hvis::ad {

namespace {

// Registers a backward rule when recording is active and any input needs a
// gradient. Marks the output as gradient-carrying so downstream ops chain.
void record_op(const std::vector<TensorPtr>& inputs, const TensorPtr& out, std::function<void()> backward) {
    Tape* tape = active_tape();
    if (!tape) return;
    bool any = false;
    for (const auto& in : inputs) any = any || in->requires_grad;
    if (!any) return;
    out->requires_grad = true;
    out->ensure_grad();
    tape->record(std::move(backward));
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->shape != b->shape) {
        throw DimensionError(std::string(op) + ": shapes disagree: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
}

void check_rank2(const TensorPtr& x, const char* op) {
    if (x->rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(x->shape));
}

// C[m x n] += A[m x k] * B[k x n]
void mm_accum(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x k] += A[m x n] * B^T, where B is [k x n]
void mm_nt_accum(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * n;
        double* crow = c + static_cast<std::size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const double* brow = b + static_cast<std::size_t>(l) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[l] += acc;
        }
    }
}

// C[k x n] += A^T * B, where A is [m x k], B is [m x n]
void mm_tn_accum(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        const double* brow = b + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "add");
    auto out = make_tensor(a->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] + b->values[i];
    record_op({a, b}, out, [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < out->numel(); ++i) b->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "sub");
    auto out = make_tensor(a->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] - b->values[i];
    record_op({a, b}, out, [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < out->numel(); ++i) b->grad[i] -= out->grad[i];
        }
    });
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "mul");
    auto out = make_tensor(a->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] * b->values[i];
    record_op({a, b}, out, [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < out->numel(); ++i) a->grad[i] += out->grad[i] * b->values[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < out->numel(); ++i) b->grad[i] += out->grad[i] * a->values[i];
        }
    });
    return out;
}

TensorPtr scale(const TensorPtr& x, double c) {
    auto out = make_tensor(x->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = c * x->values[i];
    record_op({x}, out, [x, out, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < out->numel(); ++i) x->grad[i] += c * out->grad[i];
    });
    return out;
}

TensorPtr neg(const TensorPtr& x) { return scale(x, -1.0); }

TensorPtr tanh(const TensorPtr& x) {
    auto out = make_tensor(x->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = std::tanh(x->values[i]);
    record_op({x}, out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < out->numel(); ++i) {
            const double y = out->values[i];
            x->grad[i] += out->grad[i] * (1.0 - y * y);
        }
    });
    return out;
}

TensorPtr sigmoid(const TensorPtr& x) {
    auto out = make_tensor(x->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = 1.0 / (1.0 + std::exp(-x->values[i]));
    record_op({x}, out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < out->numel(); ++i) {
            const double y = out->values[i];
            x->grad[i] += out->grad[i] * y * (1.0 - y);
        }
    });
    return out;
}

TensorPtr relu(const TensorPtr& x) {
    auto out = make_tensor(x->shape);
    for (int i = 0; i < out->numel(); ++i) out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
    record_op({x}, out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < out->numel(); ++i) {
            if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr dropout(const TensorPtr& x, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ParameterError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    }
    if (!train || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    const double inv = 1.0 / keep;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto mask = std::make_shared<std::vector<double>>(x->values.size());
    auto out = make_tensor(x->shape);
    for (int i = 0; i < out->numel(); ++i) {
        const double m = uni(rng) < keep ? inv : 0.0;
        (*mask)[i] = m;
        out->values[i] = x->values[i] * m;
    }
    record_op({x}, out, [x, out, mask] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < out->numel(); ++i) x->grad[i] += out->grad[i] * (*mask)[i];
    });
    return out;
}

TensorPtr sum(const TensorPtr& x) {
    auto out = make_tensor({1});
    double acc = 0.0;
    for (double v : x->values) acc += v;
    out->values[0] = acc;
    record_op({x}, out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const double g = out->grad[0];
        for (int i = 0; i < x->numel(); ++i) x->grad[i] += g;
    });
    return out;
}

TensorPtr mean(const TensorPtr& x) {
    const int n = x->numel();
    auto out = make_tensor({1});
    double acc = 0.0;
    for (double v : x->values) acc += v;
    out->values[0] = acc / n;
    record_op({x}, out, [x, out, n] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const double g = out->grad[0] / n;
        for (int i = 0; i < n; ++i) x->grad[i] += g;
    });
    return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    if (a->shape[1] != b->shape[0]) {
        throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
    const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = make_tensor({m, n});
    mm_accum(a->values.data(), b->values.data(), out->values.data(), m, k, n);
    record_op({a, b}, out, [a, b, out, m, k, n] {
        if (a->requires_grad) {
            a->ensure_grad();
            mm_nt_accum(out->grad.data(), b->values.data(), a->grad.data(), m, n, k);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            mm_tn_accum(a->values.data(), out->grad.data(), b->grad.data(), m, k, n);
        }
    });
    return out;
}

TensorPtr matvec(const TensorPtr& w, const TensorPtr& x) {
    check_rank2(w, "matvec");
    if (x->rank() != 1) throw DimensionError("matvec: expected rank-1 vector, got " + shape_str(x->shape));
    if (w->shape[1] != x->shape[0]) {
        throw DimensionError("matvec: inner dimensions disagree: " + shape_str(w->shape) + " vs " + shape_str(x->shape));
    }
    const int m = w->shape[0], k = w->shape[1];
    auto out = make_tensor({m});
    for (int i = 0; i < m; ++i) {
        const double* row = w->values.data() + static_cast<std::size_t>(i) * k;
        double acc = 0.0;
        for (int l = 0; l < k; ++l) acc += row[l] * x->values[l];
        out->values[i] = acc;
    }
    record_op({w, x}, out, [w, x, out, m, k] {
        if (w->requires_grad) {
            w->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double g = out->grad[i];
                if (g == 0.0) continue;
                double* row = w->grad.data() + static_cast<std::size_t>(i) * k;
                for (int l = 0; l < k; ++l) row[l] += g * x->values[l];
            }
        }
        if (x->requires_grad) {
            x->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double g = out->grad[i];
                if (g == 0.0) continue;
                const double* row = w->values.data() + static_cast<std::size_t>(i) * k;
                for (int l = 0; l < k; ++l) x->grad[l] += g * row[l];
            }
        }
    });
    return out;
}

TensorPtr transpose(const TensorPtr& x) {
    check_rank2(x, "transpose");
    const int r = x->shape[0], c = x->shape[1];
    auto out = make_tensor({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->values[static_cast<std::size_t>(j) * r + i] = x->at(i, j);
    record_op({x}, out, [x, out, r, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) x->grad[static_cast<std::size_t>(i) * c + j] += out->grad[static_cast<std::size_t>(j) * r + i];
    });
    return out;
}

TensorPtr add_bias_cols(const TensorPtr& x, const TensorPtr& b) {
    check_rank2(x, "add_bias_cols");
    if (b->rank() != 1 || b->shape[0] != x->shape[0]) {
        throw DimensionError("add_bias_cols: bias " + shape_str(b->shape) + " does not match rows of " + shape_str(x->shape));
    }
    const int r = x->shape[0], c = x->shape[1];
    auto out = make_tensor({r, c});
    for (int i = 0; i < r; ++i) {
        const double bi = b->values[i];
        for (int j = 0; j < c; ++j) out->at(i, j) = x->at(i, j) + bi;
    }
    record_op({x, b}, out, [x, b, out, r, c] {
        if (x->requires_grad) {
            x->ensure_grad();
            for (int i = 0; i < r * c; ++i) x->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < r; ++i) {
                double acc = 0.0;
                for (int j = 0; j < c; ++j) acc += out->grad[static_cast<std::size_t>(i) * c + j];
                b->grad[i] += acc;
            }
        }
    });
    return out;
}

TensorPtr reshape(const TensorPtr& x, Shape shape) {
    if (shape_numel(shape) != x->numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(shape));
    }
    auto out = make_tensor(std::move(shape));
    out->values = x->values;
    record_op({x}, out, [x, out] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr concat_vec(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw ContractError("concat_vec: no parts given");
    int total = 0;
    for (const auto& p : parts) {
        if (p->rank() != 1) throw DimensionError("concat_vec: expected rank-1 parts, got " + shape_str(p->shape));
        total += p->numel();
    }
    auto out = make_tensor({total});
    int off = 0;
    for (const auto& p : parts) {
        std::copy(p->values.begin(), p->values.end(), out->values.begin() + off);
        off += p->numel();
    }
    record_op(parts, out, [parts, out] {
        int o = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (int i = 0; i < p->numel(); ++i) p->grad[i] += out->grad[o + i];
            }
            o += p->numel();
        }
    });
    return out;
}

TensorPtr stack_cols(const std::vector<TensorPtr>& cols) {
    if (cols.empty()) throw ContractError("stack_cols: no columns given");
    const int r = cols[0]->numel();
    for (const auto& c : cols) {
        if (c->rank() != 1 || c->numel() != r) {
            throw DimensionError("stack_cols: all columns must be rank-1 of equal length");
        }
    }
    const int b = static_cast<int>(cols.size());
    auto out = make_tensor({r, b});
    for (int j = 0; j < b; ++j)
        for (int i = 0; i < r; ++i) out->at(i, j) = cols[j]->values[i];
    record_op(cols, out, [cols, out, r, b] {
        for (int j = 0; j < b; ++j) {
            const auto& c = cols[j];
            if (!c->requires_grad) continue;
            c->ensure_grad();
            for (int i = 0; i < r; ++i) c->grad[i] += out->grad[static_cast<std::size_t>(i) * b + j];
        }
    });
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts given");
    const int r = parts[0]->rows();
    int total = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_cols");
        if (p->shape[0] != r) throw DimensionError("concat_cols: row counts disagree");
        total += p->shape[1];
    }
    auto out = make_tensor({r, total});
    int off = 0;
    for (const auto& p : parts) {
        const int pc = p->shape[1];
        for (int i = 0; i < r; ++i)
            std::copy(p->values.begin() + static_cast<std::size_t>(i) * pc,
                      p->values.begin() + static_cast<std::size_t>(i) * pc + pc,
                      out->values.begin() + static_cast<std::size_t>(i) * total + off);
        off += pc;
    }
    record_op(parts, out, [parts, out, r, total] {
        int o = 0;
        for (const auto& p : parts) {
            const int pc = p->shape[1];
            if (p->requires_grad) {
                p->ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < pc; ++j)
                        p->grad[static_cast<std::size_t>(i) * pc + j] += out->grad[static_cast<std::size_t>(i) * total + o + j];
            }
            o += pc;
        }
    });
    return out;
}

TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b) {
    check_rank2(a, "concat_rows");
    check_rank2(b, "concat_rows");
    if (a->shape[1] != b->shape[1]) {
        throw DimensionError("concat_rows: column counts disagree: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
    const int c = a->shape[1];
    auto out = make_tensor({a->shape[0] + b->shape[0], c});
    std::copy(a->values.begin(), a->values.end(), out->values.begin());
    std::copy(b->values.begin(), b->values.end(), out->values.begin() + a->numel());
    record_op({a, b}, out, [a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            const int off = a->numel();
            for (int i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[off + i];
        }
    });
    return out;
}

TensorPtr slice_cols(const TensorPtr& x, int start, int len) {
    check_rank2(x, "slice_cols");
    if (start < 0 || len <= 0 || start + len > x->shape[1]) {
        throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                             ") outside " + shape_str(x->shape));
    }
    const int r = x->shape[0], c = x->shape[1];
    auto out = make_tensor({r, len});
    for (int i = 0; i < r; ++i)
        std::copy(x->values.begin() + static_cast<std::size_t>(i) * c + start,
                  x->values.begin() + static_cast<std::size_t>(i) * c + start + len,
                  out->values.begin() + static_cast<std::size_t>(i) * len);
    record_op({x}, out, [x, out, start, len, r, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < len; ++j)
                x->grad[static_cast<std::size_t>(i) * c + start + j] += out->grad[static_cast<std::size_t>(i) * len + j];
    });
    return out;
}

TensorPtr slice_rows(const TensorPtr& x, int start, int len) {
    check_rank2(x, "slice_rows");
    if (start < 0 || len <= 0 || start + len > x->shape[0]) {
        throw DimensionError("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                             ") outside " + shape_str(x->shape));
    }
    const int c = x->shape[1];
    auto out = make_tensor({len, c});
    std::copy(x->values.begin() + static_cast<std::size_t>(start) * c,
              x->values.begin() + static_cast<std::size_t>(start + len) * c, out->values.begin());
    record_op({x}, out, [x, out, start, len, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < len * c; ++i) x->grad[static_cast<std::size_t>(start) * c + i] += out->grad[i];
    });
    return out;
}

TensorPtr gather_cols(const TensorPtr& x, const std::vector<int>& idx) {
    check_rank2(x, "gather_cols");
    const int r = x->shape[0], c = x->shape[1];
    for (int j : idx) {
        if (j < 0 || j >= c) throw DimensionError("gather_cols: column " + std::to_string(j) + " outside " + shape_str(x->shape));
    }
    const int n = static_cast<int>(idx.size());
    auto out = make_tensor({r, n});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = x->at(i, idx[j]);
    record_op({x}, out, [x, out, idx, r, n, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < n; ++j)
                x->grad[static_cast<std::size_t>(i) * c + idx[j]] += out->grad[static_cast<std::size_t>(i) * n + j];
    });
    return out;
}

TensorPtr column(const TensorPtr& x, int j) {
    check_rank2(x, "column");
    if (j < 0 || j >= x->shape[1]) throw DimensionError("column: index " + std::to_string(j) + " outside " + shape_str(x->shape));
    const int r = x->shape[0], c = x->shape[1];
    auto out = make_tensor({r});
    for (int i = 0; i < r; ++i) out->values[i] = x->at(i, j);
    record_op({x}, out, [x, out, j, r, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < r; ++i) x->grad[static_cast<std::size_t>(i) * c + j] += out->grad[i];
    });
    return out;
}

TensorPtr repeat_rows_each(const TensorPtr& x, int times) {
    check_rank2(x, "repeat_rows_each");
    if (times <= 0) throw ParameterError("repeat_rows_each: times must be positive");
    const int r = x->shape[0], c = x->shape[1];
    auto out = make_tensor({r * times, c});
    for (int i = 0; i < r; ++i)
        for (int s = 0; s < times; ++s)
            std::copy(x->values.begin() + static_cast<std::size_t>(i) * c,
                      x->values.begin() + static_cast<std::size_t>(i) * c + c,
                      out->values.begin() + (static_cast<std::size_t>(i) * times + s) * c);
    record_op({x}, out, [x, out, times, r, c] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int s = 0; s < times; ++s)
                for (int j = 0; j < c; ++j)
                    x->grad[static_cast<std::size_t>(i) * c + j] += out->grad[(static_cast<std::size_t>(i) * times + s) * c + j];
    });
    return out;
}

namespace {

void check_conv_args(const TensorPtr& x, const TensorPtr& kernel, int dilation, int seg_len) {
    check_rank2(x, "conv1d_causal");
    if (kernel->rank() != 3) {
        throw DimensionError("conv1d_causal: kernel must be [out x in x k], got " + shape_str(kernel->shape));
    }
    if (kernel->shape[1] != x->shape[0]) {
        throw DimensionError("conv1d_causal: kernel input channels " + std::to_string(kernel->shape[1]) +
                             " do not match input rows " + std::to_string(x->shape[0]));
    }
    if (dilation < 1) throw ParameterError("conv1d_causal: dilation must be >= 1, got " + std::to_string(dilation));
    if (seg_len <= 0 || x->shape[1] % seg_len != 0) {
        throw DimensionError("conv1d_causal: width " + std::to_string(x->shape[1]) +
                             " is not a multiple of segment length " + std::to_string(seg_len));
    }
}

}  // namespace

TensorPtr conv1d_causal_seg(const TensorPtr& x, const TensorPtr& kernel, int dilation, int seg_len) {
    check_conv_args(x, kernel, dilation, seg_len);
    const int cin = x->shape[0];
    const int width = x->shape[1];
    const int segments = width / seg_len;
    const int cout = kernel->shape[0];
    const int k = kernel->shape[2];
    auto out = make_tensor({cout, width});

    const double* xv = x->values.data();
    const double* kv = kernel->values.data();
    double* ov = out->values.data();
    for (int o = 0; o < cout; ++o) {
        double* orow = ov + static_cast<std::size_t>(o) * width;
        for (int c = 0; c < cin; ++c) {
            const double* xrow = xv + static_cast<std::size_t>(c) * width;
            const double* krow = kv + (static_cast<std::size_t>(o) * cin + c) * k;
            for (int j = 0; j < k; ++j) {
                const double w = krow[j];
                if (w == 0.0) continue;
                const int off = (k - 1 - j) * dilation;
                for (int s = 0; s < segments; ++s) {
                    const int base = s * seg_len;
                    for (int t = off; t < seg_len; ++t) orow[base + t] += w * xrow[base + t - off];
                }
            }
        }
    }

    record_op({x, kernel}, out, [x, kernel, out, dilation, seg_len, cin, width, segments, cout, k] {
        const double* gv = out->grad.data();
        if (x->requires_grad) {
            x->ensure_grad();
            double* xg = x->grad.data();
            const double* kv = kernel->values.data();
            for (int o = 0; o < cout; ++o) {
                const double* grow = gv + static_cast<std::size_t>(o) * width;
                for (int c = 0; c < cin; ++c) {
                    double* xrow = xg + static_cast<std::size_t>(c) * width;
                    const double* krow = kv + (static_cast<std::size_t>(o) * cin + c) * k;
                    for (int j = 0; j < k; ++j) {
                        const double w = krow[j];
                        if (w == 0.0) continue;
                        const int off = (k - 1 - j) * dilation;
                        for (int s = 0; s < segments; ++s) {
                            const int base = s * seg_len;
                            for (int t = off; t < seg_len; ++t) xrow[base + t - off] += w * grow[base + t];
                        }
                    }
                }
            }
        }
        if (kernel->requires_grad) {
            kernel->ensure_grad();
            double* kg = kernel->grad.data();
            const double* xv = x->values.data();
            for (int o = 0; o < cout; ++o) {
                const double* grow = gv + static_cast<std::size_t>(o) * width;
                for (int c = 0; c < cin; ++c) {
                    const double* xrow = xv + static_cast<std::size_t>(c) * width;
                    double* krow = kg + (static_cast<std::size_t>(o) * cin + c) * k;
                    for (int j = 0; j < k; ++j) {
                        const int off = (k - 1 - j) * dilation;
                        double acc = 0.0;
                        for (int s = 0; s < segments; ++s) {
                            const int base = s * seg_len;
                            for (int t = off; t < seg_len; ++t) acc += grow[base + t] * xrow[base + t - off];
                        }
                        krow[j] += acc;
                    }
                }
            }
        }
    });
    return out;
}

TensorPtr conv1d_causal(const TensorPtr& x, const TensorPtr& kernel, int dilation) {
    check_rank2(x, "conv1d_causal");
    return conv1d_causal_seg(x, kernel, dilation, x->shape[1]);
}

namespace {

void check_gru_shapes(const TensorPtr& x, const TensorPtr& h, const GruParams& p) {
    const TensorPtr mats[] = {p.wz, p.uz, p.wr, p.ur, p.wc, p.uc};
    for (const auto& m : mats) {
        if (!m || m->rank() != 2) throw DimensionError("gru_cell: gate matrices must be rank-2");
    }
    const int in = x->shape[0];
    const int hid = h->shape[0];
    if (p.wz->shape[0] != hid || p.wz->shape[1] != in || p.uz->shape[0] != hid || p.uz->shape[1] != hid) {
        throw DimensionError("gru_cell: gate shapes do not match input " + shape_str(x->shape) + " and state " + shape_str(h->shape));
    }
}

}  // namespace

TensorPtr gru_cell(const TensorPtr& x, const TensorPtr& h, const GruParams& p) {
    if (x->rank() == 1 && h->rank() == 1) {
        auto xb = reshape(x, {x->shape[0], 1});
        auto hb = reshape(h, {h->shape[0], 1});
        return reshape(gru_cell(xb, hb, p), {h->shape[0]});
    }
    check_rank2(x, "gru_cell");
    check_rank2(h, "gru_cell");
    if (x->shape[1] != h->shape[1]) {
        throw DimensionError("gru_cell: batch sizes disagree: " + shape_str(x->shape) + " vs " + shape_str(h->shape));
    }
    check_gru_shapes(x, h, p);
    auto z = sigmoid(add_bias_cols(add(matmul(p.wz, x), matmul(p.uz, h)), p.bz));
    auto r = sigmoid(add_bias_cols(add(matmul(p.wr, x), matmul(p.ur, h)), p.br));
    auto cand = tanh(add_bias_cols(add(matmul(p.wc, x), matmul(p.uc, mul(r, h))), p.bc));
    return add(h, mul(z, sub(cand, h)));
}

void clip_values(const TensorPtr& t, double c) {
    if (c <= 0.0) throw ParameterError("clip_values: bound must be positive, got " + std::to_string(c));
    for (double& v : t->values) v = std::clamp(v, -c, c);
}

}  // namespace hvis::ad
