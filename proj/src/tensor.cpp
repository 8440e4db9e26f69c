#include "hvis/tensor.hpp"

namespace hvis::ad {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = prev_; }

EvalScope::EvalScope() : prev_(g_active_tape) { g_active_tape = nullptr; }

EvalScope::~EvalScope() { g_active_tape = prev_; }

void Tape::backward(const TensorPtr& loss, bool clear_after) {
    if (!loss->is_scalar()) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss->shape));
    }
    if (nodes_.empty()) {
        throw ContractError("backward on an empty tape: no operations were recorded");
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    if (clear_after) clear();
}

}  // namespace hvis::ad
