#include "roinet/autodiff.hpp"

#include <algorithm>

namespace roinet {

void Tape::backward(Var loss_var) {
  check_same_tape(loss_var);
  const SlotRec& loss = slots_[static_cast<std::size_t>(loss_var.id)];
  if (loss.value.numel() != 1)
    throw ContractError("backward() target must be scalar, got " +
                        shape_str(loss.value.shape()));

  for (SlotRec& s : slots_) {
    if (s.grad_alloc) {
      std::fill(s.grad.raw().begin(), s.grad.raw().end(), 0.0);
      s.grad_alloc = false;
    }
  }

  grad_buffer(loss_var)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const SlotRec& out = slots_[static_cast<std::size_t>(it->out)];
    // A node whose output never received a gradient contributes zeros.
    if (!out.grad_alloc) continue;
    it->bw(*this, Var{this, it->out});
  }

  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const SlotRec& s = slots_[i];
    if (s.grad_alloc && !s.grad.all_finite())
      throw NumericError("non-finite gradient for tape slot " + std::to_string(i));
  }
}

}  // namespace roinet
