#ifndef ROINET_AUTODIFF_HPP
#define ROINET_AUTODIFF_HPP

#include <functional>
#include <string>
#include <vector>

#include "roinet/errors.hpp"
#include "roinet/tensor.hpp"

namespace roinet {

class Tape;

// Lightweight handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run record of a forward computation. One tape serves one
// forward/backward pass and is confined to a single thread; gradients of
// fan-out values accumulate additively.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf honoring the tensor's own requires_grad flag.
  Var leaf(Tensor value) {
    const bool rg = value.requires_grad();
    return leaf(std::move(value), rg);
  }

  Var leaf(Tensor value, bool requires_grad) {
    slots_.push_back(SlotRec{std::move(value), Tensor(), requires_grad, false});
    return Var{this, static_cast<int>(slots_.size()) - 1};
  }

  // Trainable leaf (copies the parameter tensor in).
  Var param(const Tensor& value) { return leaf(value, true); }

  const Tensor& value(Var v) const { return slot(v).value; }

  // Gradient of the last backward() target w.r.t. v. Zero tensor if the loss
  // never touched v.
  const Tensor& grad(Var v) {
    SlotRec& s = slot(v);
    if (!s.requires_grad)
      throw ContractError("grad() queried on a value that does not require gradients");
    return grad_buffer(v);
  }

  // Reverse pass from a scalar loss. Populates gradients for every
  // requires_grad slot reachable from it; re-running resets prior gradients.
  void backward(Var loss_var);

  // --- op-recording interface -------------------------------------------

  bool needs_grad(std::initializer_list<Var> inputs) const {
    for (Var v : inputs)
      if (slot(v).requires_grad) return true;
    return false;
  }

  // Records a forward result. `bw` runs during backward() with the output
  // handle and must add its contributions into grad_buffer() of the node
  // inputs. When no input requires gradients the rule is dropped and the
  // output is a dead end.
  Var emit(const char* op_name, Tensor value, std::initializer_list<Var> inputs,
           std::function<void(Tape&, Var)> bw) {
    if (!value.all_finite())
      throw NumericError(std::string("non-finite value produced by ") + op_name);
    bool rg = needs_grad(inputs);
    Var out = leaf(std::move(value), rg);
    if (rg) nodes_.push_back(NodeRec{out.id, std::move(bw)});
    return out;
  }

  // Accumulation buffer for v's gradient (zeroed on first use per pass).
  Tensor& grad_buffer(Var v) {
    SlotRec& s = slot(v);
    if (!s.grad_alloc) {
      if (s.grad.numel() != s.value.numel()) s.grad = Tensor(s.value.shape());
      s.grad_alloc = true;
    }
    return s.grad;
  }

  bool requires_grad(Var v) const { return slot(v).requires_grad; }
  bool grad_ready(Var v) const { return slot(v).grad_alloc; }
  std::size_t size() const { return slots_.size(); }

  void check_same_tape(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(slots_.size()))
      throw LookupError("variable does not belong to this tape");
  }

 private:
  struct SlotRec {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
  };
  struct NodeRec {
    int out;
    std::function<void(Tape&, Var)> bw;
  };

  SlotRec& slot(Var v) {
    check_same_tape(v);
    return slots_[static_cast<std::size_t>(v.id)];
  }
  const SlotRec& slot(Var v) const {
    check_same_tape(v);
    return slots_[static_cast<std::size_t>(v.id)];
  }

  std::vector<SlotRec> slots_;
  std::vector<NodeRec> nodes_;
};

}  // namespace roinet

#endif  // ROINET_AUTODIFF_HPP
