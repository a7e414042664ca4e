#ifndef ROINET_OPTIM_HPP
#define ROINET_OPTIM_HPP

#include <vector>

#include "roinet/tensor.hpp"

namespace roinet {

// Classical momentum SGD: v <- m*v - lr*g, p <- p + v. Velocities are
// per-parameter and persist across steps; learning rate may change between
// calls (the schedule lives in the trainer).
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  double momentum() const { return momentum_; }

  // Applies one update to each parameter from its gradient. Parameter count
  // and shapes are pinned by the first call.
  void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
            double lr);

  void reset() { velocity_.clear(); }

 private:
  double momentum_;
  std::vector<Tensor> velocity_;
};

}  // namespace roinet

#endif  // ROINET_OPTIM_HPP
