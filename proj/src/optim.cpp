#include "roinet/optim.hpp"

#include "roinet/errors.hpp"

namespace roinet {

void SgdMomentum::step(std::vector<Tensor*>& params,
                       const std::vector<const Tensor*>& grads, double lr) {
  if (params.size() != grads.size())
    throw ContractError("optimizer got " + std::to_string(grads.size()) +
                        " gradients for " + std::to_string(params.size()) +
                        " parameters");
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const Tensor* p : params) velocity_.emplace_back(p->shape());
  }
  if (velocity_.size() != params.size())
    throw ContractError("parameter count changed between optimizer steps");

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& v = velocity_[i];
    if (!p.same_shape(v) || !p.same_shape(g))
      throw DimensionError("optimizer shape mismatch at parameter " + std::to_string(i));
    if (!g.all_finite())
      throw NumericError("non-finite gradient reached the optimizer");
    for (long long k = 0; k < p.numel(); ++k) {
      v[k] = momentum_ * v[k] - lr * g[k];
      p[k] += v[k];
    }
  }
}

}  // namespace roinet
