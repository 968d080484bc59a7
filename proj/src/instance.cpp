#include "pnpkit/instance.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace pnpkit {

ProblemInstance normalize_focal(const ProblemInstance& inst, double f_const) {
  if (!(inst.intrinsics.f > 0.0)) throw NonPositiveFocal(inst.intrinsics.f);
  if (!(f_const > 0.0)) throw NonPositiveFocal(f_const);
  ProblemInstance out = inst;
  const double scale = f_const / inst.intrinsics.f;
  for (auto& c : out.corrs) c.b *= scale;
  out.intrinsics.f = f_const;
  return out;
}

ProblemInstance sort_correspondences(const ProblemInstance& inst) {
  if (inst.outlier_mask && static_cast<int>(inst.outlier_mask->size()) != inst.n())
    throw ShapeMismatch("outlier mask length does not match correspondence count");

  std::vector<int> order(inst.corrs.size());
  std::iota(order.begin(), order.end(), 0);
  const auto key = [&](int i) {
    const auto& c = inst.corrs[i];
    return std::make_tuple(c.b.x(), c.b.y(), c.a.x(), c.a.y(), c.a.z());
  };
  std::sort(order.begin(), order.end(), [&](int i, int j) { return key(i) < key(j); });

  ProblemInstance out = inst;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.corrs[i] = inst.corrs[order[i]];
    if (inst.outlier_mask) (*out.outlier_mask)[i] = (*inst.outlier_mask)[order[i]];
  }
  return out;
}

ProblemInstance preprocess(const ProblemInstance& inst, double f_const) {
  return sort_correspondences(normalize_focal(inst, f_const));
}

}  // namespace pnpkit
