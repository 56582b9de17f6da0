// Gradient criterion, built against the float64 copy of the NN sources.

#include <cstdio>
#include <string>

#include "acceptance.hpp"
#include "support/op_cases.hpp"

namespace campseg::acceptance {

Outcome gradient_oracle() {
  Outcome out{true, ""};
  std::size_t ops = 0, total = 0;
  double worst = 0.0;
  std::string worst_op;
  for (auto& c : testing::gradient_cases(7)) {
    const auto res = testing::grad_check(c.fn, c.inputs, 100, 11);
    ++ops;
    total += res.checked;
    if (res.checked < 100 || res.failed > 0) {
      out.pass = false;
      char buf[200];
      std::snprintf(buf, sizeof buf, "%s: %zu checked, %zu failed, worst %.2e at %s; ", c.name.c_str(), res.checked,
                    res.failed, res.worst, res.worst_where.c_str());
      out.detail += buf;
    }
    if (res.worst > worst) {
      worst = res.worst;
      worst_op = c.name;
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu ops, %zu sampled entries, worst relative error %.2e (%s)", ops, total, worst,
                worst_op.c_str());
  out.detail += buf;
  return out;
}

}  // namespace campseg::acceptance
