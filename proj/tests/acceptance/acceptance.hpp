#pragma once

#include <string>

namespace campseg::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome gradient_oracle();

}  // namespace campseg::acceptance
