#include "gemr/sample.hpp"

#include <stdexcept>

namespace gemr {

std::string_view label_name(Label label) {
  switch (label) {
    case Label::Negative: return "Negative";
    case Label::Neutral: return "Neutral";
    case Label::Positive: return "Positive";
  }
  return "?";
}

Label label_from_index(long long index) {
  if (index < 0 || index >= static_cast<long long>(kNumClasses)) {
    throw std::invalid_argument("label " + std::to_string(index) + " out of range {0,1,2}");
  }
  return static_cast<Label>(index);
}

}  // namespace gemr
