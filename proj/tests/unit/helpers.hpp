#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fetomo/ladder.hpp"

// Captures library warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningCapture() {
    fetomo::set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { fetomo::set_warning_handler(nullptr); }
};

inline double max_abs(const fetomo::CMatrix& m) { return m.cwiseAbs().maxCoeff(); }
