#include "emd/common/log.hpp"

#include <iostream>
#include <mutex>

namespace emd {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return h;
}

}  // namespace

void set_warning_handler(WarningHandler h) {
  std::lock_guard<std::mutex> lock(handler_mutex());
  handler() = h ? std::move(h) : [](const std::string&) {};
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(handler_mutex());
  handler()(message);
}

}  // namespace emd
