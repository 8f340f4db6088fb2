#pragma once

#include <functional>
#include <string>

namespace emd {

using WarningHandler = std::function<void(const std::string&)>;

// Receives library warnings. The default handler writes to stderr.
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace emd
