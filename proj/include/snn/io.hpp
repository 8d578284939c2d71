#pragma once

#include <string>

#include "snn/tensor.hpp"

namespace snn {

/// Shortest decimal string that parses back to exactly the same value
/// (std::to_chars round-trip form). All file formats use this so that
/// save -> load -> save is byte-identical.
std::string format_real(real v);

/// Locale-independent parse; throws naming `context` on garbage.
real parse_real(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

/// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace snn
