#pragma once

#include <string>
#include <vector>

namespace hqao {

/// Shortest round-trip text for a double (17 significant digits).
std::string csv_double(double x);

/// Comma-joined fields terminated by a newline. Fields are written verbatim.
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace hqao
