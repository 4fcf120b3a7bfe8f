#pragma once

#include <string>

namespace supgauss {

/// Shortest decimal string that parses back to exactly `value`.
/// Infinities are written as "inf"/"-inf" and NaN as "nan".
std::string format_double(double value);

/// Parses the output of format_double (and ordinary decimal input).
double parse_double(const std::string& text);

}  // namespace supgauss
