#pragma once

#include "specflow/operator.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace specflow {

/// Text form of a framed operator:
///   {"n": 2, "real_parts": [...], "imag_parts": [...], "essential_points": [...]}
/// Matrices are row-major; every value is printed with 17 significant digits
/// so the text round-trips bit-exactly.
std::string to_text(const FramedOperator& a);
FramedOperator operator_from_text(std::string_view text);

void write_operator(const std::filesystem::path& path, const FramedOperator& a);
FramedOperator read_operator(const std::filesystem::path& path);

/// Formats a double with 17 significant digits in scientific notation.
std::string format_real(double x);

}  // namespace specflow
