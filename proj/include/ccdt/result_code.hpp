#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace ccdt {

/// Outcome of one rule on one message. The integer order is fixed: it is the
/// index into every probability vector the surrogate emits.
enum class ResultCode : std::uint8_t { info = 0, warning = 1, not_applied = 2, error = 3 };

inline constexpr std::size_t kNumCodes = 4;

inline constexpr std::array<ResultCode, kNumCodes> kAllCodes = {ResultCode::info, ResultCode::warning,
                                                                 ResultCode::not_applied, ResultCode::error};

constexpr std::size_t index_of(ResultCode c) noexcept { return static_cast<std::size_t>(c); }

constexpr ResultCode code_at(std::size_t i) noexcept { return static_cast<ResultCode>(i); }

std::string_view to_string(ResultCode c) noexcept;

/// Parses "info" | "warning" | "not_applied" | "error". Throws FormatError.
ResultCode parse_result_code(std::string_view text);

}  // namespace ccdt
