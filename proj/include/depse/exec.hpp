#pragma once

#include <string_view>

namespace depse {

/// Selects the serial reference kernels or their OpenMP counterparts. Both
/// produce bit-identical results; the serial path is kept for testing.
enum class ExecPolicy { serial, parallel };

ExecPolicy parse_exec_policy(std::string_view name);
std::string_view to_string(ExecPolicy policy);

}  // namespace depse
