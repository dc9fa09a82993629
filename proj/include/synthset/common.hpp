#pragma once

#include "synthset/error.hpp"

#include <string>
#include <string_view>

namespace synthset {

enum class Role { object, distractor };

inline std::string to_string(Role role) { return role == Role::object ? "object" : "distractor"; }

inline Role parse_role(std::string_view text) {
  if (text == "object") return Role::object;
  if (text == "distractor") return Role::distractor;
  throw DataError("unknown role '" + std::string(text) + "'");
}

}  // namespace synthset
