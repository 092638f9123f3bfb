#pragma once

#include <string>
#include <string_view>

namespace branch {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Hex string of `bytes` random bytes from the OS entropy source.
std::string random_hex(std::size_t bytes);

}  // namespace branch
