#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qsr::io {

// SHA-1 of a byte buffer as 40 lowercase hex digits.
std::string sha1_hex(const unsigned char* data, std::size_t size);

// Git blob id of a buffer: SHA-1 over "blob <size>\0" + content, so the
// result agrees with `git hash-object` on the same bytes.
std::string content_hash(const std::vector<unsigned char>& bytes);
std::string content_hash(const std::string& text);

// Blob id of a file's contents.
std::string file_hash(const std::string& path);

} // namespace qsr::io
