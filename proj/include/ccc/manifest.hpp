#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ccc {

// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

} // namespace ccc
