#pragma once

#include <filesystem>
#include <string>

namespace tbpr {

// Writes to "<path>.tmp" and renames over path. Throws DataError on failure.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace tbpr
