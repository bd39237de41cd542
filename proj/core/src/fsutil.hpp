#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace soilgen::detail {

// Writes via a sibling temp file and rename, so readers never observe a
// partially written file. Creates parent directories. Throws WriteError.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

// Throws DataError when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

}  // namespace soilgen::detail
