#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace odlc::files {

// Throws IoError.
std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file, syncs it and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
// `dir/stem.ext`, or `dir/stem.ext.N` with the smallest free N.
std::filesystem::path unique_path(const std::filesystem::path& dir, const std::string& stem,
                                  const std::string& ext);

}  // namespace odlc::files
