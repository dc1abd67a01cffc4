#pragma once

#include <filesystem>
#include <string>

// Scratch file under the system temp directory.
inline std::string scratch_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "cbrtk_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}
