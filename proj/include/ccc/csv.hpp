#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ccc::csv {

// Shortest representation that parses back to the same double.
std::string format_double(double value);

std::vector<std::string_view> split(std::string_view line);

double parse_double(std::string_view token, const std::string& file, std::size_t line);
// Positive 1-based id.
std::size_t parse_id(std::string_view token, const std::string& file, std::size_t line);

// Line-by-line reader that skips blank lines and tracks the 1-based line number.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path);

    bool next(std::vector<std::string_view>& fields);
    std::size_t line() const noexcept { return line_; }
    const std::string& file() const noexcept { return name_; }

private:
    std::ifstream in_;
    std::string name_;
    std::string buffer_;
    std::size_t line_ = 0;
};

// Opens `path` for writing, creating parent directories.
std::ofstream open_output(const std::filesystem::path& path);

} // namespace ccc::csv
