#include "ccc/csv.hpp"

#include "ccc/errors.hpp"

#include <charconv>
#include <cmath>

namespace ccc::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

double parse_double(std::string_view token, const std::string& file, std::size_t line) {
    if (!token.empty() && token.front() == '+')
        token.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
        throw LoadError(file, line, "expected a number, got '" + std::string(token) + "'");
    if (!std::isfinite(value))
        throw LoadError(file, line, "non-finite value '" + std::string(token) + "'");
    return value;
}

std::size_t parse_id(std::string_view token, const std::string& file, std::size_t line) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty() || value == 0)
        throw LoadError(file, line, "expected a positive integer id, got '" + std::string(token) + "'");
    return value;
}

Reader::Reader(const std::filesystem::path& path) : in_(path), name_(path.string()) {
    if (!in_)
        throw LoadError(name_, "cannot open file");
}

bool Reader::next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buffer_)) {
        ++line_;
        if (buffer_.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        fields = split(buffer_);
        return true;
    }
    return false;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    return out;
}

} // namespace ccc::csv
