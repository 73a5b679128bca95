#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rmdn::csv {

/// A parsed comma-delimited table. The first line is the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    /// Column index by name; throws InputError if absent.
    std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source_name);

/// Strict decimal parse; throws InputError naming `what` on failure.
double to_double(std::string_view text, std::string_view what);
long to_long(std::string_view text, std::string_view what);

/// Shortest round-trip representation, '.' decimal point.
std::string format(double value);

class Writer {
public:
    explicit Writer(const std::filesystem::path& path);

    Writer& row(const std::vector<std::string>& fields);
    template <typename... Ts>
    Writer& values(const Ts&... vs) {
        return row({to_field(vs)...});
    }

private:
    static std::string to_field(const std::string& s) { return s; }
    static std::string to_field(const char* s) { return s; }
    static std::string to_field(double v) { return format(v); }
    static std::string to_field(int v) { return std::to_string(v); }
    static std::string to_field(long v) { return std::to_string(v); }
    static std::string to_field(unsigned long v) { return std::to_string(v); }
    static std::string to_field(long long v) { return std::to_string(v); }
    static std::string to_field(unsigned long long v) { return std::to_string(v); }

    std::filesystem::path path_;
    std::ofstream out_;
};

}  // namespace rmdn::csv
