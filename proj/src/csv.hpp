#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mortjump::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or -1.
    int column(std::string_view name) const;
};

/// Minimal RFC-4180 reader: comma separated, double-quoted fields, header row required.
Table read(const std::string& path);

double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

/// Shortest text that parses back to the identical double.
std::string format_double(double value);

std::string quote(std::string_view field);

}  // namespace mortjump::csv
