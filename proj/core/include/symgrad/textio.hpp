#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "symgrad/types.hpp"

namespace symgrad::textio {

/// 17 significant digits, the format used for every persisted float.
[[nodiscard]] std::string format_double(double v);
[[nodiscard]] double parse_double(std::string_view text);

using KeyValues = std::map<std::string, std::string>;

void write_key_values(const std::filesystem::path& path, const KeyValues& kv);
[[nodiscard]] KeyValues read_key_values(const std::filesystem::path& path);
/// Throws DataError naming the file when the key is absent.
[[nodiscard]] const std::string& require(const KeyValues& kv, const std::string& key,
                                         const std::filesystem::path& origin);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

[[nodiscard]] std::vector<std::string> split_csv_line(std::string_view line);
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

/// Numeric matrix from the given columns of a table.
[[nodiscard]] Matrix to_matrix(const CsvTable& table, std::size_t first_col, std::size_t cols,
                               const std::filesystem::path& origin);

}  // namespace symgrad::textio
