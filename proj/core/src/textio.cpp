#include "symgrad/textio.hpp"

#include <charconv>
#include <fstream>

#include <fmt/format.h>

#include "symgrad/errors.hpp"

namespace symgrad::textio {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DataError(fmt::format("not a number: '{}'", text));
    }
    return v;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    KeyValues kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(fmt::format("{}: malformed line '{}'", path.string(), line));
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

const std::string& require(const KeyValues& kv, const std::string& key, const std::filesystem::path& origin) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(fmt::format("{}: missing key '{}'", origin.string(), key));
    return it->second;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    // Fields may be double-quoted (expressions never contain quotes, but may contain commas).
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file", path.string()));
    table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != table.header.size()) {
            throw DataError(fmt::format("{}: row {} has {} fields, header has {}", path.string(),
                                        table.rows.size() + 1, fields.size(), table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

Matrix to_matrix(const CsvTable& table, std::size_t first_col, std::size_t cols, const std::filesystem::path& origin) {
    Matrix m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            try {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    parse_double(table.rows[r][first_col + c]);
            } catch (const DataError& e) {
                throw DataError(fmt::format("{}: row {}: {}", origin.string(), r + 1, e.what()));
            }
        }
    }
    return m;
}

}  // namespace symgrad::textio
