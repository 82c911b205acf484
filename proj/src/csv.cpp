#include "leakguard/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "leakguard/errors.hpp"

namespace leakguard {

namespace {

struct Record {
    std::vector<std::string> fields;
    std::vector<bool> quoted;
    std::size_t line = 0;
};

std::optional<double> parse_decimal(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<Record> records;
    Record cur;
    std::string field;
    bool field_quoted = false;
    bool in_quotes = false;
    bool record_open = false;
    std::size_t line = 1;
    cur.line = 1;

    auto end_field = [&] {
        cur.fields.push_back(std::move(field));
        cur.quoted.push_back(field_quoted);
        field.clear();
        field_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(cur));
        cur = Record{};
        record_open = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (!record_open) {
            record_open = true;
            cur.line = line;
        }
        if (c == '"' && field.empty() && !field_quoted) {
            in_quotes = true;
            field_quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            continue;
        } else if (c == '\n') {
            end_record();
            ++line;
        } else {
            field += c;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field starting on line " + std::to_string(cur.line));
    if (record_open) end_record();

    // Blank lines carry no fields.
    std::erase_if(records, [](const Record& r) { return r.fields.size() == 1 && r.fields[0].empty() && !r.quoted[0]; });
    if (records.empty()) throw DataError("CSV input is empty");

    CsvTable table;
    table.header = records.front().fields;
    std::unordered_set<std::string> seen;
    for (const std::string& h : table.header) {
        if (h.empty()) throw DataError("CSV header has an empty column name");
        if (!seen.insert(h).second) throw DataError("duplicate column name '" + h + "' in CSV header");
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        const Record& rec = records[r];
        if (rec.fields.size() != table.header.size()) {
            throw DataError("line " + std::to_string(rec.line) + " has " + std::to_string(rec.fields.size()) +
                            " fields, expected " + std::to_string(table.header.size()));
        }
        std::vector<std::optional<std::string>> row;
        row.reserve(rec.fields.size());
        for (std::size_t k = 0; k < rec.fields.size(); ++k) {
            const std::string& f = rec.fields[k];
            if (f.empty() || f == "NA") {
                row.emplace_back(std::nullopt);
            } else {
                row.emplace_back(f);
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

Dataset table_to_dataset(const CsvTable& table) {
    std::vector<Column> columns;
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        std::vector<double> numeric;
        numeric.reserve(table.rows.size());
        bool is_numeric = true;
        for (const auto& row : table.rows) {
            if (!row[k]) {
                numeric.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const auto v = parse_decimal(*row[k]);
            if (!v) {
                is_numeric = false;
                break;
            }
            numeric.push_back(*v);
        }
        if (is_numeric) {
            columns.push_back(numeric_column(table.header[k], std::move(numeric)));
        } else {
            std::vector<std::optional<std::string>> values;
            values.reserve(table.rows.size());
            for (const auto& row : table.rows) values.push_back(row[k]);
            columns.push_back(categorical_column(table.header[k], values));
        }
    }
    return Dataset(std::move(columns));
}

Dataset read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return table_to_dataset(parse_csv(buf.str()));
}

}  // namespace leakguard
