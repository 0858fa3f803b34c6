#pragma once

// Deterministic table and JSON writers. Every file written through an
// OutputSink gets a `<file>.provenance.json` sidecar.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace pnl::cli {

using json = nlohmann::json;

enum class TableFormat { csv, json };

TableFormat table_format_from_string(const std::string& s);

// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite.
std::string format_number(double v);

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    explicit Table(std::vector<std::string> cols) : columns(std::move(cols)) {}
    void add(std::vector<Cell> row);
    std::string to_csv() const;
    json to_json() const;
};

// 64-bit FNV-1a of the compact JSON dump.
std::uint64_t config_hash(const json& config);
std::string hex64(std::uint64_t v);

class OutputSink {
  public:
    OutputSink(std::filesystem::path dir, TableFormat format, std::string command,
               std::uint64_t seed, json effective_config);

    // Writes `<stem>.csv` or `<stem>.json` depending on the format.
    std::filesystem::path write_table(const std::string& stem, const Table& table);
    std::filesystem::path write_json(const std::string& name, const json& doc);

    const std::vector<std::filesystem::path>& written() const { return written_; }
    TableFormat format() const { return format_; }

  private:
    void write_file(const std::filesystem::path& path, const std::string& body);

    std::filesystem::path dir_;
    TableFormat format_;
    std::string command_;
    std::uint64_t seed_;
    json config_;
    std::string hash_;
    std::vector<std::filesystem::path> written_;
};

}  // namespace pnl::cli
