#include "output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "pnl/error.hpp"
#include "pnl/version.hpp"

namespace pnl::cli {

TableFormat table_format_from_string(const std::string& s) {
    if (s == "csv")
        return TableFormat::csv;
    if (s == "json")
        return TableFormat::json;
    throw ConfigError("unknown output format '" + s + "' (expected csv|json)");
}

std::string format_number(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (v == 0.0)
        v = 0.0;  // drop the sign of -0
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c))
        return format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c))
        return std::to_string(*i);
    if (const auto* u = std::get_if<std::uint64_t>(&c))
        return std::to_string(*u);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

json cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isfinite(*d))
            return *d;
        return format_number(*d);
    }
    if (const auto* i = std::get_if<std::int64_t>(&c))
        return *i;
    if (const auto* u = std::get_if<std::uint64_t>(&c))
        return *u;
    return std::get<std::string>(c);
}

}  // namespace

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw std::logic_error("table row width does not match the header");
    rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i)
            out += ',';
        out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                out += ',';
            out += cell_text(row[i]);
        }
        out += '\n';
    }
    return out;
}

json Table::to_json() const {
    json arr = json::array();
    for (const auto& row : rows) {
        json obj = json::object();
        for (std::size_t i = 0; i < row.size(); ++i)
            obj[columns[i]] = cell_json(row[i]);
        arr.push_back(std::move(obj));
    }
    return json{{"columns", columns}, {"rows", std::move(arr)}};
}

std::uint64_t config_hash(const json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4)
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

OutputSink::OutputSink(std::filesystem::path dir, TableFormat format, std::string command,
                       std::uint64_t seed, json effective_config)
    : dir_(std::move(dir)),
      format_(format),
      command_(std::move(command)),
      seed_(seed),
      config_(std::move(effective_config)),
      hash_(hex64(config_hash(config_))) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec)
        throw ConfigError(dir_.string() + ": cannot create output directory: " + ec.message());
}

void OutputSink::write_file(const std::filesystem::path& path, const std::string& body) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error(path.string() + ": cannot open for writing");
        out << body;
        if (!out)
            throw std::runtime_error(path.string() + ": write failed");
    }
    json modules = json::object();
    for (const auto& [name, version] : kModuleVersions)
        modules[std::string(name)] = std::string(version);
    const json sidecar{
        {"file", path.filename().string()},
        {"command", command_},
        {"config_hash", "fnv1a64:" + hash_},
        {"seed", seed_},
        {"toolkit_version", std::string(kToolkitVersion)},
        {"module_versions", modules},
        {"config", config_},
    };
    std::ofstream side(path.string() + ".provenance.json", std::ios::binary | std::ios::trunc);
    if (!side)
        throw std::runtime_error(path.string() + ".provenance.json: cannot open for writing");
    side << sidecar.dump(2) << '\n';
    written_.push_back(path);
}

std::filesystem::path OutputSink::write_table(const std::string& stem, const Table& table) {
    if (format_ == TableFormat::csv) {
        const auto path = dir_ / (stem + ".csv");
        write_file(path, table.to_csv());
        return path;
    }
    const auto path = dir_ / (stem + ".json");
    write_file(path, table.to_json().dump(2) + "\n");
    return path;
}

std::filesystem::path OutputSink::write_json(const std::string& name, const json& doc) {
    const auto path = dir_ / name;
    write_file(path, doc.dump(2) + "\n");
    return path;
}

}  // namespace pnl::cli
