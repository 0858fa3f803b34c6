#pragma once

// Strict view over a JSON config tree. Every key read through a ConfigNode
// is recorded; reject_unknown() then reports the first key nobody read.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace pnl::cli {

using json = nlohmann::json;

class ConfigNode {
  public:
    struct Registry {
        std::set<std::string> leaves;
        std::set<std::string> blocks;
    };

    ConfigNode(const json* node, std::string path, std::shared_ptr<Registry> reg);
    static ConfigNode root(const json& doc);

    const std::string& path() const { return path_; }
    bool present() const { return node_ != nullptr; }
    bool has(const std::string& key) const;

    // Missing optional blocks yield an absent node whose getters return
    // their defaults.
    ConfigNode block(const std::string& key) const;
    ConfigNode required_block(const std::string& key) const;

    double number(const std::string& key, double fallback) const;
    std::optional<double> optional_number(const std::string& key) const;
    std::uint64_t count(const std::string& key, std::uint64_t fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key,
                                const std::vector<double>& fallback) const;
    // Raw access for structured arrays; the caller validates the content.
    const json* raw(const std::string& key) const;

    std::string child_path(const std::string& key) const;
    const Registry& registry() const { return *reg_; }

  private:
    const json* lookup(const std::string& key) const;

    const json* node_;
    std::string path_;
    std::shared_ptr<Registry> reg_;
};

// Throws ConfigError naming the first unread key (depth-first, sorted).
void reject_unknown(const json& doc, const ConfigNode::Registry& reg);

json load_config(const std::filesystem::path& path);

}  // namespace pnl::cli
