#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "pnl/error.hpp"

namespace pnl::cli {

ConfigNode::ConfigNode(const json* node, std::string path,
                       std::shared_ptr<Registry> reg)
    : node_(node), path_(std::move(path)), reg_(std::move(reg)) {}

ConfigNode ConfigNode::root(const json& doc) {
    if (!doc.is_object())
        throw ConfigError("config root must be an object");
    return ConfigNode(&doc, "", std::make_shared<Registry>());
}

std::string ConfigNode::child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
}

const json* ConfigNode::lookup(const std::string& key) const {
    if (!node_)
        return nullptr;
    const auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
}

bool ConfigNode::has(const std::string& key) const { return lookup(key) != nullptr; }

ConfigNode ConfigNode::block(const std::string& key) const {
    const json* j = lookup(key);
    const std::string p = child_path(key);
    if (j && !j->is_object())
        throw ConfigError(p + ": expected an object");
    if (j)
        reg_->blocks.insert(p);
    return ConfigNode(j, p, reg_);
}

ConfigNode ConfigNode::required_block(const std::string& key) const {
    if (!lookup(key))
        throw ConfigError(child_path(key) + ": missing required block");
    return block(key);
}

const json* ConfigNode::raw(const std::string& key) const {
    const json* j = lookup(key);
    if (j)
        reg_->leaves.insert(child_path(key));
    return j;
}

std::optional<double> ConfigNode::optional_number(const std::string& key) const {
    const json* j = raw(key);
    if (!j)
        return std::nullopt;
    if (!j->is_number())
        throw ConfigError(child_path(key) + ": expected a number");
    const double v = j->get<double>();
    if (!std::isfinite(v))
        throw ConfigError(child_path(key) + ": expected a finite number");
    return v;
}

double ConfigNode::number(const std::string& key, double fallback) const {
    return optional_number(key).value_or(fallback);
}

std::uint64_t ConfigNode::count(const std::string& key, std::uint64_t fallback) const {
    const json* j = raw(key);
    if (!j)
        return fallback;
    if (j->is_number_unsigned())
        return j->get<std::uint64_t>();
    if (j->is_number_integer()) {
        const auto v = j->get<std::int64_t>();
        if (v < 0)
            throw ConfigError(child_path(key) + ": expected a non-negative integer");
        return static_cast<std::uint64_t>(v);
    }
    if (j->is_number_float()) {
        const double v = j->get<double>();
        if (v >= 0.0 && v == std::floor(v) && v < 1.8e19)
            return static_cast<std::uint64_t>(v);
    }
    throw ConfigError(child_path(key) + ": expected a non-negative integer");
}

bool ConfigNode::flag(const std::string& key, bool fallback) const {
    const json* j = raw(key);
    if (!j)
        return fallback;
    if (!j->is_boolean())
        throw ConfigError(child_path(key) + ": expected true or false");
    return j->get<bool>();
}

std::string ConfigNode::text(const std::string& key, const std::string& fallback) const {
    const json* j = raw(key);
    if (!j)
        return fallback;
    if (!j->is_string())
        throw ConfigError(child_path(key) + ": expected a string");
    return j->get<std::string>();
}

std::vector<double> ConfigNode::numbers(const std::string& key,
                                        const std::vector<double>& fallback) const {
    const json* j = raw(key);
    if (!j)
        return fallback;
    if (!j->is_array())
        throw ConfigError(child_path(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j->size(); ++i) {
        const json& v = (*j)[i];
        if (!v.is_number() || !std::isfinite(v.get<double>()))
            throw ConfigError(child_path(key) + "[" + std::to_string(i) +
                              "]: expected a finite number");
        out.push_back(v.get<double>());
    }
    return out;
}

namespace {

void walk(const json& node, const std::string& path,
          const ConfigNode::Registry& reg) {
    for (const auto& [key, value] : node.items()) {
        const std::string p = path.empty() ? key : path + "." + key;
        if (reg.leaves.count(p))
            continue;
        if (value.is_object() && reg.blocks.count(p)) {
            walk(value, p, reg);
            continue;
        }
        throw ConfigError(p + ": unknown key");
    }
}

}  // namespace

void reject_unknown(const json& doc, const ConfigNode::Registry& reg) {
    walk(doc, "", reg);
}

json load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path.string() + ": cannot open config file");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace pnl::cli
