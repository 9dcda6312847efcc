#include "vton/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "vton/error.hpp"

namespace vton {

using nlohmann::json;

const json& Config::defaults() {
    static const json d = {
        {"backend",
         {{"kind", "mock"},
          {"steps", 50},
          {"guidance_scale", 7.5},
          {"spatial_factor", 8},
          {"schedule", "cosine"},
          {"plugin", ""},
          {"exclusive", false}}},
        {"scales", {{"style", 0.5}, {"content", 0.5}, {"sketch", 0.7}, {"text", 0.5}}},
        {"injection", {{"n_blocks", 11}, {"style_blocks", {7}}, {"content_blocks", {3, 4, 6}}}},
        {"cspe", {{"sigma_frac", 0.05}, {"lightness_space", "cielab"}}},
        {"ofr", {{"alpha", 1.0}, {"mode", "global"}}},
        {"mask", {{"stroke_threshold", 0.5}, {"close_radius", 3}, {"person_dilation", 0}}},
        {"sampler", {{"init", "noised"}, {"single_pass", false}}},
        {"analysis", {{"base_prompt", "a garment"}, {"seed", 0}, {"top_content", 3}}},
        {"eval", {{"edge_percentile", 90.0}, {"stroke_threshold", 0.5}}},
        {"elo",
         {{"k_factor", 32.0},
          {"initial", 1000.0},
          {"n_shuffles", 8},
          {"seed", 0},
          {"criteria",
           {"faithful reflection of all multimodal conditions", "preservation of the input identity",
            "overall visual realism"}}}},
        {"oracle",
         {{"kind", "stub"},
          {"endpoint", ""},
          {"token", ""},
          {"model", ""},
          {"template", ""},
          {"max_concurrency", 4},
          {"retries", 3},
          {"backoff_ms", 500},
          {"timeout_s", 60}}},
        {"service", {{"host", "127.0.0.1"}, {"port", 8080}, {"workers", 2}, {"jobs_dir", "jobs"}}},
    };
    return d;
}

Config::Config() : doc_(defaults()) {}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("config " + path.string() + ": " + e.what());
    }
    Config cfg;
    cfg.merge(doc);
    return cfg;
}

namespace {

void merge_into(json& dst, const json& src, const json& schema, const std::string& prefix) {
    if (!src.is_object()) throw InputError("config section " + prefix + " must be an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key())) throw InputError("unknown config key: " + key);
        if (schema[it.key()].is_object()) {
            merge_into(dst[it.key()], it.value(), schema[it.key()], key);
        } else {
            dst[it.key()] = it.value();
        }
    }
}

}  // namespace

void Config::merge(const json& doc) { merge_into(doc_, doc, defaults(), ""); }

void Config::set(std::string_view key, json value) {
    json::json_pointer ptr;
    std::string k(key);
    std::replace(k.begin(), k.end(), '.', '/');
    ptr = json::json_pointer("/" + k);
    if (!defaults().contains(ptr)) throw InputError("unknown config key: " + std::string(key));
    doc_[ptr] = std::move(value);
}

const json& Config::at(std::string_view key) const {
    std::string k(key);
    std::replace(k.begin(), k.end(), '.', '/');
    const json::json_pointer ptr("/" + k);
    if (!doc_.contains(ptr)) throw InputError("unknown config key: " + std::string(key));
    return doc_[ptr];
}

void Config::apply_env(char** envp, std::string_view prefix) {
    if (envp == nullptr) return;
    for (char** e = envp; *e != nullptr; ++e) {
        std::string_view entry(*e);
        if (entry.substr(0, prefix.size()) != prefix) continue;
        const auto eq = entry.find('=');
        if (eq == std::string_view::npos) continue;
        std::string name(entry.substr(prefix.size(), eq - prefix.size()));
        const std::string raw(entry.substr(eq + 1));
        std::string key;
        for (std::size_t i = 0; i < name.size(); ++i) {
            if (name[i] == '_' && i + 1 < name.size() && name[i + 1] == '_') {
                key.push_back('.');
                ++i;
            } else {
                key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(name[i]))));
            }
        }
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;
        // Strings that happen to parse as something else stay strings when the
        // default is a string ("0" for a string field, for instance).
        if (at(key).is_string() && !value.is_string()) value = raw;
        set(key, std::move(value));
    }
}

}  // namespace vton
