#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vton {

/// Single-document configuration. Every key has a built-in default; a file
/// and then environment variables override it. Environment variables use the
/// prefix `VTON_` with `__` as the section separator, e.g.
/// `VTON_BACKEND__GUIDANCE_SCALE=5` sets `backend.guidance_scale`.
class Config {
public:
    Config();

    static Config load(const std::filesystem::path& path);
    static const nlohmann::json& defaults();

    /// Overlays `doc`; throws InputError on keys unknown to the defaults.
    void merge(const nlohmann::json& doc);
    void apply_env(char** envp, std::string_view prefix = "VTON_");
    /// Sets a dotted key such as "ofr.alpha".
    void set(std::string_view key, nlohmann::json value);

    const nlohmann::json& at(std::string_view key) const;

    template <typename T>
    T value(std::string_view key) const {
        return at(key).get<T>();
    }

    const nlohmann::json& document() const noexcept { return doc_; }

private:
    nlohmann::json doc_;
};

}  // namespace vton
