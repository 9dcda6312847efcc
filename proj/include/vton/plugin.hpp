#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "vton/backend.hpp"

/// Entry points a backend plugin (shared library) must export. The plugin is
/// built against these headers with the same compiler, and owns the returned
/// object until `vton_destroy_backend` is called.
extern "C" {
typedef int (*vton_plugin_abi_fn)();
typedef vton::Backend* (*vton_create_backend_fn)(const char* config_json);
typedef void (*vton_destroy_backend_fn)(vton::Backend* backend);
}

namespace vton {

inline constexpr int kPluginAbiVersion = 1;

/// Loads the plugin at `path` and creates a backend from `config` (the full
/// configuration document). The library stays loaded while the backend lives.
std::shared_ptr<const Backend> load_backend_plugin(const std::filesystem::path& path,
                                                   const nlohmann::json& config);

}  // namespace vton
