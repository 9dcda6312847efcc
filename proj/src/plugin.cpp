#include "vton/plugin.hpp"

#include <dlfcn.h>

#include "vton/config.hpp"
#include "vton/error.hpp"
#include "vton/mock_backend.hpp"

namespace vton {

namespace {

struct LibraryHandle {
    void* handle = nullptr;
    ~LibraryHandle() {
        if (handle) dlclose(handle);
    }
};

template <typename Fn>
Fn resolve(void* handle, const char* name, const std::filesystem::path& path) {
    void* sym = dlsym(handle, name);
    if (!sym) throw InputError(path.string() + ": missing symbol " + name);
    return reinterpret_cast<Fn>(sym);
}

}  // namespace

std::shared_ptr<const Backend> load_backend_plugin(const std::filesystem::path& path,
                                                   const nlohmann::json& config) {
    auto lib = std::make_shared<LibraryHandle>();
    lib->handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!lib->handle) {
        const char* err = dlerror();
        throw InputError("cannot load backend plugin " + path.string() + ": " + (err ? err : "unknown error"));
    }
    auto abi = resolve<vton_plugin_abi_fn>(lib->handle, "vton_plugin_abi_version", path);
    if (abi() != kPluginAbiVersion) {
        throw InputError(path.string() + ": plugin ABI version " + std::to_string(abi()) + ", expected " +
                         std::to_string(kPluginAbiVersion));
    }
    auto create = resolve<vton_create_backend_fn>(lib->handle, "vton_create_backend", path);
    auto destroy = resolve<vton_destroy_backend_fn>(lib->handle, "vton_destroy_backend", path);
    const std::string text = config.dump();
    Backend* raw = create(text.c_str());
    if (!raw) throw InputError(path.string() + ": plugin returned no backend");
    return std::shared_ptr<const Backend>(raw, [lib, destroy](const Backend* b) {
        destroy(const_cast<Backend*>(b));
    });
}

std::shared_ptr<const Backend> make_backend(const Config& config) {
    const auto kind = config.value<std::string>("backend.kind");
    if (kind == "mock") {
        MockBackendOptions opts;
        opts.spatial_factor = config.value<int>("backend.spatial_factor");
        opts.steps = config.value<int>("backend.steps");
        opts.schedule = config.value<std::string>("backend.schedule");
        opts.exclusive = config.value<bool>("backend.exclusive");
        const int n_blocks = config.value<int>("injection.n_blocks");
        if (n_blocks != opts.profile.n_blocks()) opts.profile = MockProfile::uniform(n_blocks, 0.5, 0.5);
        return std::make_shared<MockBackend>(std::move(opts));
    }
    if (kind == "external") {
        const auto plugin = config.value<std::string>("backend.plugin");
        if (plugin.empty()) throw InputError("backend.kind=external requires backend.plugin");
        return load_backend_plugin(plugin, config.document());
    }
    throw InputError("unknown backend.kind: " + kind);
}

}  // namespace vton
