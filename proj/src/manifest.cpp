#include "vton/manifest.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "vton/backend.hpp"
#include "vton/error.hpp"
#include "vton/image_io.hpp"

namespace vton {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string>& known_fields() {
    static const std::set<std::string> k = {"example", "method",   "generated",     "sketch", "region",
                                            "image_prompt", "text", "content_words", "dataset"};
    return k;
}

std::optional<std::string> opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) throw InputError(std::string("manifest field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

}  // namespace

ManifestRecord ManifestRecord::from_json(const json& j) {
    if (!j.is_object()) throw InputError("manifest record must be an object");
    for (const auto& [k, _] : j.items()) {
        if (!known_fields().count(k)) throw InputError("unknown manifest field '" + k + "'");
    }
    ManifestRecord r;
    for (const char* key : {"example", "method", "generated"}) {
        const auto v = opt_string(j, key);
        if (!v || v->empty()) throw InputError(std::string("manifest field '") + key + "' is required");
    }
    r.example = j.at("example").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.generated = j.at("generated").get<std::string>();
    r.sketch = opt_string(j, "sketch");
    r.region = opt_string(j, "region");
    r.image_prompt = opt_string(j, "image_prompt");
    r.text = opt_string(j, "text");
    r.dataset = opt_string(j, "dataset");
    if (j.contains("content_words") && !j.at("content_words").is_null()) {
        const auto& w = j.at("content_words");
        if (!w.is_array() || !std::all_of(w.begin(), w.end(), [](const json& e) { return e.is_string(); })) {
            throw InputError("manifest field 'content_words' must be a list of strings");
        }
        r.content_words = w.get<std::vector<std::string>>();
    }
    return r;
}

json ManifestRecord::to_json() const {
    json j = {{"example", example}, {"method", method}, {"generated", generated}};
    if (sketch) j["sketch"] = *sketch;
    if (region) j["region"] = *region;
    if (image_prompt) j["image_prompt"] = *image_prompt;
    if (text) j["text"] = *text;
    if (!content_words.empty()) j["content_words"] = content_words;
    if (dataset) j["dataset"] = *dataset;
    return j;
}

std::string ManifestRecord::describe_conditions() const {
    std::vector<std::string> parts;
    if (sketch) parts.push_back("a garment sketch");
    if (image_prompt) parts.push_back("a reference image for style");
    if (text) parts.push_back("the text prompt \"" + *text + "\"");
    if (parts.empty()) return "";
    std::string out = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) out += (i + 1 == parts.size() ? " and " : ", ") + parts[i];
    return out;
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    std::vector<ManifestRecord> out;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(ManifestRecord::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

json MetricRecord::to_json() const {
    json j = record.to_json();
    j["sketch_cd"] = opt_json(sketch_cd);
    j["style"] = opt_json(style);
    j["text_score"] = opt_json(text);
    j["content"] = opt_json(content);
    j["undefined"] = undefined;
    return j;
}

MetricRecord evaluate_record(const ManifestRecord& r, const Backend& backend, const MetricOptions& options,
                             const fs::path& base_dir) {
    MetricRecord m{r, {}, {}, {}, {}, {}};
    const RgbImage generated = read_png(resolve(base_dir, r.generated));
    const GrayMask region = r.region ? read_mask_png(resolve(base_dir, *r.region))
                                     : GrayMask(generated.height(), generated.width(), true);
    if (r.sketch) {
        m.sketch_cd = sketch_score(read_png(resolve(base_dir, *r.sketch)), generated, region, options);
        if (!m.sketch_cd) m.undefined.push_back("sketch_cd: no strokes or no edges in the region");
    }
    if (r.image_prompt) {
        m.style = style_score(generated, read_png(resolve(base_dir, *r.image_prompt)), region, backend.image_encoder(),
                              options);
        if (!m.style) m.undefined.push_back("style: empty region or zero style residual");
    }
    if (r.text) m.text = text_score(generated, *r.text, backend.joint_encoder());
    if (!r.content_words.empty()) m.content = content_score(generated, r.content_words, backend.joint_encoder());
    return m;
}

EvaluationReport evaluate_manifest(const std::vector<ManifestRecord>& records, const fs::path& base_dir,
                                   const Backend& backend, const Oracle* oracle, const EvaluationOptions& options) {
    EvaluationReport report;
    report.metrics.resize(records.size());
    std::vector<std::exception_ptr> errors(records.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            try {
                report.metrics[i] = evaluate_record(records[i], backend, options.metrics, base_dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const int n = std::clamp<int>(options.max_concurrency, 1, static_cast<int>(std::max<std::size_t>(records.size(), 1)));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    if (!options.run_tournament || !oracle) return report;

    // dataset -> example -> method -> generated path
    std::map<std::string, std::map<std::string, std::map<std::string, std::string>>> groups;
    std::map<std::string, std::string> conditions;
    for (const auto& r : records) {
        auto& slot = groups[r.dataset.value_or("all")][r.example][r.method];
        if (!slot.empty()) throw InputError("duplicate manifest record for " + r.example + "/" + r.method);
        slot = resolve(base_dir, r.generated).string();
        conditions.emplace(r.example, r.describe_conditions());
    }
    for (const auto& [dataset, by_example] : groups) {
        std::set<std::string> methods;
        for (const auto& [_, per] : by_example) {
            for (const auto& [method, _p] : per) methods.insert(method);
        }
        if (methods.size() < 2) continue;
        std::vector<std::string> examples;
        for (const auto& [ex, per] : by_example) {
            if (per.size() == methods.size()) examples.push_back(ex);
        }
        if (examples.empty()) continue;
        std::vector<TournamentEntry> entries;
        for (const auto& method : methods) {
            TournamentEntry e{method, {}};
            for (const auto& ex : examples) e.images.push_back(by_example.at(ex).at(method));
            entries.push_back(std::move(e));
        }
        report.elo[dataset] = run_tournament(entries, examples, *oracle, options.tournament,
                                             [&](const std::string& ex) { return conditions.at(ex); });
    }
    return report;
}

std::string EvaluationReport::to_markdown() const {
    struct Acc {
        double sum = 0.0;
        int n = 0;
        int undefined = 0;
        void add(const std::optional<double>& v, bool applicable) {
            if (v) {
                sum += *v;
                ++n;
            } else if (applicable) {
                ++undefined;
            }
        }
        std::string cell(int precision) const {
            if (n == 0) return undefined ? "undefined" : "n/a";
            std::string s = fmt(sum / n, precision);
            if (undefined) s += " (" + std::to_string(undefined) + " undefined)";
            return s;
        }
    };
    struct Row {
        Acc cd, style, text;
    };
    std::map<std::string, std::map<std::string, Row>> table;
    for (const auto& m : metrics) {
        auto& row = table[m.record.dataset.value_or("all")][m.record.method];
        row.cd.add(m.sketch_cd, m.record.sketch.has_value());
        row.style.add(m.style, m.record.image_prompt.has_value());
        row.text.add(m.text, m.record.text.has_value());
    }
    std::ostringstream out;
    for (const auto& [dataset, rows] : table) {
        out << "### " << dataset << "\n\n";
        out << "| Method | Elo ↑ | Sketch (CD) ↓ | Image ↑ | Text ↑ |\n";
        out << "|---|---|---|---|---|\n";
        const auto elo = this->elo.find(dataset);
        for (const auto& [method, row] : rows) {
            std::string elo_cell = "n/a";
            if (elo != this->elo.end() && elo->second.pooled.mean.count(method)) {
                elo_cell = fmt(elo->second.pooled.mean.at(method), 1) + " ± " +
                           fmt(elo->second.pooled.stddev.at(method), 1);
            }
            out << "| " << method << " | " << elo_cell << " | " << row.cd.cell(2) << " | " << row.style.cell(3)
                << " | " << row.text.cell(2) << " |\n";
        }
        out << "\n";
    }
    return out.str();
}

void write_metrics_jsonl(const fs::path& path, const std::vector<MetricRecord>& metrics) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    for (const auto& m : metrics) out << m.to_json().dump() << "\n";
}

}  // namespace vton
