#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rtge/error.hpp"
#include "rtge/eval.hpp"
#include "rtge/model.hpp"
#include "rtge/sampler.hpp"
#include "rtge/trainer.hpp"

namespace rtge {

struct RunConfig {
    HyperParams hp;
    Mode mode = Mode::RTGE;
    std::uint64_t seed = 1;
    NegFilter neg_filter = NegFilter::Bin;
    std::size_t batch_size = 0;
    unsigned threads = 1;
    bool resample = false;
    int min_triples = 300;
    bool filtered = false;
    std::vector<Task> tasks{Task::Head, Task::Tail, Task::Relation, Task::Time};
    std::size_t top_k = 10;

    std::string train, valid, test;
    std::string cache;
    std::string checkpoint;
    std::string output_dir = ".";
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) {
        throw ConfigError("bad value '" + std::string(v) + "' for " + std::string(key));
    }
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean '" + std::string(v) + "' for " + std::string(key));
}

inline std::vector<Task> parse_tasks(std::string_view v) {
    std::vector<Task> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        const auto comma = std::min(v.find(',', pos), v.size());
        const auto item = trim(v.substr(pos, comma - pos));
        if (!item.empty()) out.push_back(parse_task(item));
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError("tasks must name at least one of head, tail, relation, time");
    return out;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

inline const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = [] {
        std::map<std::string, Setter, std::less<>> t;
        const auto real = [&](const char* k, double HyperParams::*f) {
            t[k] = [k, f](RunConfig& c, std::string_view v) { c.hp.*f = parse_number<double>(k, v); };
        };
        const auto count = [&](const char* k, std::size_t HyperParams::*f) {
            t[k] = [k, f](RunConfig& c, std::string_view v) { c.hp.*f = parse_number<std::size_t>(k, v); };
        };
        real("gamma", &HyperParams::gamma);
        real("alpha", &HyperParams::alpha);
        real("beta", &HyperParams::beta);
        real("xi", &HyperParams::xi);
        real("psi", &HyperParams::psi);
        real("epsilon", &HyperParams::epsilon);
        count("kappa", &HyperParams::kappa);
        count("m", &HyperParams::m);
        count("d", &HyperParams::d);
        t["negatives_m"] = t["m"];
        t["norm"] = [](RunConfig& c, std::string_view v) {
            if (v == "l2" || v == "L2") c.hp.norm = Norm::L2;
            else if (v == "l1" || v == "L1") c.hp.norm = Norm::L1;
            else throw ConfigError("norm must be l1 or l2");
        };
        t["mode"] = [](RunConfig& c, std::string_view v) { c.mode = parse_mode(v); };
        t["seed"] = [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); };
        t["neg_filter"] = [](RunConfig& c, std::string_view v) {
            if (v == "bin") c.neg_filter = NegFilter::Bin;
            else if (v == "global") c.neg_filter = NegFilter::Global;
            else throw ConfigError("neg_filter must be bin or global");
        };
        t["batch_size"] = [](RunConfig& c, std::string_view v) { c.batch_size = parse_number<std::size_t>("batch_size", v); };
        t["threads"] = [](RunConfig& c, std::string_view v) { c.threads = parse_number<unsigned>("threads", v); };
        t["resample"] = [](RunConfig& c, std::string_view v) { c.resample = parse_bool("resample", v); };
        t["min_triples"] = [](RunConfig& c, std::string_view v) { c.min_triples = parse_number<int>("min_triples", v); };
        t["filtered"] = [](RunConfig& c, std::string_view v) { c.filtered = parse_bool("filtered", v); };
        t["tasks"] = [](RunConfig& c, std::string_view v) { c.tasks = parse_tasks(v); };
        t["top_k"] = [](RunConfig& c, std::string_view v) { c.top_k = parse_number<std::size_t>("top_k", v); };
        t["train"] = [](RunConfig& c, std::string_view v) { c.train = v; };
        t["valid"] = [](RunConfig& c, std::string_view v) { c.valid = v; };
        t["test"] = [](RunConfig& c, std::string_view v) { c.test = v; };
        t["cache"] = [](RunConfig& c, std::string_view v) { c.cache = v; };
        t["checkpoint"] = [](RunConfig& c, std::string_view v) { c.checkpoint = v; };
        t["output_dir"] = [](RunConfig& c, std::string_view v) { c.output_dir = v; };
        return t;
    }();
    return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : detail::setters()) keys.push_back(k);
    return keys;
}

inline void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
    const auto& t = detail::setters();
    auto it = t.find(key);
    if (it == t.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    it->second(c, detail::trim(value));
}

// key=value lines; '#' starts a comment line.
inline void apply_config_stream(RunConfig& c, std::istream& in, const std::string& source = "config") {
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(no) + ": expected key=value");
        }
        set_config_value(c, detail::trim(s.substr(0, eq)), s.substr(eq + 1));
    }
}

inline void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    apply_config_stream(c, in, path.string());
}

// TKGE_<KEY> for every known key, e.g. TKGE_ALPHA=100 or TKGE_NEG_FILTER=global.
inline void apply_env(RunConfig& c, const std::function<const char*(const char*)>& getenv_fn = [](const char* k) {
    return std::getenv(k);
}) {
    for (const auto& key : config_keys()) {
        std::string name = "TKGE_" + key;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
        if (const char* v = getenv_fn(name.c_str())) set_config_value(c, key, v);
    }
}

inline std::string kebab(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

}  // namespace rtge
