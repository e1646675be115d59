#pragma once

// Layered key = value run configuration. Later layers override earlier ones:
// built-in defaults, then a config file, then command-line overrides.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "tracker.hpp"

namespace ddcf {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size())
        throw ConfigurationError("config key '" + key + "': expected a number, got '" + v + "'");
    return d;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw ConfigurationError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline int to_int(const std::string& key, const std::string& v) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigurationError("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

} // namespace detail

enum class ConfigLayer { defaults = 0, file = 1, cli = 2 };

class RunConfig {
  public:
    using Setter = std::function<void(TrackerConfig&, const std::string&)>;

    struct Entry {
        std::string value;
        ConfigLayer layer = ConfigLayer::defaults;
    };

    RunConfig() {
        const TrackerConfig d;
        auto num = [](double v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        };
        set_default("parts_grid", std::to_string(d.parts_grid));
        set_default("lambda_p", num(d.lambda_p));
        set_default("mode", "affine");
        set_default("scales", std::to_string(d.scales));
        set_default("scale_step", num(d.scale_step));
        set_default("scale_penalty", num(d.scale_penalty));
        set_default("features", d.features.selector());
        set_default("normalize_features", d.normalize_features ? "true" : "false");
        set_default("square_region", d.square_region ? "true" : "false");
        set_default("isotropic_label", d.isotropic_label ? "true" : "false");
        set_default("cell_size", std::to_string(d.features.cell_size));
        set_default("padding", num(d.features.padding));
        set_default("min_cells", std::to_string(d.min_cells));
        set_default("max_cells", std::to_string(d.max_cells));
        set_default("init_cg_iterations", std::to_string(d.init_cg.max_iterations));
        set_default("init_cg_tolerance", num(d.init_cg.tolerance));
        set_default("update_cg_iterations", std::to_string(d.update_cg.max_iterations));
        set_default("update_cg_tolerance", num(d.update_cg.tolerance));
        set_default("bb_iterations", std::to_string(d.bb.max_iterations));
        set_default("bb_initial_step", num(d.bb.initial_step));
        set_default("bb_min_step", num(d.bb.min_step));
        set_default("bb_max_step", num(d.bb.max_step));
        set_default("learning_rate", num(d.learning_rate));
        set_default("memory_capacity", std::to_string(d.memory_capacity));
        set_default("sigma_factor", num(d.sigma_factor));
        set_default("reg_support", std::to_string(d.reg_support));
        set_default("reg_base", num(d.reg_base));
        set_default("root_reg_quad", num(d.root_reg_quad));
        set_default("part_reg_quad", num(d.part_reg_quad));
        set_default("prediction_blend", num(d.prediction_blend));
        set_default("oversampling", std::to_string(d.oversampling));
        set_default("newton_iterations", std::to_string(d.newton_iterations));
        set_default("colornames_table", "");
        set_default("precomputed_features", "");
    }

    static const std::vector<std::string>& keys() {
        static const std::vector<std::string> k = [] {
            std::vector<std::string> out;
            for (const auto& [name, _] : RunConfig().entries_)
                out.push_back(name);
            return out;
        }();
        return k;
    }

    bool known(const std::string& key) const { return entries_.count(key) != 0; }

    // Lower layers never overwrite higher ones, so the call order of the
    // layers does not matter.
    void set(const std::string& key, const std::string& value, ConfigLayer layer) {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw ConfigurationError("unknown config key '" + key + "'");
        if (static_cast<int>(layer) >= static_cast<int>(it->second.layer))
            it->second = {value, layer};
    }

    void set_assignment(const std::string& assignment, ConfigLayer layer) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigurationError("expected key=value, got '" + assignment + "'");
        set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)), layer);
    }

    void parse(std::istream& in, ConfigLayer layer = ConfigLayer::file) {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            line = detail::trim(line);
            if (line.empty())
                continue;
            try {
                set_assignment(line, layer);
            } catch (const ConfigurationError& e) {
                throw ConfigurationError("config line " + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw ConfigurationError("cannot open config file " + path.string());
        parse(in, ConfigLayer::file);
    }

    const std::string& get(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw ConfigurationError("unknown config key '" + key + "'");
        return it->second.value;
    }

    ConfigLayer layer_of(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw ConfigurationError("unknown config key '" + key + "'");
        return it->second.layer;
    }

    TrackerConfig tracker_config() const {
        using detail::to_double;
        using detail::to_int;
        auto B = [&](const char* k) { return detail::to_bool(k, get(k)); };
        TrackerConfig c;
        auto D = [&](const char* k) { return to_double(k, get(k)); };
        auto I = [&](const char* k) { return to_int(k, get(k)); };
        c.parts_grid = I("parts_grid");
        c.lambda_p = D("lambda_p");
        const std::string& mode = get("mode");
        if (mode == "affine")
            c.mode = TransformMode::affine;
        else if (mode == "identity")
            c.mode = TransformMode::identity;
        else
            throw ConfigurationError("config key 'mode': expected affine or identity, got '" + mode + "'");
        c.scales = I("scales");
        c.scale_step = D("scale_step");
        c.scale_penalty = D("scale_penalty");
        c.normalize_features = B("normalize_features");
        c.square_region = B("square_region");
        c.isotropic_label = B("isotropic_label");
        try {
            c.features = FeatureConfig::from_selector(get("features"));
        } catch (const std::invalid_argument& e) {
            throw ConfigurationError(std::string("config key 'features': ") + e.what());
        }
        c.features.cell_size = I("cell_size");
        c.features.padding = D("padding");
        c.min_cells = I("min_cells");
        c.max_cells = I("max_cells");
        c.init_cg.max_iterations = I("init_cg_iterations");
        c.init_cg.tolerance = D("init_cg_tolerance");
        c.update_cg.max_iterations = I("update_cg_iterations");
        c.update_cg.tolerance = D("update_cg_tolerance");
        c.bb.max_iterations = I("bb_iterations");
        c.bb.initial_step = D("bb_initial_step");
        c.bb.min_step = D("bb_min_step");
        c.bb.max_step = D("bb_max_step");
        c.learning_rate = D("learning_rate");
        c.memory_capacity = I("memory_capacity");
        c.sigma_factor = D("sigma_factor");
        c.reg_support = I("reg_support");
        c.reg_base = D("reg_base");
        c.root_reg_quad = D("root_reg_quad");
        c.part_reg_quad = D("part_reg_quad");
        c.prediction_blend = D("prediction_blend");
        c.oversampling = I("oversampling");
        c.newton_iterations = I("newton_iterations");
        try {
            c.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigurationError(e.what());
        }
        return c;
    }

  private:
    void set_default(const std::string& key, std::string value) { entries_[key] = {std::move(value), ConfigLayer::defaults}; }

    std::map<std::string, Entry> entries_;
};

} // namespace ddcf
