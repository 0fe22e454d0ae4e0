#include "smm/config_io.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "smm/error.hpp"

namespace smm {

namespace {

using Setter = std::function<void(PhysicalConfig&, const nlohmann::json&)>;

double as_number(const nlohmann::json& v, std::string_view key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        std::size_t used = 0;
        double out = 0.0;
        try {
            out = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == s.size() && used > 0) return out;
    }
    throw Error("bad_setting", "setting '" + std::string(key) + "' expects a number, got " + v.dump());
}

Setter number(double PhysicalConfig::*member) {
    return [member](PhysicalConfig& c, const nlohmann::json& v) { c.*member = as_number(v, ""); };
}

template <typename Get>
Setter field(Get get) {
    return [get](PhysicalConfig& c, const nlohmann::json& v) { get(c) = as_number(v, ""); };
}

template <typename Get>
Setter integer(Get get) {
    return [get](PhysicalConfig& c, const nlohmann::json& v) {
        const double x = as_number(v, "");
        if (x != static_cast<double>(static_cast<int>(x)))
            throw Error("bad_setting", "expected an integer, got " + v.dump());
        get(c) = static_cast<int>(x);
    };
}

template <typename Get>
Setter optional(Get get) {
    return [get](PhysicalConfig& c, const nlohmann::json& v) {
        if (v.is_null()) {
            get(c).reset();
        } else {
            get(c) = as_number(v, "");
        }
    };
}

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"smm.name", [](PhysicalConfig& c, const nlohmann::json& v) {
             c.preset.name = v.is_string() ? v.get<std::string>() : v.dump();
         }},
        {"smm.S", field([](PhysicalConfig& c) -> double& { return c.preset.spin; })},
        {"smm.D", field([](PhysicalConfig& c) -> double& { return c.preset.axial_anisotropy; })},
        {"smm.E", field([](PhysicalConfig& c) -> double& { return c.preset.transverse_anisotropy; })},
        {"smm.alpha", field([](PhysicalConfig& c) -> double& { return c.preset.hyperfine_flip_flop; })},
        {"smm.gamma", field([](PhysicalConfig& c) -> double& { return c.preset.hyperfine_ising; })},
        {"smm.beta", field([](PhysicalConfig& c) -> double& { return c.preset.bath_exchange_xy; })},
        {"smm.delta", field([](PhysicalConfig& c) -> double& { return c.preset.bath_exchange_zz; })},
        {"smm.N", integer([](PhysicalConfig& c) -> int& { return c.preset.bath_size; })},
        {"smm.omega", field([](PhysicalConfig& c) -> double& { return c.preset.fundamental_frequency; })},
        {"cavity.length", field([](PhysicalConfig& c) -> double& { return c.geometry.length; })},
        {"cavity.n_r", field([](PhysicalConfig& c) -> double& { return c.geometry.refractive_index; })},
        {"cavity.R1", field([](PhysicalConfig& c) -> double& { return c.geometry.reflectivity_1; })},
        {"cavity.R2", field([](PhysicalConfig& c) -> double& { return c.geometry.reflectivity_2; })},
        {"cavity.M", integer([](PhysicalConfig& c) -> int& { return c.geometry.mode_count; })},
        {"cavity.kappa", optional([](PhysicalConfig& c) -> std::optional<double>& { return c.overrides.mode_decay; })},
        {"drive.power", field([](PhysicalConfig& c) -> double& { return c.drive.power_per_mode; })},
        {"drive.power_pw", [](PhysicalConfig& c, const nlohmann::json& v) {
             c.drive.power_per_mode = as_number(v, "drive.power_pw") * units::picowatt;
         }},
        {"drive.amplitude", optional([](PhysicalConfig& c) -> std::optional<double>& { return c.overrides.drive_amplitude; })},
        {"drive.pump_frequencies", [](PhysicalConfig& c, const nlohmann::json& v) {
             c.drive.pump_frequencies.clear();
             if (v.is_array()) {
                 for (const auto& x : v) c.drive.pump_frequencies.push_back(as_number(x, "drive.pump_frequencies"));
             } else if (v.is_string()) {
                 std::stringstream in(v.get<std::string>());
                 std::string item;
                 while (std::getline(in, item, ','))
                     if (!item.empty()) c.drive.pump_frequencies.push_back(as_number(item, "drive.pump_frequencies"));
             } else if (!v.is_null()) {
                 c.drive.pump_frequencies.push_back(as_number(v, "drive.pump_frequencies"));
             }
         }},
        {"field.B", number(&PhysicalConfig::magnetic_field)},
        {"field.omega_e", optional([](PhysicalConfig& c) -> std::optional<double>& { return c.overrides.electron_zeeman; })},
        {"field.omega_b", optional([](PhysicalConfig& c) -> std::optional<double>& { return c.overrides.nuclear_zeeman; })},
        {"rates.Gamma_s", number(&PhysicalConfig::spin_damping)},
        {"rates.Gamma_b", number(&PhysicalConfig::bath_damping)},
        {"rates.kappa_s", number(&PhysicalConfig::spin_dephasing)},
        {"coupling.G", number(&PhysicalConfig::spin_photon_coupling)},
        {"hp.Omega_s", optional([](PhysicalConfig& c) -> std::optional<double>& { return c.overrides.spin_frequency; })},
        {"hp.Omega_n", optional([](PhysicalConfig& c) -> std::optional<double>& { return c.overrides.bath_frequency; })},
    };
    return table;
}

void flatten(const nlohmann::json& node, const std::string& prefix,
             std::vector<std::pair<std::string, nlohmann::json>>& out) {
    for (const auto& [key, value] : node.items()) {
        const auto name = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            flatten(value, name, out);
        } else {
            out.emplace_back(name, value);
        }
    }
}

} // namespace

void apply_setting(PhysicalConfig& cfg, std::string_view key, const nlohmann::json& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw Error("unknown_setting", "unknown setting '" + std::string(key) + "'");
    try {
        it->second(cfg, value);
    } catch (const Error& e) {
        throw Error(e.code(), std::string(key) + ": " + e.what());
    }
}

void apply_setting(PhysicalConfig& cfg, std::string_view key, std::string_view value) {
    apply_setting(cfg, key, nlohmann::json(std::string(value)));
}

void apply_assignment(PhysicalConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw Error("bad_setting", "expected key=value, got '" + std::string(assignment) + "'");
    apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::vector<std::string> setting_keys() {
    std::vector<std::string> out;
    for (const auto& [key, _] : setters()) out.push_back(key);
    return out;
}

PhysicalConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error("bad_config", "configuration must be a JSON object");
    auto cfg = load_preset(doc.value("preset", std::string("fe8")));
    std::vector<std::pair<std::string, nlohmann::json>> flat;
    for (const auto& [section, body] : doc.items()) {
        if (section == "preset" || section == "derived") continue;
        if (!body.is_object()) throw Error("bad_config", "section '" + section + "' must be an object");
        flatten(body, section, flat);
    }
    for (const auto& [key, value] : flat) apply_setting(cfg, key, value);
    cfg.validate();
    return cfg;
}

PhysicalConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io_error", "cannot open configuration file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("bad_config", path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

nlohmann::json to_json(const PhysicalConfig& cfg) {
    nlohmann::json j;
    const auto& p = cfg.preset;
    j["smm"] = {{"name", p.name},         {"S", p.spin},
                {"D", p.axial_anisotropy}, {"E", p.transverse_anisotropy},
                {"alpha", p.hyperfine_flip_flop}, {"gamma", p.hyperfine_ising},
                {"beta", p.bath_exchange_xy},     {"delta", p.bath_exchange_zz},
                {"N", p.bath_size},               {"omega", p.fundamental_frequency}};
    const auto& g = cfg.geometry;
    j["cavity"] = {{"length", g.length}, {"n_r", g.refractive_index}, {"R1", g.reflectivity_1},
                   {"R2", g.reflectivity_2}, {"M", g.mode_count}};
    j["drive"] = {{"power", cfg.drive.power_per_mode}};
    if (!cfg.drive.pump_frequencies.empty()) j["drive"]["pump_frequencies"] = cfg.drive.pump_frequencies;
    j["field"] = {{"B", cfg.magnetic_field}};
    j["rates"] = {{"Gamma_s", cfg.spin_damping}, {"Gamma_b", cfg.bath_damping}, {"kappa_s", cfg.spin_dephasing}};
    j["coupling"] = {{"G", cfg.spin_photon_coupling}};
    // Absent overrides are written as null so that reloading the document
    // clears any preset override instead of silently inheriting it.
    const auto& o = cfg.overrides;
    const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j["cavity"]["kappa"] = opt(o.mode_decay);
    j["drive"]["amplitude"] = opt(o.drive_amplitude);
    j["field"]["omega_e"] = opt(o.electron_zeeman);
    j["field"]["omega_b"] = opt(o.nuclear_zeeman);
    j["hp"] = {{"Omega_s", opt(o.spin_frequency)}, {"Omega_n", opt(o.bath_frequency)}};

    nlohmann::json derived;
    derived["mode_frequencies"] = cfg.mode_frequencies();
    derived["kappa"] = cfg.mode_decay();
    const auto z = cfg.zeeman();
    derived["omega_e"] = z.electron;
    derived["omega_b"] = z.nuclear;
    derived["pump_frequencies"] = cfg.pump_frequencies();
    derived["pump_amplitudes"] = cfg.pump_amplitudes();
    derived["J"] = cfg.bath_spin();
    for (auto order : {ModelOrder::zeroth, ModelOrder::first}) {
        try {
            const auto hp = hp_frequencies(cfg, order);
            derived["Omega_s_" + to_string(order)] = hp.spin;
            if (hp.bath) derived["Omega_n"] = *hp.bath;
        } catch (const Error&) {
            derived["Omega_s_" + to_string(order)] = nullptr;
        }
    }
    j["derived"] = derived;
    return j;
}

} // namespace smm
