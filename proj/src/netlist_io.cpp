#include "nldiag/netlist_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace nldiag {

using nlohmann::json;

namespace {

double number(const json& params, const char* key, const std::string& id, std::optional<double> fallback = {}) {
    auto it = params.find(key);
    if (it == params.end()) {
        if (fallback) return *fallback;
        throw ParseError("component '" + id + "': missing parameter '" + key + "'");
    }
    if (!it->is_number()) {
        throw ParseError("component '" + id + "': parameter '" + key + "' must be a number");
    }
    return it->get<double>();
}

ComponentParams parse_params(ComponentKind kind, const json& p, const std::string& id) {
    switch (kind) {
        case ComponentKind::resistor: return ResistorParams{number(p, "R", id)};
        case ComponentKind::capacitor: return CapacitorParams{number(p, "C", id)};
        case ComponentKind::sin_voltage_source:
            return SineSourceParams{number(p, "amplitude", id), number(p, "frequency", id),
                                    number(p, "phase", id, 0.0), number(p, "offset", id, 0.0)};
        case ComponentKind::diode:
            return DiodeParams{number(p, "I_S", id, 1e-12), number(p, "n", id, 1.0), number(p, "V_T", id, 0.026)};
        case ComponentKind::nonlinear_inductor: return InductorParams{number(p, "L0", id), number(p, "I_sat", id)};
    }
    throw ParseError("unsupported component type");
}

json params_json(const Component& c) {
    return std::visit(
        [](const auto& p) -> json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ResistorParams>) {
                return {{"R", p.resistance}};
            } else if constexpr (std::is_same_v<P, CapacitorParams>) {
                return {{"C", p.capacitance}};
            } else if constexpr (std::is_same_v<P, SineSourceParams>) {
                return {{"amplitude", p.amplitude}, {"frequency", p.frequency}, {"phase", p.phase}, {"offset", p.offset}};
            } else if constexpr (std::is_same_v<P, DiodeParams>) {
                return {{"I_S", p.saturation_current}, {"n", p.emission}, {"V_T", p.thermal_voltage}};
            } else {
                return {{"L0", p.l0}, {"I_sat", p.i_sat}};
            }
        },
        c.params);
}

FaultSpec parse_fault_json(const json& f) {
    if (!f.is_object() || !f.contains("component") || !f["component"].is_string() || !f.contains("kind") ||
        !f["kind"].is_string()) {
        throw ParseError("fault entries need string 'component' and 'kind'");
    }
    const std::string kind = f["kind"].get<std::string>();
    FaultSpec spec;
    spec.component_id = f["component"].get<std::string>();
    if (kind == "jacobian_sign_flip") {
        spec.kind = FaultKind::jacobian_sign_flip;
    } else if (kind == "jacobian_scale") {
        spec.kind = FaultKind::jacobian_scale;
        if (!f.contains("factor") || !f["factor"].is_number()) {
            throw ParseError("jacobian_scale fault needs a numeric 'factor'");
        }
        spec.factor = f["factor"].get<double>();
    } else {
        throw ParseError("unknown fault kind '" + kind + "'");
    }
    return spec;
}

json fault_json(const FaultSpec& f) {
    json out = {{"component", f.component_id}, {"kind", to_string(f.kind)}};
    if (f.kind == FaultKind::jacobian_scale) out["factor"] = f.factor;
    return out;
}

}  // namespace

NetlistDocument parse_netlist(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("netlist is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("netlist must be a JSON object");
    }
    NetlistDocument out;
    try {
        if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw ParseError("'nodes' must be a list of strings");
        for (const json& n : doc["nodes"]) {
            if (!n.is_string()) throw ParseError("'nodes' must be a list of strings");
            out.netlist.nodes.push_back(n.get<std::string>());
        }
        if (!doc.contains("ground") || !doc["ground"].is_string()) throw ParseError("'ground' must be a string");
        out.netlist.ground = doc["ground"].get<std::string>();
        if (doc.contains("gmin_ohms") && !doc["gmin_ohms"].is_null()) {
            if (!doc["gmin_ohms"].is_number()) throw ParseError("'gmin_ohms' must be a number");
            out.netlist.gmin_ohms = doc["gmin_ohms"].get<double>();
        }
        if (!doc.contains("components") || !doc["components"].is_array()) {
            throw ParseError("'components' must be a list");
        }
        for (const json& c : doc["components"]) {
            if (!c.is_object() || !c.contains("id") || !c["id"].is_string() || !c.contains("type") ||
                !c["type"].is_string()) {
                throw ParseError("components need string 'id' and 'type'");
            }
            Component comp;
            comp.id = c["id"].get<std::string>();
            auto kind = parse_component_kind(c["type"].get<std::string>());
            if (!kind) throw ParseError("component '" + comp.id + "': unknown type '" + c["type"].get<std::string>() + "'");
            if (!c.contains("nodes") || !c["nodes"].is_array() || c["nodes"].size() != 2 || !c["nodes"][0].is_string() ||
                !c["nodes"][1].is_string()) {
                throw ParseError("component '" + comp.id + "': 'nodes' must hold two strings");
            }
            comp.terminals = {c["nodes"][0].get<std::string>(), c["nodes"][1].get<std::string>()};
            const json params = c.contains("params") ? c["params"] : json::object();
            if (!params.is_object()) throw ParseError("component '" + comp.id + "': 'params' must be an object");
            comp.params = parse_params(*kind, params, comp.id);
            out.netlist.components.push_back(std::move(comp));
        }
        if (doc.contains("faults")) {
            if (!doc["faults"].is_array()) throw ParseError("'faults' must be a list");
            for (const json& f : doc["faults"]) out.faults.push_back(parse_fault_json(f));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed netlist: ") + e.what());
    }
    out.netlist.validate();
    const ComposedCircuit circuit(out.netlist);
    const FaultSet check(circuit, out.faults);
    return out;
}

std::string serialize_netlist(const NetlistDocument& doc) {
    json out;
    out["nodes"] = doc.netlist.nodes;
    out["ground"] = doc.netlist.ground;
    if (doc.netlist.gmin_ohms) out["gmin_ohms"] = *doc.netlist.gmin_ohms;
    out["components"] = json::array();
    for (const Component& c : doc.netlist.components) {
        out["components"].push_back({{"id", c.id},
                                     {"type", to_string(c.kind())},
                                     {"nodes", {c.terminals[0], c.terminals[1]}},
                                     {"params", params_json(c)}});
    }
    if (!doc.faults.empty()) {
        out["faults"] = json::array();
        for (const FaultSpec& f : doc.faults) out["faults"].push_back(fault_json(f));
    }
    return out.dump(2);
}

std::vector<std::string> fixture_names() {
    return {"bridge_ref", "bridge_two_errors", "bridge_one_error", "power_channel", "power_channel_faulted"};
}

std::optional<NetlistDocument> fixture(const std::string& name) {
    if (name == "bridge_ref") return NetlistDocument{build_diode_bridge(), {}};
    if (name == "bridge_two_errors") return NetlistDocument{build_diode_bridge(), bridge_two_error_faults()};
    if (name == "bridge_one_error") return NetlistDocument{build_diode_bridge(), bridge_one_error_faults()};
    if (name == "power_channel") return NetlistDocument{build_power_channel(), {}};
    if (name == "power_channel_faulted") return NetlistDocument{build_power_channel(), power_channel_faults()};
    return std::nullopt;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

NetlistDocument load_netlist(const std::string& path_or_fixture) {
    if (auto doc = fixture(path_or_fixture)) return *doc;
    return parse_netlist(read_file(path_or_fixture));
}

std::vector<FaultSpec> parse_fault_list(const std::string& text) {
    if (text.empty() || text == "none") return {};
    if (std::filesystem::is_regular_file(text)) {
        json doc;
        try {
            doc = json::parse(read_file(text));
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("fault file is not valid JSON: ") + e.what());
        }
        if (doc.is_object() && doc.contains("faults")) doc = doc["faults"];
        if (!doc.is_array()) throw ParseError("fault file must hold a list of faults");
        std::vector<FaultSpec> out;
        for (const json& f : doc) out.push_back(parse_fault_json(f));
        return out;
    }
    std::vector<FaultSpec> out;
    std::stringstream items(text);
    std::string item;
    while (std::getline(items, item, ',')) {
        std::vector<std::string> parts;
        std::stringstream fields(item);
        std::string field;
        while (std::getline(fields, field, ':')) parts.push_back(field);
        if (parts.size() == 2 && parts[1] == "sign_flip") {
            out.push_back(sign_flip(parts[0]));
        } else if (parts.size() == 3 && parts[1] == "scale") {
            try {
                std::size_t used = 0;
                double factor = std::stod(parts[2], &used);
                if (used != parts[2].size()) throw std::invalid_argument("trailing text");
                out.push_back(scale(parts[0], factor));
            } catch (const std::exception&) {
                throw ParseError("bad scale factor in fault '" + item + "'");
            }
        } else {
            throw ParseError("bad fault '" + item + "' (expected ID:sign_flip or ID:scale:FACTOR)");
        }
    }
    return out;
}

}  // namespace nldiag
