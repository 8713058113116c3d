#include "chemputer/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <json.hpp>

#include "chemputer/json_util.hpp"

namespace chemputer {

namespace {

struct KindName {
    NodeKind kind;
    std::string_view name;
};

constexpr std::array<KindName, 14> kKindNames = {{
    {NodeKind::ReagentFlask, "ReagentFlask"},
    {NodeKind::Pump, "Pump"},
    {NodeKind::Valve, "Valve"},
    {NodeKind::Reactor, "Reactor"},
    {NodeKind::Separator, "Separator"},
    {NodeKind::Filter, "Filter"},
    {NodeKind::Rotavap, "Rotavap"},
    {NodeKind::SensorPhoton, "SensorPhoton"},
    {NodeKind::SensorConductivity, "SensorConductivity"},
    {NodeKind::Chromatograph, "Chromatograph"},
    {NodeKind::HeaterStirrerChiller, "HeaterStirrerChiller"},
    {NodeKind::Waste, "Waste"},
    {NodeKind::Product, "Product"},
    {NodeKind::Storage, "Storage"},
}};

}  // namespace

std::string_view to_string(NodeKind kind) {
    for (const auto& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "?";
}

std::optional<NodeKind> node_kind_from_name(std::string_view name) {
    for (const auto& k : kKindNames) {
        if (k.name == name) return k.kind;
    }
    return std::nullopt;
}

std::set<UnitOpKind> allowed_capabilities(NodeKind kind) {
    using U = UnitOpKind;
    switch (kind) {
        case NodeKind::Reactor: return {U::ReactHot, U::ReactCold, U::HeatStir, U::Chill};
        case NodeKind::Separator: return {U::Separate};
        case NodeKind::Rotavap: return {U::Evaporate, U::Dry, U::Distil, U::Crystallise, U::Sublime};
        case NodeKind::Filter: return {U::Filter};
        default: return {};
    }
}

bool holds_material(NodeKind kind) {
    switch (kind) {
        case NodeKind::ReagentFlask:
        case NodeKind::Reactor:
        case NodeKind::Separator:
        case NodeKind::Filter:
        case NodeKind::Rotavap:
        case NodeKind::Waste:
        case NodeKind::Product:
        case NodeKind::Storage:
            return true;
        default:
            return false;
    }
}

bool is_flow_through(NodeKind kind) {
    return kind == NodeKind::Valve || kind == NodeKind::Pump || kind == NodeKind::Chromatograph;
}

VesselClass vessel_class(NodeKind kind) {
    switch (kind) {
        case NodeKind::ReagentFlask: return VesselClass::Reagent;
        case NodeKind::Reactor:
        case NodeKind::Separator:
        case NodeKind::Filter:
        case NodeKind::Rotavap:
            return VesselClass::Process;
        case NodeKind::Product:
        case NodeKind::Storage:
            return VesselClass::Output;
        default:
            return VesselClass::None;
    }
}

int port_count(NodeKind kind) {
    switch (kind) {
        case NodeKind::Valve: return 12;
        case NodeKind::Waste: return 12;
        case NodeKind::Reactor:
        case NodeKind::Separator:
            return 6;
        case NodeKind::Pump:
        case NodeKind::Filter:
        case NodeKind::Rotavap:
        case NodeKind::Chromatograph:
        case NodeKind::Product:
        case NodeKind::Storage:
            return 4;
        default:
            return 2;
    }
}

const HardwareNode* HardwareGraph::find(const std::string& id) const {
    auto it = nodes.find(id);
    return it == nodes.end() ? nullptr : &it->second;
}

std::vector<std::string> HardwareGraph::successors(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& e : edges) {
        if (e.from == id) out.push_back(e.to);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void HardwareGraph::add_node(HardwareNode node) {
    std::string id = node.id;
    if (!nodes.emplace(id, std::move(node)).second) throw GraphError("duplicate node id '" + id + "'");
}

void HardwareGraph::add_edge(const std::string& from, const std::string& to, int from_port, int to_port) {
    edges.push_back({from, from_port, to, to_port});
}

bool HardwareGraph::remove_edge(const std::string& from, const std::string& to) {
    auto before = edges.size();
    edges.erase(std::remove_if(edges.begin(), edges.end(),
                               [&](const HardwareEdge& e) { return e.from == from && e.to == to; }),
                edges.end());
    return edges.size() != before;
}

bool weakly_connected(const HardwareGraph& graph) {
    if (graph.nodes.empty()) return true;
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : graph.edges) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    std::set<std::string> seen{graph.nodes.begin()->first};
    std::deque<std::string> q{graph.nodes.begin()->first};
    while (!q.empty()) {
        auto u = q.front();
        q.pop_front();
        for (const auto& v : adj[u]) {
            if (seen.insert(v).second) q.push_back(v);
        }
    }
    return seen.size() == graph.nodes.size();
}

std::vector<std::string> check_graph(const HardwareGraph& graph) {
    std::vector<std::string> problems;
    for (const auto& [id, node] : graph.nodes) {
        if (id != node.id) problems.push_back("node key '" + id + "' does not match id '" + node.id + "'");
        auto allowed = allowed_capabilities(node.kind);
        for (auto cap : node.capabilities) {
            if (!allowed.count(cap)) {
                problems.push_back("node '" + id + "' of kind " + std::string(to_string(node.kind)) +
                                   " cannot host " + std::string(to_string(cap)));
            }
        }
        if (node.capacity_ml < 0) problems.push_back("node '" + id + "' has negative capacity");
        if (holds_material(node.kind) && node.kind != NodeKind::Waste && !(node.capacity_ml > 0)) {
            problems.push_back("node '" + id + "' holds material but has no capacity");
        }
    }
    for (const auto& e : graph.edges) {
        const auto* a = graph.find(e.from);
        const auto* b = graph.find(e.to);
        if (!a || !b) {
            problems.push_back("edge " + e.from + "->" + e.to + " has an unknown endpoint");
            continue;
        }
        if (e.from_port < 0 || e.from_port >= port_count(a->kind)) {
            problems.push_back("edge " + e.from + "->" + e.to + " uses port " + std::to_string(e.from_port) +
                               " outside the arity of " + e.from);
        }
        if (e.to_port < 0 || e.to_port >= port_count(b->kind)) {
            problems.push_back("edge " + e.from + "->" + e.to + " uses port " + std::to_string(e.to_port) +
                               " outside the arity of " + e.to);
        }
    }
    if (!problems.empty()) return problems;

    std::vector<std::string> flasks, wastes;
    for (const auto& [id, node] : graph.nodes) {
        if (node.kind == NodeKind::ReagentFlask) flasks.push_back(id);
        if (node.kind == NodeKind::Waste) wastes.push_back(id);
    }
    if (wastes.empty()) problems.emplace_back("graph has no waste node");
    for (const auto& f : flasks) {
        bool ok = std::any_of(wastes.begin(), wastes.end(), [&](const std::string& w) { return route(graph, f, w).has_value(); });
        if (!ok) problems.push_back("reagent flask '" + f + "' cannot reach waste");
    }
    for (const auto& [id, node] : graph.nodes) {
        if (!holds_material(node.kind) || node.kind == NodeKind::ReagentFlask || node.kind == NodeKind::Waste) continue;
        bool fed = std::any_of(flasks.begin(), flasks.end(), [&](const std::string& f) { return route(graph, f, id).has_value(); });
        if (!fed) problems.push_back("node '" + id + "' is unreachable from every reagent flask");
    }
    if (!weakly_connected(graph)) problems.emplace_back("graph is not connected");
    return problems;
}

void validate_graph(const HardwareGraph& graph) {
    auto problems = check_graph(graph);
    if (problems.empty()) return;
    std::string msg = "invalid hardware graph '" + graph.name + "':";
    for (const auto& p : problems) msg += "\n  " + p;
    throw GraphError(msg);
}

namespace {

HardwareNode node(std::string id, NodeKind kind, double capacity, std::vector<std::string> sensors = {}) {
    HardwareNode n;
    n.id = std::move(id);
    n.kind = kind;
    n.capabilities = allowed_capabilities(kind);
    n.capacity_ml = capacity;
    n.sensors = std::move(sensors);
    return n;
}

// Assigns the next free port on each endpoint.
void connect(HardwareGraph& g, std::map<std::string, int>& used, const std::string& a, const std::string& b) {
    g.add_edge(a, b, used[a]++, used[b]++);
}

}  // namespace

HardwareGraph build_default_graph() {
    HardwareGraph g;
    g.name = "default_lab";
    for (const char* r : {"R1", "R2", "R3", "R4"}) g.add_node(node(r, NodeKind::ReagentFlask, 1000));
    for (const char* v : {"V1", "V2", "V3"}) g.add_node(node(v, NodeKind::Valve, 0));
    g.add_node(node("P1", NodeKind::Pump, 50));
    g.add_node(node("RX1", NodeKind::Reactor, 1000, {"Photon"}));
    g.add_node(node("HSC1", NodeKind::HeaterStirrerChiller, 0));
    g.add_node(node("SEP1", NodeKind::Separator, 1000, {"Conductivity"}));
    g.add_node(node("RV1", NodeKind::Rotavap, 1000));
    g.add_node(node("F1", NodeKind::Filter, 500));
    g.add_node(node("CH1", NodeKind::Chromatograph, 0));
    g.add_node(node("S1", NodeKind::Storage, 1000));
    g.add_node(node("W", NodeKind::Waste, 0));
    g.add_node(node("OUT", NodeKind::Product, 1000));

    std::map<std::string, int> used;
    auto both = [&](const char* a, const char* b) {
        connect(g, used, a, b);
        connect(g, used, b, a);
    };
    connect(g, used, "R1", "V1");
    connect(g, used, "R2", "V2");
    connect(g, used, "R3", "V3");
    connect(g, used, "R4", "V3");
    both("V1", "P1");
    both("P1", "V2");
    both("V2", "V3");
    both("V2", "RX1");
    connect(g, used, "HSC1", "RX1");
    both("V3", "SEP1");
    both("V3", "RV1");
    both("V2", "F1");
    both("V1", "S1");
    connect(g, used, "V1", "W");
    connect(g, used, "SEP1", "CH1");
    connect(g, used, "V3", "CH1");
    connect(g, used, "CH1", "OUT");
    return g;
}

std::optional<std::vector<std::string>> route(const HardwareGraph& graph, const std::string& src,
                                              const std::string& dst) {
    if (!graph.find(src) || !graph.find(dst)) throw PreconditionError("route endpoints must exist");
    if (src == dst) throw PreconditionError("route source and destination must differ");

    // Distance to dst over paths whose interior nodes are flow-through.
    std::map<std::string, std::vector<std::string>> preds;
    for (const auto& e : graph.edges) preds[e.to].push_back(e.from);
    std::map<std::string, int> dist{{dst, 0}};
    std::deque<std::string> q{dst};
    while (!q.empty()) {
        auto u = q.front();
        q.pop_front();
        if (u != dst && !is_flow_through(graph.nodes.at(u).kind)) continue;
        for (const auto& p : preds[u]) {
            if (dist.count(p)) continue;
            dist[p] = dist[u] + 1;
            q.push_back(p);
        }
    }
    if (!dist.count(src)) return std::nullopt;

    std::vector<std::string> path{src};
    std::string cur = src;
    while (cur != dst) {
        const int want = dist.at(cur) - 1;
        std::string chosen;
        for (const auto& v : graph.successors(cur)) {
            auto it = dist.find(v);
            if (it == dist.end() || it->second != want) continue;
            if (v != dst && !is_flow_through(graph.nodes.at(v).kind)) continue;
            chosen = v;
            break;
        }
        if (chosen.empty()) return std::nullopt;
        path.push_back(chosen);
        cur = chosen;
    }
    return path;
}

HardwareGraph load_graph(std::string_view json_text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw GraphError(std::string("graph file is not valid JSON: ") + e.what());
    }
    jsonutil::require_object(doc, "graph", {"name", "nodes", "edges"}, {"nodes", "edges"});
    HardwareGraph g;
    g.name = doc.value("name", std::string("graph"));
    for (const auto& jn : jsonutil::require_array(doc, "nodes")) {
        jsonutil::require_object(jn, "node", {"id", "kind", "capabilities", "capacity_ml", "sensors"}, {"id", "kind"});
        HardwareNode n;
        n.id = jsonutil::get_string(jn, "id");
        auto kind = node_kind_from_name(jsonutil::get_string(jn, "kind"));
        if (!kind) throw GraphError("node '" + n.id + "' has unknown kind '" + jn["kind"].get<std::string>() + "'");
        n.kind = *kind;
        if (jn.contains("capabilities")) {
            for (const auto& c : jsonutil::require_array(jn, "capabilities")) {
                auto op = c.is_string() ? unit_op_from_name(c.get<std::string>()) : std::nullopt;
                if (!op) throw GraphError("node '" + n.id + "' lists an unknown capability");
                n.capabilities.insert(*op);
            }
        } else {
            n.capabilities = allowed_capabilities(n.kind);
        }
        n.capacity_ml = jn.contains("capacity_ml") ? jsonutil::get_number(jn, "capacity_ml") : 0.0;
        if (jn.contains("sensors")) {
            for (const auto& s : jsonutil::require_array(jn, "sensors")) {
                if (!s.is_string()) throw GraphError("sensor names must be strings");
                n.sensors.push_back(s.get<std::string>());
            }
        }
        g.add_node(std::move(n));
    }
    for (const auto& je : jsonutil::require_array(doc, "edges")) {
        jsonutil::require_object(je, "edge", {"from", "from_port", "to", "to_port"}, {"from", "to"});
        HardwareEdge e;
        e.from = jsonutil::get_string(je, "from");
        e.to = jsonutil::get_string(je, "to");
        e.from_port = je.contains("from_port") ? static_cast<int>(jsonutil::get_number(je, "from_port")) : 0;
        e.to_port = je.contains("to_port") ? static_cast<int>(jsonutil::get_number(je, "to_port")) : 0;
        g.edges.push_back(std::move(e));
    }
    return g;
}

std::string save_graph(const HardwareGraph& graph) {
    using ojson = nlohmann::ordered_json;
    ojson doc;
    doc["name"] = graph.name;
    doc["nodes"] = ojson::array();
    for (const auto& [id, n] : graph.nodes) {
        ojson jn;
        jn["id"] = n.id;
        jn["kind"] = std::string(to_string(n.kind));
        jn["capabilities"] = ojson::array();
        for (auto c : n.capabilities) jn["capabilities"].push_back(std::string(to_string(c)));
        jn["capacity_ml"] = n.capacity_ml;
        jn["sensors"] = n.sensors;
        doc["nodes"].push_back(jn);
    }
    doc["edges"] = ojson::array();
    for (const auto& e : graph.edges) {
        doc["edges"].push_back({{"from", e.from}, {"from_port", e.from_port}, {"to", e.to}, {"to_port", e.to_port}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace chemputer
