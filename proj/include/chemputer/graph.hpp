#pragma once
// Hardware graph G = (V, E): typed module nodes joined by directed flow edges.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "chemputer/program.hpp"

namespace chemputer {

enum class NodeKind {
    ReagentFlask,
    Pump,
    Valve,
    Reactor,
    Separator,
    Filter,
    Rotavap,
    SensorPhoton,
    SensorConductivity,
    Chromatograph,
    HeaterStirrerChiller,
    Waste,
    Product,
    Storage,
};

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> node_kind_from_name(std::string_view name);

/// Unit operations a node of this kind may host (movement ops excluded).
std::set<UnitOpKind> allowed_capabilities(NodeKind kind);
/// Nodes that hold material and therefore become tape cells.
bool holds_material(NodeKind kind);
/// Nodes material may flow through on a route.
bool is_flow_through(NodeKind kind);

enum class VesselClass { Reagent, Process, Output, None };
VesselClass vessel_class(NodeKind kind);

struct HardwareNode {
    std::string id;
    NodeKind kind = NodeKind::Valve;
    std::set<UnitOpKind> capabilities;
    double capacity_ml = 0.0;  // 0: not applicable
    /// Sensors mounted on this node (e.g. "Photon", "Conductivity").
    std::vector<std::string> sensors;

    bool operator==(const HardwareNode&) const = default;
};

struct HardwareEdge {
    std::string from;
    int from_port = 0;
    std::string to;
    int to_port = 0;

    bool operator==(const HardwareEdge&) const = default;
};

class GraphError : public Error {
public:
    using Error::Error;
};

struct HardwareGraph {
    std::string name;
    std::map<std::string, HardwareNode> nodes;
    std::vector<HardwareEdge> edges;

    const HardwareNode* find(const std::string& id) const;
    /// Sorted successor ids.
    std::vector<std::string> successors(const std::string& id) const;
    void add_node(HardwareNode node);
    void add_edge(const std::string& from, const std::string& to, int from_port = 0, int to_port = 0);
    bool remove_edge(const std::string& from, const std::string& to);

    bool operator==(const HardwareGraph&) const = default;
};

/// Structural problems with the graph; empty when all invariants hold.
std::vector<std::string> check_graph(const HardwareGraph& graph);
/// Throws GraphError listing every problem found by check_graph.
void validate_graph(const HardwareGraph& graph);
bool weakly_connected(const HardwareGraph& graph);

/// Node arity per kind (maximum port index + 1).
int port_count(NodeKind kind);

HardwareGraph build_default_graph();

/// Shortest directed route whose interior nodes are all flow-through
/// (valves, pumps, in-line chromatograph). Ties go to the lexicographically
/// smallest node-id sequence. nullopt when no route exists.
std::optional<std::vector<std::string>> route(const HardwareGraph& graph, const std::string& src,
                                              const std::string& dst);

HardwareGraph load_graph(std::string_view json_text);
std::string save_graph(const HardwareGraph& graph);

}  // namespace chemputer
