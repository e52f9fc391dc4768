#pragma once

#include "nldiag/circuit.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nldiag {

/// Raised for malformed netlist documents or command-line values.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NetlistDocument {
    Netlist netlist;
    std::vector<FaultSpec> faults;
    bool operator==(const NetlistDocument&) const = default;
};

/// Parses the JSON netlist format. Syntax and type errors raise ParseError;
/// semantic errors (unknown nodes, bad parameters) raise ValidationError.
NetlistDocument parse_netlist(const std::string& text);
std::string serialize_netlist(const NetlistDocument& doc);

/// Built-in fixtures: bridge_ref, bridge_two_errors, bridge_one_error,
/// power_channel, power_channel_faulted.
std::optional<NetlistDocument> fixture(const std::string& name);
std::vector<std::string> fixture_names();

/// Resolves a fixture name or reads a netlist file.
NetlistDocument load_netlist(const std::string& path_or_fixture);

/// Reads either a JSON fault list file or an inline list such as
/// "D1_gmin:sign_flip,D_L:scale:0.95". "none" yields an empty list.
std::vector<FaultSpec> parse_fault_list(const std::string& text);

}  // namespace nldiag
