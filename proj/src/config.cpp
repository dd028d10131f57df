#include "gtring/config.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <type_traits>

#include "gtring/errors.hpp"

namespace gtring {

std::string to_string(TransportKind t) {
  switch (t) {
    case TransportKind::kInProcess:
      return "inprocess";
    case TransportKind::kSim:
      return "sim";
    case TransportKind::kTcp:
      return "tcp";
  }
  return "?";
}

std::string to_string(Direction d) { return d == Direction::kForward ? "forward" : "alternate"; }

std::string to_string(ValueMode m) { return m == ValueMode::kFloat ? "float" : "integer"; }

TransportKind parse_transport(const std::string& s) {
  if (s == "inprocess") return TransportKind::kInProcess;
  if (s == "sim") return TransportKind::kSim;
  if (s == "tcp") return TransportKind::kTcp;
  throw ConfigError("transport: expected \"inprocess\", \"sim\" or \"tcp\", got \"" + s + "\"");
}

Direction parse_direction(const std::string& s) {
  if (s == "forward") return Direction::kForward;
  if (s == "alternate") return Direction::kAlternate;
  throw ConfigError("direction: expected \"forward\" or \"alternate\", got \"" + s + "\"");
}

ValueMode parse_value_mode(const std::string& s) {
  if (s == "float") return ValueMode::kFloat;
  if (s == "integer") return ValueMode::kIntegerLattice;
  throw ConfigError("value_mode: expected \"float\" or \"integer\", got \"" + s + "\"");
}

void ExperimentConfig::validate() const {
  auto positive = [](std::uint64_t v, const char* field) {
    if (v < 1) throw ConfigError(std::string(field) + ": must be >= 1");
  };
  positive(n_k, "n_k");
  positive(n_w, "n_w");
  positive(world_size, "world_size");
  positive(subring_size, "subring_size");
  positive(lanes, "lanes");
  positive(measurements, "measurements");
  if (std::uint64_t{n_k} * n_w > 0xFFFF) throw ConfigError("n_k * n_w: combined index space too large");
  if (world_size % subring_size != 0) {
    throw ConfigError("subring_size: " + std::to_string(subring_size) + " does not divide world_size " +
                      std::to_string(world_size));
  }
  if (lanes >= 1000) throw ConfigError("lanes: must be < 1000 (tag stride)");
  if (accumulate && subring_size > n()) {
    throw ConfigError("subring_size: " + std::to_string(subring_size) + " exceeds N = " + std::to_string(n()) +
                      "; some rank would own an empty slice");
  }
  if (!(deadlock_timeout_s > 0)) throw ConfigError("deadlock_timeout_s: must be > 0");
  try {
    link.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("link: ") + e.what());
  }
  if (rendezvous.host.empty()) throw ConfigError("rendezvous.host: must not be empty");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json link{{"nic_bandwidth_Bps", c.link.nic_bandwidth_Bps},
                      {"intra_bandwidth_Bps", c.link.intra_bandwidth_Bps},
                      {"latency_s", c.link.latency_s},
                      {"ranks_per_node", c.link.ranks_per_node}};
  if (c.link.charged_message_bytes) link["charged_message_bytes"] = *c.link.charged_message_bytes;
  nlohmann::json memory = nlohmann::json::object();
  if (c.memory.gt_entries) memory["gt_entries"] = *c.memory.gt_entries;
  if (c.memory.gsigma_matrix_bytes) memory["gsigma_matrix_bytes"] = *c.memory.gsigma_matrix_bytes;
  j = nlohmann::json{{"n_k", c.n_k},
                     {"n_w", c.n_w},
                     {"world_size", c.world_size},
                     {"subring_size", c.subring_size},
                     {"lanes", c.lanes},
                     {"measurements", c.measurements},
                     {"seed", c.seed},
                     {"value_mode", to_string(c.value_mode)},
                     {"transport", to_string(c.transport)},
                     {"direction", to_string(c.direction)},
                     {"accumulate", c.accumulate},
                     {"link", link},
                     {"rendezvous", {{"host", c.rendezvous.host}, {"port", c.rendezvous.port}}},
                     {"deadlock_timeout_s", c.deadlock_timeout_s},
                     {"memory", memory},
                     {"output_dir", c.output_dir}};
}

namespace {

using Handler = std::function<void(const nlohmann::json&)>;

void parse_object(const nlohmann::json& j, const std::string& where, const std::map<std::string, Handler>& handlers) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string field = where.empty() ? key : where + "." + key;
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError(field + ": unknown key");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field + ": " + e.what());
    }
  }
}

template <typename T>
Handler into(T& target) {
  return [&target](const nlohmann::json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected true or false");
      target = v.get<bool>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      const auto raw = v.get<std::uint64_t>();
      if (raw > std::numeric_limits<T>::max()) throw ConfigError("value out of range");
      target = static_cast<T>(raw);
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw ConfigError("expected an integer");
      target = v.get<int>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("expected a number");
      target = v.get<double>();
    } else {
      if (!v.is_string()) throw ConfigError("expected a string");
      target = v.get<std::string>();
    }
  };
}

// Rethrows a ConfigError from a handler with the field name attached.
Handler named(const std::string& field, Handler h) {
  return [field, h = std::move(h)](const nlohmann::json& v) {
    try {
      h(v);
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      if (what.rfind(field, 0) == 0) throw;
      throw ConfigError(field + ": " + what);
    }
  };
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  std::string value_mode = to_string(c.value_mode);
  std::string transport = to_string(c.transport);
  std::string direction = to_string(c.direction);

  auto link_handler = [&c](const nlohmann::json& v) {
    parse_object(v, "link",
                 {{"nic_bandwidth_Bps", named("link.nic_bandwidth_Bps", into(c.link.nic_bandwidth_Bps))},
                  {"intra_bandwidth_Bps", named("link.intra_bandwidth_Bps", into(c.link.intra_bandwidth_Bps))},
                  {"latency_s", named("link.latency_s", into(c.link.latency_s))},
                  {"ranks_per_node", named("link.ranks_per_node", into(c.link.ranks_per_node))},
                  {"charged_message_bytes", named("link.charged_message_bytes", [&c](const nlohmann::json& x) {
                     if (x.is_null()) {
                       c.link.charged_message_bytes.reset();
                       return;
                     }
                     std::uint64_t bytes = 0;
                     into(bytes)(x);
                     c.link.charged_message_bytes = bytes;
                   })}});
  };
  auto rendezvous_handler = [&c](const nlohmann::json& v) {
    parse_object(v, "rendezvous",
                 {{"host", named("rendezvous.host", into(c.rendezvous.host))},
                  {"port", named("rendezvous.port", into(c.rendezvous.port))}});
  };
  auto memory_handler = [&c](const nlohmann::json& v) {
    auto optional_into = [](std::optional<std::uint64_t>& target) {
      return [&target](const nlohmann::json& x) {
        if (x.is_null()) {
          target.reset();
          return;
        }
        std::uint64_t value = 0;
        into(value)(x);
        target = value;
      };
    };
    parse_object(v, "memory",
                 {{"gt_entries", named("memory.gt_entries", optional_into(c.memory.gt_entries))},
                  {"gsigma_matrix_bytes",
                   named("memory.gsigma_matrix_bytes", optional_into(c.memory.gsigma_matrix_bytes))}});
  };

  parse_object(j, "",
               {{"n_k", named("n_k", into(c.n_k))},
                {"n_w", named("n_w", into(c.n_w))},
                {"world_size", named("world_size", into(c.world_size))},
                {"subring_size", named("subring_size", into(c.subring_size))},
                {"lanes", named("lanes", into(c.lanes))},
                {"measurements", named("measurements", into(c.measurements))},
                {"seed", named("seed", into(c.seed))},
                {"value_mode", named("value_mode", into(value_mode))},
                {"transport", named("transport", into(transport))},
                {"direction", named("direction", into(direction))},
                {"accumulate", named("accumulate", into(c.accumulate))},
                {"link", link_handler},
                {"rendezvous", rendezvous_handler},
                {"deadlock_timeout_s", named("deadlock_timeout_s", into(c.deadlock_timeout_s))},
                {"memory", memory_handler},
                {"output_dir", named("output_dir", into(c.output_dir))}});
  c.value_mode = parse_value_mode(value_mode);
  c.transport = parse_transport(transport);
  c.direction = parse_direction(direction);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace gtring
