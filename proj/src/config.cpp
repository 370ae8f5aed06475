#include "leosim/config.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

extern char** environ;

namespace leosim {

using nlohmann::json;

namespace {

// Reads the members of one JSON object, remembering which keys were used so
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() || it->is_null() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) {
                throw ConfigError(field(key), "expected a number");
            }
            out = v->get<double>();
        }
    }

    template <typename Int>
    void integer(const std::string& key, Int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) {
                throw ConfigError(field(key), "expected an integer");
            }
            if constexpr (std::is_unsigned_v<Int>) {
                if (v->is_number_unsigned()) {
                    out = static_cast<Int>(v->get<std::uint64_t>());
                    return;
                }
                if (v->get<std::int64_t>() < 0) {
                    throw ConfigError(field(key), "must be non-negative");
                }
            }
            const auto raw = v->get<std::int64_t>();
            if constexpr (std::is_signed_v<Int>) {
                if (raw < std::numeric_limits<Int>::min() || raw > std::numeric_limits<Int>::max()) {
                    throw ConfigError(field(key), "out of range");
                }
            }
            out = static_cast<Int>(raw);
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) {
                throw ConfigError(field(key), "expected true or false");
            }
            out = v->get<bool>();
        }
    }

    bool string(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) {
                throw ConfigError(field(key), "expected a string");
            }
            out = v->get<std::string>();
            return true;
        }
        return false;
    }

    std::optional<Section> child(const std::string& key) {
        if (const json* v = find(key)) {
            return Section(*v, field(key));
        }
        return std::nullopt;
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(field(key), "unknown key");
            }
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

json parse_scalar(const std::string& text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded() || v.is_object()) {
        return json(text);
    }
    return v;
}

void apply_env(json& root, const EnvMap& env) {
    constexpr std::string_view prefix = "LEOSIM_";
    for (const auto& [name, value] : env) {
        // LEOSIM_DATA_DIR locates the bundled data; it is not a config key.
        if (name.rfind(prefix, 0) != 0 || name == "LEOSIM_DATA_DIR") {
            continue;
        }
        const std::string rest = name.substr(prefix.size());
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = rest.find("__", start);
            parts.push_back(lower(rest.substr(start, pos - start)));
            if (pos == std::string::npos) {
                break;
            }
            start = pos + 2;
        }
        json* node = &root;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            json& next = (*node)[parts[i]];
            if (next.is_null()) {
                next = json::object();
            }
            if (!next.is_object()) {
                throw ConfigError(name, "override path crosses a non-object key");
            }
            node = &next;
        }
        (*node)[parts.back()] = parse_scalar(value);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.empty() || path.is_absolute() || base.empty()) {
        return path;
    }
    return (base / path).lexically_normal();
}

void read_radio(Section& parent, const std::string& key, RadioParams& radio) {
    if (auto s = parent.child(key)) {
        s->number("eirp_dbw", radio.eirp_dbw);
        s->number("gain_over_temp_dbk", radio.gain_over_temp_dbk);
        s->number("carrier_hz", radio.carrier_hz);
        s->number("bandwidth_hz", radio.bandwidth_hz);
        s->finish();
    }
}

json radio_json(const RadioParams& r) {
    return {{"eirp_dbw", r.eirp_dbw},
            {"gain_over_temp_dbk", r.gain_over_temp_dbk},
            {"carrier_hz", r.carrier_hz},
            {"bandwidth_hz", r.bandwidth_hz}};
}

} // namespace

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::shortest_path:
        return "shortest_path";
    case PolicyKind::q_routing:
        return "q_routing";
    case PolicyKind::madrl:
        return "madrl";
    }
    return "?";
}

PolicyKind parse_policy_kind(std::string_view text) {
    for (auto k : {PolicyKind::shortest_path, PolicyKind::q_routing, PolicyKind::madrl}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("routing.policy", "expected shortest_path, q_routing or madrl, got '" + std::string(text) + "'");
}

QRoutingParams LearningConfig::q_routing() const {
    QRoutingParams p;
    p.alpha = alpha;
    p.gamma = gamma;
    p.epsilon = epsilon;
    p.reward = reward;
    return p;
}

MadrlParams LearningConfig::madrl() const {
    MadrlParams p;
    p.hidden = hidden;
    p.learning_rate = learning_rate;
    p.gamma = gamma;
    p.batch_size = batch_size;
    p.replay_capacity = replay_capacity;
    p.target_sync = target_sync;
    p.train_interval = train_interval;
    p.double_q = double_q;
    p.phase = phase;
    p.epsilon = epsilon;
    p.reward = reward;
    p.probe_count = probe_count;
    return p;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("LEOSIM_DATA_DIR")) {
        return env;
    }
    return LEOSIM_DEFAULT_DATA_DIR;
}

std::filesystem::path ScenarioConfig::gateway_file() const {
    return gateways.file.empty() ? default_data_dir() / "gateways.csv" : gateways.file;
}

std::filesystem::path ScenarioConfig::modcod_path() const {
    return modcod_file.empty() ? default_data_dir() / "modcod.csv" : modcod_file;
}

void ScenarioConfig::validate() const {
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
        throw ConfigError("duration_s", "must be finite and >= 0");
    }
    try {
        constellation.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("constellation." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
    if (gateways.count < 2) {
        throw ConfigError("gateways.count", "at least 2 gateways are required");
    }
    if (!(gateways.min_elevation_deg >= 0.0 && gateways.min_elevation_deg < 90.0)) {
        throw ConfigError("gateways.min_elevation_deg", "must lie in [0, 90)");
    }
    if (!(update_interval_s > 0.0) || !std::isfinite(update_interval_s)) {
        throw ConfigError("topology.update_interval_s", "must be > 0");
    }
    if (!(load_fraction > 0.0 && load_fraction <= 1.5)) {
        throw ConfigError("traffic.load_fraction", "must lie in (0, 1.5]");
    }
    if (packet_bits <= 0) {
        throw ConfigError("traffic.packet_bits", "must be > 0");
    }
    if (queue_capacity < 0) {
        throw ConfigError("queue.capacity", "must be >= 0");
    }
    if (ttl_hops < 1) {
        throw ConfigError("queue.ttl_hops", "must be >= 1");
    }
    isl.validate("radio.isl");
    gsl_up.validate("radio.gsl_up");
    gsl_down.validate("radio.gsl_down");
    learning.epsilon.validate();
    learning.reward.validate();
    if (policy == PolicyKind::q_routing) {
        learning.q_routing().validate();
    }
    if (policy == PolicyKind::madrl) {
        learning.madrl().validate();
    }
}

EnvMap leosim_environment() {
    EnvMap env;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        if (entry.rfind("LEOSIM_", 0) != 0) {
            continue;
        }
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = entry.substr(0, eq);
        if (key == "LEOSIM_DATA_DIR") {
            continue; // locates bundled data, not a config key
        }
        env[key] = entry.substr(eq + 1);
    }
    return env;
}

ScenarioConfig parse_config(const std::string& text, const EnvMap& env, const std::filesystem::path& base_dir) {
    json root;
    if (trim(text).empty()) {
        root = json::object();
    } else {
        try {
            root = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
        }
    }
    apply_env(root, env);

    ScenarioConfig c;
    Section top(root, "");
    top.integer("seed", c.seed);
    top.number("duration_s", c.duration_s);
    std::string s;
    if (top.string("output_dir", s)) {
        c.output_dir = resolve(base_dir, s);
    }

    if (auto sec = top.child("constellation")) {
        std::string preset;
        if (sec->string("preset", preset)) {
            try {
                c.constellation = constellation_preset(preset);
            } catch (const ConfigError&) {
                throw ConfigError("constellation.preset", "unknown preset '" + preset + "'");
            }
            c.preset = preset;
        }
        bool custom = false;
        auto mark = [&](const char* key) { custom = custom || sec->find(key) != nullptr; };
        for (const char* key : {"num_planes", "sats_per_plane", "altitude_km", "inclination_deg", "walker",
                                "phasing_offset_deg"}) {
            mark(key);
        }
        sec->integer("num_planes", c.constellation.num_planes);
        sec->integer("sats_per_plane", c.constellation.sats_per_plane);
        double v = c.constellation.altitude_m / 1e3;
        sec->number("altitude_km", v);
        c.constellation.altitude_m = v * 1e3;
        v = rad_to_deg(c.constellation.inclination_rad);
        sec->number("inclination_deg", v);
        c.constellation.inclination_rad = deg_to_rad(v);
        if (sec->string("walker", s)) {
            try {
                c.constellation.walker = parse_walker_kind(s);
            } catch (const ConfigError&) {
                throw ConfigError("constellation.walker", "expected star or delta, got '" + s + "'");
            }
        }
        if (sec->find("phasing_offset_deg")) {
            double ph = 0.0;
            sec->number("phasing_offset_deg", ph);
            c.constellation.phasing_offset_rad = deg_to_rad(ph);
        }
        if (custom) {
            c.constellation.name = c.preset + "+custom";
        }
        sec->finish();
    }

    if (auto sec = top.child("gateways")) {
        if (sec->string("file", s)) {
            c.gateways.file = resolve(base_dir, s);
        }
        sec->integer("count", c.gateways.count);
        sec->number("min_elevation_deg", c.gateways.min_elevation_deg);
        sec->finish();
    }
    if (auto sec = top.child("topology")) {
        sec->number("update_interval_s", c.update_interval_s);
        sec->boolean("frozen", c.frozen_topology);
        sec->finish();
    }
    if (auto sec = top.child("traffic")) {
        sec->number("load_fraction", c.load_fraction);
        sec->integer("packet_bits", c.packet_bits);
        sec->finish();
    }
    if (auto sec = top.child("queue")) {
        sec->integer("capacity", c.queue_capacity);
        sec->integer("ttl_hops", c.ttl_hops);
        sec->finish();
    }
    if (auto sec = top.child("routing")) {
        if (sec->string("policy", s)) {
            c.policy = parse_policy_kind(s);
        }
        if (sec->string("scheme", s)) {
            c.scheme = parse_weight_scheme(s);
        }
        sec->finish();
    }
    if (auto sec = top.child("learning")) {
        LearningConfig& l = c.learning;
        sec->number("alpha", l.alpha);
        sec->number("gamma", l.gamma);
        sec->number("epsilon_start", l.epsilon.start);
        sec->number("epsilon_end", l.epsilon.end);
        sec->integer("epsilon_horizon", l.epsilon.horizon);
        sec->number("delivery_bonus", l.reward.delivery_bonus);
        sec->number("hop_cost", l.reward.hop_cost);
        sec->number("drop_penalty", l.reward.drop_penalty);
        sec->integer("batch_size", l.batch_size);
        sec->integer("replay_capacity", l.replay_capacity);
        sec->integer("target_sync", l.target_sync);
        sec->integer("train_interval", l.train_interval);
        sec->boolean("double_q", l.double_q);
        sec->number("learning_rate", l.learning_rate);
        if (const json* h = sec->find("hidden")) {
            if (!h->is_array()) {
                throw ConfigError("learning.hidden", "expected an array of layer widths");
            }
            l.hidden.clear();
            for (const json& w : *h) {
                if (!w.is_number_integer()) {
                    throw ConfigError("learning.hidden", "layer widths must be integers");
                }
                l.hidden.push_back(w.get<int>());
            }
        }
        if (sec->string("phase", s)) {
            l.phase = parse_madrl_phase(s);
        }
        if (sec->string("import_path", s)) {
            l.import_path = resolve(base_dir, s);
        }
        sec->integer("probe_count", l.probe_count);
        sec->finish();
    }
    if (auto sec = top.child("radio")) {
        if (sec->string("modcod_file", s)) {
            c.modcod_file = resolve(base_dir, s);
        }
        read_radio(*sec, "isl", c.isl);
        read_radio(*sec, "gsl_up", c.gsl_up);
        read_radio(*sec, "gsl_down", c.gsl_down);
        sec->finish();
    }
    if (auto sec = top.child("output")) {
        sec->boolean("packets", c.output.packets);
        sec->boolean("queues", c.output.queues);
        sec->boolean("routes", c.output.routes);
        sec->boolean("charts", c.output.charts);
        sec->boolean("trace", c.output.trace);
        sec->boolean("save_models", c.output.save_models);
        sec->finish();
    }
    top.finish();
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path, const EnvMap& env) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError("<file>", e.what());
    }
    return parse_config(text, env, path.parent_path());
}

json config_to_json(const ScenarioConfig& c) {
    const ConstellationSpec& k = c.constellation;
    json constellation = {{"preset", c.preset},
                          {"num_planes", k.num_planes},
                          {"sats_per_plane", k.sats_per_plane},
                          {"altitude_km", k.altitude_m / 1e3},
                          {"inclination_deg", rad_to_deg(k.inclination_rad)},
                          {"walker", std::string(to_string(k.walker))},
                          {"phasing_offset_deg", rad_to_deg(k.phasing())}};
    const LearningConfig& l = c.learning;
    json learning = {{"alpha", l.alpha},
                     {"gamma", l.gamma},
                     {"epsilon_start", l.epsilon.start},
                     {"epsilon_end", l.epsilon.end},
                     {"epsilon_horizon", l.epsilon.horizon},
                     {"delivery_bonus", l.reward.delivery_bonus},
                     {"hop_cost", l.reward.hop_cost},
                     {"drop_penalty", l.reward.drop_penalty},
                     {"batch_size", l.batch_size},
                     {"replay_capacity", l.replay_capacity},
                     {"target_sync", l.target_sync},
                     {"train_interval", l.train_interval},
                     {"double_q", l.double_q},
                     {"learning_rate", l.learning_rate},
                     {"hidden", l.hidden},
                     {"phase", std::string(to_string(l.phase))},
                     {"import_path", l.import_path.string()},
                     {"probe_count", l.probe_count}};
    return {{"seed", c.seed},
            {"duration_s", c.duration_s},
            {"output_dir", c.output_dir.string()},
            {"constellation", constellation},
            {"gateways",
             {{"file", c.gateway_file().string()},
              {"count", c.gateways.count},
              {"min_elevation_deg", c.gateways.min_elevation_deg}}},
            {"topology", {{"update_interval_s", c.update_interval_s}, {"frozen", c.frozen_topology}}},
            {"traffic", {{"load_fraction", c.load_fraction}, {"packet_bits", c.packet_bits}}},
            {"queue", {{"capacity", c.queue_capacity}, {"ttl_hops", c.ttl_hops}}},
            {"routing", {{"policy", std::string(to_string(c.policy))}, {"scheme", std::string(to_string(c.scheme))}}},
            {"learning", learning},
            {"radio",
             {{"modcod_file", c.modcod_path().string()},
              {"isl", radio_json(c.isl)},
              {"gsl_up", radio_json(c.gsl_up)},
              {"gsl_down", radio_json(c.gsl_down)}}},
            {"output",
             {{"packets", c.output.packets},
              {"queues", c.output.queues},
              {"routes", c.output.routes},
              {"charts", c.output.charts},
              {"trace", c.output.trace},
              {"save_models", c.output.save_models}}}};
}

} // namespace leosim
