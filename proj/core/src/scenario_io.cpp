#include "waterlab/errors.hpp"
#include "waterlab/scenario.hpp"
#include "waterlab/text.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace waterlab {

namespace {

constexpr std::array<std::string_view, 4> kSingletons{"sim", "reference", "controller", "channel"};
constexpr std::array<std::string_view, 3> kKeyed{"pipe", "node", "fault"};

bool is_singleton(std::string_view type) {
    return std::find(kSingletons.begin(), kSingletons.end(), type) != kSingletons.end();
}

bool is_keyed(std::string_view type) { return std::find(kKeyed.begin(), kKeyed.end(), type) != kKeyed.end(); }

bool valid_identifier(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    });
}

std::string section_label(const RawSection& s) { return s.id.empty() ? "[" + s.type + "]" : "[" + s.type + " " + s.id + "]"; }

// Reads typed values out of one section, recording problems instead of
// throwing, and remembers which keys were consumed.
class SectionReader {
public:
    SectionReader(const RawSection& section, std::vector<std::string>& problems)
        : section_(section), problems_(problems) {}

    const RawEntry* find(std::string_view key) {
        for (const auto& e : section_.entries) {
            if (e.key == key) {
                used_.insert(e.key);
                return &e;
            }
        }
        return nullptr;
    }

    void number(std::string_view key, double& out, bool required = false) {
        if (const RawEntry* e = find(key)) {
            if (auto v = text::parse_double(e->value)) {
                out = *v;
            } else {
                problem(*e, "'" + e->value + "' is not a number");
            }
        } else if (required) {
            missing(key);
        }
    }

    void optional_number(std::string_view key, std::optional<double>& out, std::string_view none_word) {
        if (const RawEntry* e = find(key)) {
            if (e->value == none_word) {
                out.reset();
            } else if (auto v = text::parse_double(e->value)) {
                out = *v;
            } else {
                problem(*e, "'" + e->value + "' is neither a number nor '" + std::string(none_word) + "'");
            }
        }
    }

    template <typename Int>
    void integer(std::string_view key, Int& out) {
        if (const RawEntry* e = find(key)) {
            if (auto v = text::parse_integer<Int>(e->value)) {
                out = *v;
            } else {
                problem(*e, "'" + e->value + "' is not a nonnegative integer");
            }
        }
    }

    void string(std::string_view key, std::string& out, bool required = false) {
        if (const RawEntry* e = find(key)) {
            out = e->value;
        } else if (required) {
            missing(key);
        }
    }

    void list(std::string_view key, std::vector<double>& out) {
        const RawEntry* e = find(key);
        if (!e) return;
        out.clear();
        std::string_view rest = e->value;
        while (true) {
            const auto comma = rest.find(',');
            const auto item = text::trim(rest.substr(0, comma));
            if (auto v = text::parse_double(item)) {
                out.push_back(*v);
            } else {
                problem(*e, "'" + std::string(item) + "' is not a number");
            }
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
    }

    void forbid(std::string_view key, const std::string& why) {
        for (const auto& e : section_.entries) {
            if (e.key == key) {
                used_.insert(e.key);
                problem(e, "key '" + e.key + "' " + why);
            }
        }
    }

    void problem(const RawEntry& e, const std::string& msg) {
        problems_.push_back("line " + std::to_string(e.line) + ": " + section_label(section_) + " " + e.key + ": " + msg);
    }

    void missing(std::string_view key) {
        problems_.push_back("line " + std::to_string(section_.line) + ": " + section_label(section_) +
                            " is missing required key '" + std::string(key) + "'");
    }

    void report_unknown() {
        for (const auto& e : section_.entries) {
            if (!used_.count(e.key)) {
                problems_.push_back("line " + std::to_string(e.line) + ": unknown key '" + e.key + "' in " +
                                    section_label(section_));
            }
        }
    }

    const RawSection& section() const { return section_; }

private:
    const RawSection& section_;
    std::vector<std::string>& problems_;
    std::set<std::string> used_;
};

void read_sim(SectionReader& r, SimSettings& sim) {
    r.string("name", sim.name);
    r.number("horizon", sim.horizon);
    r.number("output_interval", sim.output_interval);
    r.number("max_step", sim.max_step);
    r.number("settle_time", sim.settle_time);
    r.integer("seed", sim.seed);
}

void read_reference(SectionReader& r, ReferenceSource& ref) {
    double omega = 0.0;
    r.number("omega", omega, true);
    if (const RawEntry* csv = r.find("demand_csv")) {
        for (const char* k : {"b0", "b1", "b2", "b3", "a1", "a2", "a3"}) {
            r.forbid(k, "cannot be combined with demand_csv");
        }
        ref = DemandCsvReference{csv->value, omega};
        return;
    }
    FourierCoefficients c;
    c.omega = omega;
    r.number("b0", c.mean, true);
    for (int i = 0; i < 3; ++i) {
        r.number("b" + std::to_string(i + 1), c.cos_terms[static_cast<std::size_t>(i)]);
        r.number("a" + std::to_string(i + 1), c.sin_terms[static_cast<std::size_t>(i)]);
    }
    ref = c;
}

void read_controller(SectionReader& r, ControllerConfig& c) {
    if (const RawEntry* e = r.find("mode")) {
        if (auto m = parse_control_mode(e->value)) {
            c.mode = *m;
        } else {
            r.problem(*e, "mode must be exact_sontag or polynomial");
        }
    }
    r.optional_number("u_bar", c.u_bar, "auto");
    r.number("u_min", c.u_min);
    r.number("u_max", c.u_max);
    r.number("sample_period", c.sample_period);
    r.integer("poly_degree", c.poly_degree);
    r.number("epsilon_band", c.epsilon_band);
    r.number("delta_bound", c.delta_bound);
}

void read_channel(SectionReader& r, ChannelSpec& c) {
    r.number("drop_probability", c.drop_probability);
    r.number("latency_min", c.latency_min);
    r.number("latency_max", c.latency_max);
}

void read_pipe(SectionReader& r, PipeConfig& p) {
    p.id = r.section().id;
    r.number("length", p.spec.length, true);
    r.number("diameter", p.spec.diameter, true);
    r.number("upstream_head", p.spec.upstream_head, true);
    r.number("downstream_head", p.spec.downstream_head, true);
    r.number("kinematic_viscosity", p.spec.kinematic_viscosity);
    r.number("gravity", p.spec.gravity);
    r.optional_number("friction_factor", p.spec.friction_factor, "laminar");
    r.number("initial_flow", p.initial_flow);
    r.number("initial_valve", p.initial_valve);
    r.number("drive_ripple", p.drive_ripple);
    r.number("drive_ripple_period", p.drive_ripple_period);
}

void read_node(SectionReader& r, NodeSpec& n) {
    n.id = r.section().id;
    if (const RawEntry* e = r.find("role")) {
        if (auto role = parse_node_role(e->value)) {
            n.role = *role;
        } else {
            r.problem(*e, "role must be sensor, controller, actuator or detector");
        }
    } else {
        r.missing("role");
    }
    r.string("pipe", n.pipe, true);

    const std::string why = "does not apply to a " + to_string(n.role) + " node";
    static const std::array<const char*, 2> sensor_keys{"sample_period", "noise_rms"};
    static const std::array<const char*, 9> detector_keys{"sensor",      "neighbor",       "staleness",
                                                          "window",      "forgetting",     "threshold_k",
                                                          "regularization", "warmup",      "report_to"};
    if (n.role == NodeRole::Sensor) {
        r.optional_number("sample_period", n.sample_period, "default");
        r.number("noise_rms", n.noise_rms);
    } else {
        for (const char* k : sensor_keys) r.forbid(k, why);
    }
    if (n.role == NodeRole::Detector) {
        r.string("sensor", n.sensor, true);
        r.string("neighbor", n.neighbor);
        r.number("staleness", n.staleness_bound);
        r.integer("window", n.detector.window);
        r.number("forgetting", n.detector.forgetting);
        r.number("threshold_k", n.detector.threshold_k);
        r.number("regularization", n.detector.regularization);
        if (const RawEntry* e = r.find("warmup")) {
            if (e->value == "default") {
                n.detector.warmup.reset();
            } else if (auto v = text::parse_integer<std::size_t>(e->value)) {
                n.detector.warmup = *v;
            } else {
                r.problem(*e, "'" + e->value + "' is neither a nonnegative integer nor 'default'");
            }
        }
        r.string("report_to", n.report_to);
    } else {
        for (const char* k : detector_keys) r.forbid(k, why);
    }
}

void read_fault(SectionReader& r, FaultSpec& f) {
    f.id = r.section().id;
    std::string type;
    r.string("type", type, true);
    if (type == "leak") {
        LeakFault k;
        r.string("pipe", k.pipe, true);
        r.number("coefficient", k.coefficient, true);
        r.number("start", k.start, true);
        f.kind = k;
    } else if (type == "sensor_bias") {
        SensorBiasFault k;
        r.string("node", k.node, true);
        r.number("offset", k.offset, true);
        r.number("start", k.start, true);
        f.kind = k;
    } else if (type == "sensor_spike") {
        SensorSpikeFault k;
        r.string("node", k.node, true);
        r.number("magnitude", k.magnitude, true);
        if (!r.find("times")) r.missing("times");
        r.list("times", k.times);
        f.kind = k;
    } else if (!type.empty()) {
        r.problem(*r.find("type"), "type must be leak, sensor_bias or sensor_spike");
    }
}

} // namespace

RawDocument parse_document(std::string_view text) {
    RawDocument doc;
    std::set<std::pair<std::string, std::string>> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, "section header is missing ']'");
            const auto inner = text::trim(line.substr(1, line.size() - 2));
            const auto space = inner.find_first_of(" \t");
            RawSection s;
            s.type = std::string(inner.substr(0, space));
            s.id = space == std::string_view::npos ? "" : std::string(text::trim(inner.substr(space)));
            s.line = line_no;
            if (is_singleton(s.type)) {
                if (!s.id.empty()) throw ParseError(line_no, "section [" + s.type + "] takes no identifier");
            } else if (is_keyed(s.type)) {
                if (!valid_identifier(s.id)) {
                    throw ParseError(line_no, "section [" + s.type + "] needs an identifier of letters, digits, '_' or '-'");
                }
            } else {
                throw ParseError(line_no, "unknown section type '" + s.type + "'");
            }
            if (!seen.insert({s.type, s.id}).second) throw ParseError(line_no, "duplicate section " + section_label(s));
            doc.sections.push_back(std::move(s));
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
        if (doc.sections.empty()) throw ParseError(line_no, "key outside of any section");
        RawEntry entry{std::string(text::trim(line.substr(0, eq))), std::string(text::trim(line.substr(eq + 1))), line_no};
        if (entry.key.empty()) throw ParseError(line_no, "empty key");
        auto& entries = doc.sections.back().entries;
        for (const auto& e : entries) {
            if (e.key == entry.key) throw ParseError(line_no, "duplicate key '" + entry.key + "'");
        }
        entries.push_back(std::move(entry));
    }
    return doc;
}

void set_value(RawDocument& doc, std::string_view dotted_key, std::string value) {
    const auto dot = dotted_key.find('.');
    if (dot == std::string_view::npos) {
        throw ValidationError("override key '" + std::string(dotted_key) + "' must look like section.key");
    }
    const std::string type(dotted_key.substr(0, dot));
    std::string id;
    std::string key(dotted_key.substr(dot + 1));
    if (is_keyed(type)) {
        const auto dot2 = key.find('.');
        if (dot2 == std::string::npos) {
            throw ValidationError("override key '" + std::string(dotted_key) + "' must look like " + type + ".<id>.key");
        }
        id = key.substr(0, dot2);
        key = key.substr(dot2 + 1);
    } else if (!is_singleton(type)) {
        throw ValidationError("override key '" + std::string(dotted_key) + "' names unknown section '" + type + "'");
    }
    if (key.empty()) throw ValidationError("override key '" + std::string(dotted_key) + "' has an empty key");

    auto it = std::find_if(doc.sections.begin(), doc.sections.end(),
                           [&](const RawSection& s) { return s.type == type && s.id == id; });
    if (it == doc.sections.end()) {
        doc.sections.push_back(RawSection{type, id, 0, {}});
        it = std::prev(doc.sections.end());
    }
    for (auto& e : it->entries) {
        if (e.key == key) {
            e.value = std::move(value);
            return;
        }
    }
    it->entries.push_back(RawEntry{key, std::move(value), 0});
}

ScenarioConfig build_scenario(const RawDocument& doc, const std::filesystem::path& base_dir) {
    ScenarioConfig cfg;
    cfg.base_dir = base_dir;
    std::vector<std::string> problems;
    bool have_reference = false;

    for (const auto& section : doc.sections) {
        SectionReader r(section, problems);
        if (section.type == "sim") {
            read_sim(r, cfg.sim);
        } else if (section.type == "reference") {
            read_reference(r, cfg.reference);
            have_reference = true;
        } else if (section.type == "controller") {
            read_controller(r, cfg.controller);
        } else if (section.type == "channel") {
            read_channel(r, cfg.channel);
        } else if (section.type == "pipe") {
            read_pipe(r, cfg.pipes.emplace_back());
        } else if (section.type == "node") {
            read_node(r, cfg.nodes.emplace_back());
        } else if (section.type == "fault") {
            read_fault(r, cfg.faults.emplace_back());
        }
        r.report_unknown();
    }
    if (!have_reference) problems.emplace_back("scenario has no [reference] section");

    // Semantic checks only make sense once the text itself is well formed.
    if (problems.empty()) problems = scenario_problems(cfg);
    if (!problems.empty()) throw ValidationError(std::move(problems));
    return cfg;
}

ScenarioConfig parse_scenario_text(std::string_view text, const std::filesystem::path& base_dir) {
    return build_scenario(parse_document(text), base_dir);
}

RawDocument read_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_document(buf.str());
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) {
    return build_scenario(read_document(path), path.parent_path());
}

std::string serialize_scenario(const ScenarioConfig& cfg) {
    using text::shortest;
    std::ostringstream out;
    auto kv = [&](std::string_view key, const std::string& value) { out << key << " = " << value << '\n'; };

    out << "[sim]\n";
    kv("name", cfg.sim.name);
    kv("horizon", shortest(cfg.sim.horizon));
    kv("output_interval", shortest(cfg.sim.output_interval));
    kv("max_step", shortest(cfg.sim.max_step));
    kv("settle_time", shortest(cfg.sim.settle_time));
    kv("seed", std::to_string(cfg.sim.seed));

    out << "\n[reference]\n";
    if (const auto* c = std::get_if<FourierCoefficients>(&cfg.reference)) {
        kv("omega", shortest(c->omega));
        kv("b0", shortest(c->mean));
        for (std::size_t i = 0; i < 3; ++i) {
            kv("b" + std::to_string(i + 1), shortest(c->cos_terms[i]));
            kv("a" + std::to_string(i + 1), shortest(c->sin_terms[i]));
        }
    } else {
        const auto& d = std::get<DemandCsvReference>(cfg.reference);
        kv("omega", shortest(d.omega));
        kv("demand_csv", d.path);
    }

    const auto& c = cfg.controller;
    out << "\n[controller]\n";
    kv("mode", to_string(c.mode));
    kv("u_bar", c.u_bar ? shortest(*c.u_bar) : "auto");
    kv("u_min", shortest(c.u_min));
    kv("u_max", shortest(c.u_max));
    kv("sample_period", shortest(c.sample_period));
    kv("poly_degree", std::to_string(c.poly_degree));
    kv("epsilon_band", shortest(c.epsilon_band));
    kv("delta_bound", shortest(c.delta_bound));

    out << "\n[channel]\n";
    kv("drop_probability", shortest(cfg.channel.drop_probability));
    kv("latency_min", shortest(cfg.channel.latency_min));
    kv("latency_max", shortest(cfg.channel.latency_max));

    for (const auto& p : cfg.pipes) {
        out << "\n[pipe " << p.id << "]\n";
        kv("length", shortest(p.spec.length));
        kv("diameter", shortest(p.spec.diameter));
        kv("upstream_head", shortest(p.spec.upstream_head));
        kv("downstream_head", shortest(p.spec.downstream_head));
        kv("kinematic_viscosity", shortest(p.spec.kinematic_viscosity));
        kv("gravity", shortest(p.spec.gravity));
        kv("friction_factor", p.spec.friction_factor ? shortest(*p.spec.friction_factor) : "laminar");
        kv("initial_flow", shortest(p.initial_flow));
        kv("initial_valve", shortest(p.initial_valve));
        kv("drive_ripple", shortest(p.drive_ripple));
        kv("drive_ripple_period", shortest(p.drive_ripple_period));
    }

    for (const auto& n : cfg.nodes) {
        out << "\n[node " << n.id << "]\n";
        kv("role", to_string(n.role));
        kv("pipe", n.pipe);
        if (n.role == NodeRole::Sensor) {
            kv("sample_period", n.sample_period ? shortest(*n.sample_period) : "default");
            kv("noise_rms", shortest(n.noise_rms));
        }
        if (n.role == NodeRole::Detector) {
            kv("sensor", n.sensor);
            if (!n.neighbor.empty()) kv("neighbor", n.neighbor);
            kv("staleness", shortest(n.staleness_bound));
            kv("window", std::to_string(n.detector.window));
            kv("forgetting", shortest(n.detector.forgetting));
            kv("threshold_k", shortest(n.detector.threshold_k));
            kv("regularization", shortest(n.detector.regularization));
            kv("warmup", n.detector.warmup ? std::to_string(*n.detector.warmup) : "default");
            if (!n.report_to.empty()) kv("report_to", n.report_to);
        }
    }

    for (const auto& f : cfg.faults) {
        out << "\n[fault " << f.id << "]\n";
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, LeakFault>) {
                    kv("type", "leak");
                    kv("pipe", k.pipe);
                    kv("coefficient", shortest(k.coefficient));
                    kv("start", shortest(k.start));
                } else if constexpr (std::is_same_v<K, SensorBiasFault>) {
                    kv("type", "sensor_bias");
                    kv("node", k.node);
                    kv("offset", shortest(k.offset));
                    kv("start", shortest(k.start));
                } else {
                    kv("type", "sensor_spike");
                    kv("node", k.node);
                    kv("magnitude", shortest(k.magnitude));
                    std::string times;
                    for (double t : k.times) {
                        if (!times.empty()) times += ", ";
                        times += shortest(t);
                    }
                    kv("times", times);
                }
            },
            f.kind);
    }
    return out.str();
}

} // namespace waterlab
