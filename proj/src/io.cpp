#include "pdmp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pdmp/errors.hpp"
#include "pdmp/realization.hpp"

namespace pdmp {

const char* to_string(InstanceKind k) {
    return k == InstanceKind::Tabulated ? "tabulated" : "capacity_expansion";
}

namespace {

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

const Json& require(const Json& j, const char* key) {
    if (!j.is_object()) throw ParseError(std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
    return *it;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    return it == j.end() ? fallback : it->template get<T>();
}

std::vector<ActionId> action_list(const Json& j) { return j.get<std::vector<ActionId>>(); }

}  // namespace

Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
    }
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str(), path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json instance_to_json(const FiniteInstance& inst) {
    Json j;
    j["kind"] = "tabulated";
    j["alpha"] = inst.alpha;
    j["state_count"] = inst.state_count;
    j["action_count"] = inst.action_count;
    Json feasible = Json::array();
    for (const auto& f : inst.feasible) feasible.push_back({{"interior", f.interior}, {"boundary", f.boundary}});
    j["feasible"] = feasible;
    j["nu0"] = inst.nu0;
    j["limits"] = inst.limits;
    Json rows = Json::array();
    for (const auto& r : inst.rows) {
        Json g = Json::object();
        for (const auto& e : r.kernel) g[std::to_string(e.state)] = e.probability;
        rows.push_back({{"state", r.state},
                        {"interior", r.pair.interior},
                        {"boundary", r.pair.boundary},
                        {"G", g},
                        {"Lf", r.running},
                        {"Hr", r.boundary},
                        {"calL", r.sojourn},
                        {"calH", r.boundary_weight},
                        {"quad_error", r.quad_error}});
    }
    j["rows"] = rows;
    return j;
}

FiniteInstance instance_from_json(const Json& j) {
    try {
        FiniteInstance inst;
        inst.alpha = require(j, "alpha").get<double>();
        inst.state_count = require(j, "state_count").get<std::size_t>();
        inst.action_count = require(j, "action_count").get<std::size_t>();
        for (const auto& f : require(j, "feasible"))
            inst.feasible.push_back({action_list(require(f, "interior")), action_list(require(f, "boundary"))});
        inst.nu0 = require(j, "nu0").get<std::vector<double>>();
        inst.limits = get_or(j, "limits", std::vector<double>{});
        for (const auto& r : require(j, "rows")) {
            InstanceRow row;
            row.state = require(r, "state").get<StateId>();
            row.pair = {require(r, "interior").get<ActionId>(), require(r, "boundary").get<ActionId>()};
            for (const auto& [key, value] : require(r, "G").items()) {
                std::size_t used = 0;
                unsigned long state = 0;
                try {
                    state = std::stoul(key, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != key.size() || key.empty()) throw ParseError("G key '" + key + "' is not a state index");
                row.kernel.push_back({static_cast<StateId>(state), value.get<double>()});
            }
            normalize_layout(row.kernel);
            row.running = require(r, "Lf").get<std::vector<double>>();
            row.boundary = get_or(r, "Hr", std::vector<double>(row.running.size(), 0.0));
            row.sojourn = require(r, "calL").get<double>();
            row.boundary_weight = get_or(r, "calH", 0.0);
            row.quad_error = get_or(r, "quad_error", 0.0);
            inst.rows.push_back(std::move(row));
        }
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tabulated instance: ") + e.what());
    }
}

Json capacity_to_json(const CapacityParams& p) {
    Json j;
    j["kind"] = "capacity_expansion";
    j["lambda"] = p.lambda;
    j["tau"] = p.tau;
    j["gamma"] = p.gamma;
    j["demand_cap"] = p.demand_cap;
    j["alpha"] = p.alpha;
    j["sa_grid"] = p.sa_grid;
    j["depth"] = p.depth;
    j["initial_state"] = {p.initial_s, p.initial_m, p.initial_j};
    if (std::isfinite(p.max_snap)) j["max_snap"] = p.max_snap;
    Json costs = Json::array();
    for (const auto& c : p.costs) {
        Json cj;
        cj["demand"] = c.demand;
        cj["rate"] = c.rate;
        cj["constant"] = c.constant;
        cj["completion"] = c.completion;
        cj["restart"] = c.restart;
        costs.push_back(cj);
    }
    j["costs"] = costs;
    j["limits"] = p.limits;
    return j;
}

CapacityParams capacity_from_json(const Json& j) {
    try {
        CapacityParams p;
        p.lambda = require(j, "lambda").get<double>();
        p.tau = require(j, "tau").get<double>();
        p.gamma = require(j, "gamma").get<std::vector<double>>();
        p.demand_cap = require(j, "demand_cap").get<int>();
        p.alpha = require(j, "alpha").get<double>();
        p.sa_grid = get_or(j, "sa_grid", p.sa_grid);
        p.depth = get_or(j, "depth", p.depth);
        if (const auto it = j.find("initial_state"); it != j.end()) {
            if (!it->is_array() || it->size() != 3) throw ParseError("initial_state must be [s, m, j]");
            p.initial_s = (*it)[0].get<double>();
            p.initial_m = (*it)[1].get<int>();
            p.initial_j = (*it)[2].get<int>();
        }
        p.max_snap = get_or(j, "max_snap", p.max_snap);
        p.costs.clear();
        for (const auto& cj : require(j, "costs")) {
            CapacityCost c;
            c.demand = get_or(cj, "demand", 0.0);
            c.rate = get_or(cj, "rate", std::vector<double>{});
            c.constant = get_or(cj, "constant", 0.0);
            c.completion = get_or(cj, "completion", 0.0);
            c.restart = get_or(cj, "restart", std::vector<double>{});
            p.costs.push_back(std::move(c));
        }
        p.limits = get_or(j, "limits", std::vector<double>{});
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what());
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("capacity instance: ") + e.what());
    }
}

LoadedInstance load_instance(const Json& j, const QuadratureConfig& quad) {
    LoadedInstance out;
    std::string kind;
    try {
        kind = require(j, "kind").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("instance kind: ") + e.what());
    }
    if (kind == "tabulated") {
        out.kind = InstanceKind::Tabulated;
        out.instance = instance_from_json(j);
        const auto violations = validate_instance(out.instance);
        if (!violations.empty()) {
            std::string msg = "invalid tabulated instance:";
            for (const auto& v : violations) msg += "\n  [" + v.rule + "] " + v.message;
            throw ParseError(msg);
        }
        out.model_note = realization_obstacle(out.instance);
        if (out.model_note.empty()) out.model = std::make_shared<ConstantRateModel>(out.instance);
        out.digest = digest(instance_to_json(out.instance));
    } else if (kind == "capacity_expansion") {
        out.kind = InstanceKind::CapacityExpansion;
        out.capacity = capacity_from_json(j);
        auto model = std::make_shared<CapacityModel>(*out.capacity);
        out.instance = tabulate(*model, quad);
        out.model = model;
        out.digest = digest(capacity_to_json(*out.capacity));
    } else {
        throw ParseError("unknown instance kind '" + kind + "'");
    }
    return out;
}

LoadedInstance load_instance_file(const std::filesystem::path& path, const QuadratureConfig& quad) {
    return load_instance(read_json_file(path), quad);
}

Json policy_to_json(const StationaryPolicy& phi) {
    Json states = Json::array();
    for (std::size_t j = 0; j < phi.state_count(); ++j) {
        Json choices = Json::array();
        for (const auto& c : phi.choices[j])
            choices.push_back({{"interior_action", c.pair.interior},
                               {"boundary_action", c.pair.boundary},
                               {"probability", c.probability}});
        states.push_back({{"state", j},
                          {"provenance", phi.provenance[j] == Provenance::FromMeasure ? "measure" : "default"},
                          {"choices", choices}});
    }
    Json j;
    j["schema"] = 1;
    j["states"] = states;
    return j;
}

StationaryPolicy policy_from_json(const Json& j) {
    try {
        StationaryPolicy phi;
        std::size_t expected = 0;
        for (const auto& s : require(j, "states")) {
            if (require(s, "state").get<std::size_t>() != expected++)
                throw ParseError("policy states must be listed in order 0, 1, ...");
            std::vector<PolicyChoice> choices;
            for (const auto& c : require(s, "choices"))
                choices.push_back({{require(c, "interior_action").get<ActionId>(),
                                    require(c, "boundary_action").get<ActionId>()},
                                   require(c, "probability").get<double>()});
            phi.choices.push_back(std::move(choices));
            phi.provenance.push_back(get_or(s, "provenance", std::string("measure")) == "default"
                                         ? Provenance::DefaultFill
                                         : Provenance::FromMeasure);
        }
        return phi;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("policy: ") + e.what());
    }
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_measure_csv(std::ostream& out, const FiniteInstance& inst, const OccupationMeasure& mu) {
    out << "state,interior_action,boundary_action,mu\n";
    for (std::size_t r = 0; r < inst.rows.size(); ++r) {
        const auto& row = inst.rows[r];
        out << row.state << ',' << row.pair.interior << ',' << row.pair.boundary << ',' << format_number(mu.weights[r])
            << '\n';
    }
}

std::string digest(const Json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pdmp
