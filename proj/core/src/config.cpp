#include "esrf/config.hpp"

#include "esrf/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace esrf {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(trim(item));
    }
    return out;
}

template <class T>
T number(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw ConfigError("bad value for '" + key + "': '" + text + "'");
    }
    return value;
}

bool boolean(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no") {
        return false;
    }
    throw ConfigError("bad boolean for '" + key + "': '" + text + "'");
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::ConvergenceDiscrete:
            return "convergence-discrete";
        case ExperimentKind::ConvergenceContinuous:
            return "convergence-continuous";
        case ExperimentKind::Consistency:
            return "consistency";
        case ExperimentKind::SpdeAudit:
            return "spde-audit";
        case ExperimentKind::TransformsAudit:
            return "transforms-audit";
    }
    return "?";
}

std::optional<ExperimentKind> parse_kind(std::string_view text) {
    for (auto k : {ExperimentKind::ConvergenceDiscrete, ExperimentKind::ConvergenceContinuous,
                   ExperimentKind::Consistency, ExperimentKind::SpdeAudit,
                   ExperimentKind::TransformsAudit}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

ExperimentConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        }
    }

    ExperimentConfig cfg;
    const auto kind_it = kv.find("kind");
    if (kind_it == kv.end()) {
        throw ConfigError("missing required key 'kind'");
    }
    const auto kind = parse_kind(kind_it->second);
    if (!kind) {
        throw ConfigError("unknown kind '" + kind_it->second + "'");
    }
    cfg.kind = *kind;
    const bool continuous = cfg.kind == ExperimentKind::ConvergenceContinuous;
    if (continuous) {
        cfg.replications = 16;
        cfg.members = {16, 64, 256, 1024};
        cfg.band_low = -0.75;
        cfg.band_high = -0.25;
    }
    if (cfg.kind == ExperimentKind::Consistency) {
        cfg.bootstrap = 200;
        cfg.members = {10000};
        cfg.steps = 20;
        cfg.variants = {TransformVariant::EAKF, TransformVariant::ETKF_direct,
                        TransformVariant::Whitaker};
    }

    static const std::set<std::string> known{
        "kind", "model", "variant", "M", "steps", "eval_step", "T", "dt", "replications", "p",
        "seed", "out", "m_ref", "m_ref_check", "n_stop", "bootstrap", "band", "synthetic_c",
        "sweeps", "dim", "members_max", "record_every"};
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) {
            throw ConfigError("unknown key '" + key + "'");
        }
        if (key == "model") {
            cfg.model = value;
        } else if (key == "variant") {
            cfg.variants.clear();
            for (const auto& v : split(value)) {
                const auto parsed = parse_variant(v);
                if (!parsed) {
                    throw ConfigError("unknown variant '" + v + "'");
                }
                cfg.variants.push_back(*parsed);
            }
        } else if (key == "M") {
            cfg.members.clear();
            for (const auto& v : split(value)) {
                cfg.members.push_back(number<Eigen::Index>(key, v));
            }
        } else if (key == "steps") {
            cfg.steps = number<int>(key, value);
        } else if (key == "eval_step") {
            cfg.eval_step = number<int>(key, value);
        } else if (key == "T") {
            cfg.horizon = number<double>(key, value);
        } else if (key == "dt") {
            cfg.dt = number<double>(key, value);
        } else if (key == "replications") {
            cfg.replications = number<int>(key, value);
        } else if (key == "p") {
            cfg.p_orders.clear();
            for (const auto& v : split(value)) {
                cfg.p_orders.push_back(number<int>(key, v));
            }
        } else if (key == "seed") {
            cfg.seed = number<std::uint64_t>(key, value);
        } else if (key == "out") {
            cfg.out = value;
        } else if (key == "m_ref") {
            cfg.m_ref = number<Eigen::Index>(key, value);
        } else if (key == "m_ref_check") {
            cfg.m_ref_check = boolean(key, value);
        } else if (key == "n_stop") {
            cfg.n_stop = number<double>(key, value);
        } else if (key == "bootstrap") {
            cfg.bootstrap = number<int>(key, value);
        } else if (key == "band") {
            const auto parts = split(value);
            if (parts.size() != 2) {
                throw ConfigError("band needs two values lo,hi");
            }
            cfg.band_low = number<double>(key, parts[0]);
            cfg.band_high = number<double>(key, parts[1]);
        } else if (key == "synthetic_c") {
            cfg.synthetic_c = number<double>(key, value);
        } else if (key == "sweeps") {
            cfg.sweeps = number<int>(key, value);
        } else if (key == "dim") {
            cfg.max_dim = number<int>(key, value);
        } else if (key == "members_max") {
            cfg.members_max = number<int>(key, value);
        } else if (key == "record_every") {
            cfg.record_every = number<int>(key, value);
        }
    }

    if (cfg.members.empty() ||
        std::any_of(cfg.members.begin(), cfg.members.end(), [](Eigen::Index m) { return m < 2; })) {
        throw ConfigError("every M must be at least 2");
    }
    if (cfg.replications < 1) {
        throw ConfigError("replications must be at least 1");
    }
    if (cfg.steps < 1) {
        throw ConfigError("steps must be at least 1");
    }
    if (cfg.eval_step && (*cfg.eval_step < 0 || *cfg.eval_step > cfg.steps)) {
        throw ConfigError("eval_step must lie in [0, steps]");
    }
    if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) {
        throw ConfigError("T and dt must be positive");
    }
    for (int p : cfg.p_orders) {
        if (p != 1 && p != 2 && p != 4) {
            throw ConfigError("p must be one of 1, 2, 4");
        }
    }
    if (cfg.p_orders.empty()) {
        throw ConfigError("p needs at least one value");
    }
    if (cfg.m_ref < 2) {
        throw ConfigError("m_ref must be at least 2");
    }
    if (cfg.n_stop && !(*cfg.n_stop > 0.0)) {
        throw ConfigError("n_stop must be positive");
    }
    if (cfg.bootstrap < 2) {
        throw ConfigError("bootstrap needs at least 2 resamples");
    }
    if (!(cfg.band_low < cfg.band_high)) {
        throw ConfigError("band must satisfy lo < hi");
    }
    if (cfg.sweeps < 1 || cfg.max_dim < 1 || cfg.members_max < 2) {
        throw ConfigError("sweeps >= 1, dim >= 1 and members_max >= 2 required");
    }
    if (cfg.record_every < 1) {
        throw ConfigError("record_every must be positive");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    return parse_config(in);
}

}  // namespace esrf
