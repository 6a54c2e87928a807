// JSON parsing/serialization for run configs and scenario specs, plus the
// --set / RELIATTA_* override machinery.

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "reliatta/harness.hpp"

namespace reliatta {

using nlohmann::json;
using nlohmann::ordered_json;

const char* method_name(Method m) {
    switch (m) {
        case Method::RobustTouch: return "robusttouch";
        case Method::NoAdapt: return "no_adapt";
        case Method::EntropyMinAll: return "entropy_min_all";
        case Method::StaticFusion: return "static_fusion";
    }
    return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
    for (Method m : {Method::RobustTouch, Method::NoAdapt, Method::EntropyMinAll,
                     Method::StaticFusion}) {
        if (name == method_name(m)) return m;
    }
    return std::nullopt;
}

void DataSource::validate() const {
    if (scenario.has_value() == archive.has_value()) {
        throw ConfigError("config: exactly one of data.scenario / data.archive required");
    }
}

namespace {

Modality parse_modality(const std::string& s) {
    if (s == "vision") return Modality::Vision;
    if (s == "touch") return Modality::Touch;
    throw ConfigError("config: modality must be \"vision\" or \"touch\", got \"" + s + "\"");
}

CorruptionKind parse_kind(const std::string& s) {
    auto kind = corruption_from_name(s);
    if (!kind) throw ConfigError("config: unknown corruption kind \"" + s + "\"");
    return *kind;
}

GeneratorParams parse_generator(const json& j) {
    GeneratorParams g;
    g.sample_noise = j.value("sample_noise", g.sample_noise);
    g.signal_gain = j.value("signal_gain", g.signal_gain);
    g.background_gain = j.value("background_gain", g.background_gain);
    g.intensity_gain = j.value("intensity_gain", g.intensity_gain);
    g.dc_label_mix = j.value("dc_label_mix", g.dc_label_mix);
    g.pattern_fine_weight = j.value("pattern_fine_weight", g.pattern_fine_weight);
    g.pattern_coarse = j.value("pattern_coarse", g.pattern_coarse);
    g.label_max_cosine = j.value("label_max_cosine", g.label_max_cosine);
    return g;
}

ScenarioSpec parse_scenario(const json& j) {
    ScenarioSpec spec;
    spec.num_classes = j.value("num_classes", spec.num_classes);
    spec.dim = j.value("dim", spec.dim);
    spec.input_h = j.value("input_h", spec.input_h);
    spec.input_w = j.value("input_w", spec.input_w);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("generator")) spec.gen = parse_generator(j.at("generator"));
    if (j.contains("phases")) {
        for (const json& pj : j.at("phases")) {
            Phase p;
            p.batches = pj.at("batches").get<int>();
            if (pj.value("clean", false)) {
                p.clean = true;
            } else {
                p.corrupted = parse_modality(pj.at("modality").get<std::string>());
                p.kind = parse_kind(pj.at("kind").get<std::string>());
                p.severity = pj.value("severity", 3);
            }
            spec.phases.push_back(p);
        }
    }
    if (j.contains("wild")) {
        const json& wj = j.at("wild");
        WildMix wild;
        wild.corrupted = parse_modality(wj.at("modality").get<std::string>());
        wild.batches = wj.at("batches").get<int>();
        for (const json& entry : wj.at("pool")) {
            wild.pool.emplace_back(parse_kind(entry.at(0).get<std::string>()),
                                   entry.at(1).get<int>());
        }
        spec.wild = wild;
    }
    if (j.contains("corruption_overrides")) {
        for (const auto& [name, values] : j.at("corruption_overrides").items()) {
            const CorruptionKind kind = parse_kind(name);
            if (!values.is_array() || values.size() != 5) {
                throw ConfigError("config: corruption override for \"" + name +
                                  "\" must list 5 magnitudes");
            }
            std::array<double, 5> table{};
            for (int i = 0; i < 5; ++i) table[i] = values.at(i).get<double>();
            spec.corruption.magnitude[kind] = table;
        }
    }
    return spec;
}

HyperParams parse_hp(const json& j) {
    HyperParams hp;
    hp.alpha = j.value("alpha", hp.alpha);
    hp.lambda = j.value("lambda", hp.lambda);
    hp.gamma = j.value("gamma", hp.gamma);
    hp.lr = j.value("lr", hp.lr);
    hp.fusion_lr = j.value("fusion_lr", hp.fusion_lr);
    hp.accum_period = j.value("accum_period", hp.accum_period);
    hp.batch_size = j.value("batch_size", hp.batch_size);
    hp.patch_grid = j.value("patch_grid", hp.patch_grid);
    hp.fusion_hidden = j.value("fusion_hidden", hp.fusion_hidden);
    hp.tau_init = j.value("tau_init", hp.tau_init);
    hp.fusion_accum_mean = j.value("fusion_accum_mean", hp.fusion_accum_mean);
    hp.beta1 = j.value("beta1", hp.beta1);
    hp.beta2 = j.value("beta2", hp.beta2);
    hp.adam_eps = j.value("adam_eps", hp.adam_eps);
    hp.weight_decay = j.value("weight_decay", hp.weight_decay);
    return hp;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    RunConfig config;
    if (j.contains("method")) {
        const std::string name = j.at("method").get<std::string>();
        auto m = method_from_name(name);
        if (!m) throw ConfigError("config: unknown method \"" + name + "\"");
        config.method = *m;
    }
    if (j.contains("hp")) config.hp = parse_hp(j.at("hp"));
    if (j.contains("out")) config.out_dir = j.at("out").get<std::string>();
    if (j.contains("seeds")) {
        config.seeds.clear();
        for (const json& s : j.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
        if (config.seeds.empty()) throw ConfigError("config: seeds list is empty");
    }
    if (!j.contains("data")) throw ConfigError("config: missing data section");
    const json& data = j.at("data");
    if (data.contains("scenario")) config.data.scenario = parse_scenario(data.at("scenario"));
    if (data.contains("archive")) {
        const json& aj = data.at("archive");
        ArchiveSource src;
        src.path = aj.at("path").get<std::string>();
        src.num_classes = aj.at("num_classes").get<int>();
        src.dim = aj.at("dim").get<int>();
        src.labels_seed = aj.at("labels_seed").get<std::uint64_t>();
        src.label_max_cosine = aj.value("label_max_cosine", src.label_max_cosine);
        config.data.archive = src;
    }
    config.data.validate();
    if (j.contains("sweep")) {
        for (const auto& [key, values] : j.at("sweep").items()) {
            if (!values.is_array() || values.empty()) {
                throw ConfigError("config: sweep axis \"" + key + "\" must be a non-empty array");
            }
            config.sweep[key] = std::vector<json>(values.begin(), values.end());
        }
    }
    config.hp.validate();
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        file >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

namespace {

const char* kSettableKeys[] = {
    "method",        "out",           "seeds",          "hp.alpha",
    "hp.lambda",     "hp.gamma",      "hp.lr",          "hp.fusion_lr",
    "hp.accum_period", "hp.batch_size", "hp.patch_grid", "hp.fusion_hidden",
    "hp.tau_init",   "hp.fusion_accum_mean", "hp.beta1", "hp.beta2",
    "hp.adam_eps",   "hp.weight_decay", "scenario.seed",
};

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("override " + key + ": cannot parse \"" + value + "\" as number");
    }
}

int to_int(const std::string& key, const std::string& value) {
    const double x = to_double(key, value);
    const int i = static_cast<int>(x);
    if (static_cast<double>(i) != x) {
        throw ConfigError("override " + key + ": \"" + value + "\" is not an integer");
    }
    return i;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("override " + key + ": cannot parse \"" + value + "\" as bool");
}

}  // namespace

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
    if (key == "method") {
        auto m = method_from_name(value);
        if (!m) throw ConfigError("override method: unknown method \"" + value + "\"");
        config.method = *m;
    } else if (key == "out") {
        config.out_dir = value;
    } else if (key == "seeds") {
        config.seeds.clear();
        std::stringstream ss(value);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) config.seeds.push_back(std::stoull(token));
        }
        if (config.seeds.empty()) throw ConfigError("override seeds: empty list");
    } else if (key == "hp.alpha") {
        config.hp.alpha = to_double(key, value);
    } else if (key == "hp.lambda") {
        config.hp.lambda = to_double(key, value);
    } else if (key == "hp.gamma") {
        config.hp.gamma = to_double(key, value);
    } else if (key == "hp.lr") {
        config.hp.lr = to_double(key, value);
    } else if (key == "hp.fusion_lr") {
        config.hp.fusion_lr = to_double(key, value);
    } else if (key == "hp.accum_period") {
        config.hp.accum_period = to_int(key, value);
    } else if (key == "hp.batch_size") {
        config.hp.batch_size = to_int(key, value);
    } else if (key == "hp.patch_grid") {
        config.hp.patch_grid = to_int(key, value);
    } else if (key == "hp.fusion_hidden") {
        config.hp.fusion_hidden = to_int(key, value);
    } else if (key == "hp.tau_init") {
        config.hp.tau_init = to_double(key, value);
    } else if (key == "hp.fusion_accum_mean") {
        config.hp.fusion_accum_mean = to_bool(key, value);
    } else if (key == "hp.beta1") {
        config.hp.beta1 = to_double(key, value);
    } else if (key == "hp.beta2") {
        config.hp.beta2 = to_double(key, value);
    } else if (key == "hp.adam_eps") {
        config.hp.adam_eps = to_double(key, value);
    } else if (key == "hp.weight_decay") {
        config.hp.weight_decay = to_double(key, value);
    } else if (key == "scenario.seed") {
        if (!config.data.scenario) {
            throw ConfigError("override scenario.seed: config has no scenario data source");
        }
        config.data.scenario->seed = std::stoull(value);
    } else {
        std::string known;
        for (const char* k : kSettableKeys) {
            known += known.empty() ? k : std::string(", ") + k;
        }
        throw ConfigError("unknown override key \"" + key + "\"; settable keys: " + known);
    }
    config.hp.validate();
}

void apply_env_overrides(RunConfig& config) {
    for (const char* key : kSettableKeys) {
        std::string env_name = "RELIATTA_";
        for (const char* p = key; *p; ++p) {
            env_name += *p == '.' ? '_' : static_cast<char>(std::toupper(*p));
        }
        if (const char* value = std::getenv(env_name.c_str())) {
            apply_override(config, key, value);
        }
    }
}

namespace {

ordered_json generator_to_json(const GeneratorParams& g) {
    return {{"sample_noise", g.sample_noise},
            {"signal_gain", g.signal_gain},
            {"background_gain", g.background_gain},
            {"intensity_gain", g.intensity_gain},
            {"dc_label_mix", g.dc_label_mix},
            {"pattern_fine_weight", g.pattern_fine_weight},
            {"pattern_coarse", g.pattern_coarse},
            {"label_max_cosine", g.label_max_cosine}};
}

ordered_json scenario_to_json(const ScenarioSpec& spec) {
    ordered_json j{{"num_classes", spec.num_classes},
                   {"dim", spec.dim},
                   {"input_h", spec.input_h},
                   {"input_w", spec.input_w},
                   {"seed", spec.seed},
                   {"batch_size", spec.batch_size},
                   {"patch_grid", spec.patch_grid},
                   {"generator", generator_to_json(spec.gen)}};
    if (!spec.phases.empty()) {
        ordered_json phases = ordered_json::array();
        for (const Phase& p : spec.phases) {
            if (p.clean) {
                phases.push_back({{"clean", true}, {"batches", p.batches}});
            } else {
                phases.push_back({{"modality", modality_name(p.corrupted)},
                                  {"kind", corruption_name(p.kind)},
                                  {"severity", p.severity},
                                  {"batches", p.batches}});
            }
        }
        j["phases"] = phases;
    }
    if (spec.wild) {
        ordered_json pool = ordered_json::array();
        for (const auto& [kind, severity] : spec.wild->pool) {
            pool.push_back({corruption_name(kind), severity});
        }
        j["wild"] = {{"modality", modality_name(spec.wild->corrupted)},
                     {"batches", spec.wild->batches},
                     {"pool", pool}};
    }
    return j;
}

ordered_json hp_to_json(const HyperParams& hp) {
    return {{"alpha", hp.alpha},
            {"lambda", hp.lambda},
            {"gamma", hp.gamma},
            {"lr", hp.lr},
            {"fusion_lr", hp.fusion_lr},
            {"accum_period", hp.accum_period},
            {"batch_size", hp.batch_size},
            {"patch_grid", hp.patch_grid},
            {"fusion_hidden", hp.fusion_hidden},
            {"tau_init", hp.tau_init},
            {"fusion_accum_mean", hp.fusion_accum_mean},
            {"beta1", hp.beta1},
            {"beta2", hp.beta2},
            {"adam_eps", hp.adam_eps},
            {"weight_decay", hp.weight_decay}};
}

}  // namespace

ordered_json config_echo(const RunConfig& config, std::uint64_t run_seed) {
    ordered_json j;
    j["method"] = method_name(config.method);
    j["run_seed"] = run_seed;
    j["hp"] = hp_to_json(config.hp);
    if (config.data.scenario) {
        j["data"] = ordered_json{{"scenario", scenario_to_json(*config.data.scenario)}};
    } else {
        const ArchiveSource& a = *config.data.archive;
        j["data"] = ordered_json{{"archive",
                                  {{"path", a.path},
                                   {"num_classes", a.num_classes},
                                   {"dim", a.dim},
                                   {"labels_seed", a.labels_seed},
                                   {"label_max_cosine", a.label_max_cosine}}}};
    }
    return j;
}

}  // namespace reliatta
