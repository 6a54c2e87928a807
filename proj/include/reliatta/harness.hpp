#pragma once
// Experiment runner: method dispatch (RobustTouch plus the three baseline
// arms), streaming evaluation with per-batch records, report/CSV output,
// JSON config parsing with --set / environment overrides, and sweeps.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reliatta/adapt.hpp"
#include "reliatta/archive.hpp"
#include "reliatta/scenario.hpp"

namespace reliatta {

enum class Method { RobustTouch, NoAdapt, EntropyMinAll, StaticFusion };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct ArchiveSource {
    std::string path;
    int num_classes = 0;
    int dim = 0;
    std::uint64_t labels_seed = 0;  // regenerates the label matrix used at export
    double label_max_cosine = 0.8;
};

struct DataSource {
    std::optional<ScenarioSpec> scenario;
    std::optional<ArchiveSource> archive;

    void validate() const;  // exactly one source
};

struct RunConfig {
    Method method = Method::RobustTouch;
    HyperParams hp;
    DataSource data;
    std::string out_dir;  // empty: no files written
    std::vector<std::uint64_t> seeds{1};
    std::map<std::string, std::vector<nlohmann::json>> sweep;
};

// ---------------------------------------------------------------------------
// Config parsing and overrides
// ---------------------------------------------------------------------------

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Applies one "key=value" override (the --set mechanism). Unknown keys throw
// ConfigError listing the settable keys.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Scans the environment for RELIATTA_<KEY> variables (dots become
// underscores, uppercased: hp.lr -> RELIATTA_HP_LR) and applies them.
void apply_env_overrides(RunConfig& config);

nlohmann::ordered_json config_echo(const RunConfig& config, std::uint64_t run_seed);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct BatchRecord {
    int batch = 0;
    std::string phase;
    double accuracy = 0.0;
    int sample_count = 0;
    int reliable_count = 0;
    double mask_rate_v = 0.0;
    double mask_rate_t = 0.0;
    double loss_modal = 0.0;
    double loss_fus = 0.0;
    double w_v_mean = 0.5;
    double w_t_mean = 0.5;
    double tau_aff = 0.0;
    bool update_skipped = false;
    bool fusion_stepped = false;
    std::string flag;
};

struct PhaseAccuracy {
    std::string phase;
    int samples = 0;
    double accuracy = 0.0;
};

struct RunReport {
    std::string method;
    std::uint64_t seed = 0;
    nlohmann::ordered_json config;
    std::vector<BatchRecord> batches;
    std::vector<PhaseAccuracy> phases;
    std::int64_t total_samples = 0;
    std::int64_t total_correct = 0;
    double overall_accuracy = 0.0;
    std::string version;
};

nlohmann::ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::ordered_json& j);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

// One baseline step. NoAdapt: pinned (0.5, 0.5) fusion, no updates.
// EntropyMinAll: minimizes mean fused-logit entropy over all samples with
// the modality optimizer, no filtering, fusion net untouched. StaticFusion:
// the full filtered modality update with weights pinned and the fusion net
// frozen. Method::RobustTouch dispatches to adapt_step.
StepResult baseline_step(Method kind, AdaptationState& state, const EncodedBatch& batch);

// Runs the configured stream once (single pass, online order) and scores
// predictions against the evaluation-only labels. Deterministic given
// (config, run_seed).
RunReport run_experiment(const RunConfig& config, std::uint64_t run_seed);

// Writes report.json, per_batch.csv, curves.csv, and a timing sidecar
// (run_meta.json). Wall-clock lives in the sidecar so report.json is
// bit-reproducible for identical config+seed.
void write_outputs(const RunReport& report, const std::string& dir,
                   double wall_clock_seconds);

// Re-derives the overall accuracy from per-batch records (test support for
// the accounting invariant).
double recompute_overall_accuracy(const RunReport& report);

// Cartesian sweep over config.sweep axes and seeds. Returns the directories
// written (one per cell x seed).
std::vector<std::string> run_sweep(const RunConfig& config);

// Builds an embedding archive by streaming a scenario through the frozen
// encoder. Returns the companion config (data.archive block) describing how
// to run from the file.
nlohmann::ordered_json export_archive(const RunConfig& config, std::uint64_t run_seed,
                                      const std::string& path, int max_samples = -1);

}  // namespace reliatta
