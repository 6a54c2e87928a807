#include "reliatta/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "reliatta/kernels.hpp"
#include "reliatta/version.hpp"

namespace reliatta {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t combine_seeds(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t k = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ULL;
    return k ^ splitmix64(s);
}

// Mean fused-logit entropy over every non-degenerate sample, gradients into
// {adapters, tau} through the normalized embeddings. This is the TENT-style
// arm: no filtering, no class-balance term, fusion weights pinned.
double entropy_all_backward(AdaptationState& state, const ForwardResult& fwd,
                            const EncodedBatch& batch) {
    const int n = batch.size();
    const int k = state.head.num_classes();
    const int d = state.head.dim();

    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
        if (!fwd.degenerate[i]) active.push_back(i);
    }
    if (active.empty()) throw EmptyReliableSetError("entropy_all_backward: no usable samples");
    const double inv_n = 1.0 / static_cast<double>(active.size());

    std::vector<Vec> g_z(n, Vec(k, 0.0));
    double loss = 0.0;
    for (int i : active) {
        const Vec p = softmax(fwd.fused_z[i]);
        double h = 0.0;
        for (double x : p) {
            if (x > 0.0) h -= x * std::log(x);
        }
        loss += h;
        for (int j = 0; j < k; ++j) {
            g_z[i][j] = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + h) * inv_n : 0.0;
        }
    }
    loss *= inv_n;

    double g_tau = 0.0;
    std::vector<Vec> g_emb_v(active.size(), Vec(d, 0.0));
    std::vector<Vec> g_emb_t(active.size(), Vec(d, 0.0));
    std::vector<Vec> h_v(active.size()), h_t(active.size());
    for (std::size_t s = 0; s < active.size(); ++s) {
        const int i = active[s];
        g_tau += dot(g_z[i], fwd.fused_z[i]);
        Vec g_efus(d, 0.0);
        for (int j = 0; j < k; ++j) {
            const double gj = g_z[i][j] * fwd.tau_scale;
            if (gj == 0.0) continue;
            auto row = state.labels_unit.row(j);
            for (int c = 0; c < d; ++c) g_efus[c] += gj * row[c];
        }
        // Pinned w = (0.5, 0.5), then back through the l2 normalization:
        // g_e = (g_u - u (u . g_u)) / ||e||.
        auto through_norm = [&](const Vec& unit, const Vec& emb, Vec& out) {
            const double norm = dot(emb, unit);  // e . e/||e|| = ||e||
            const double mix = 0.5 * dot(unit, g_efus);
            for (int c = 0; c < d; ++c) {
                out[c] = (0.5 * g_efus[c] - unit[c] * mix) / norm;
            }
        };
        through_norm(fwd.unit_v[i], fwd.emb_v[i], g_emb_v[s]);
        through_norm(fwd.unit_t[i], fwd.emb_t[i], g_emb_t[s]);
        h_v[s] = batch.clean_v[i];
        h_t[s] = batch.clean_t[i];
    }

    auto accumulate = [&](std::vector<Vec>& g_emb, std::vector<Vec>& h,
                          ParameterBlock& adapter, ParameterBlock& bias) {
        Mat g_adapter(d, d);
        g_adapter.data.assign(adapter.grad.begin(), adapter.grad.end());
        kernels::accumulate_outer(g_emb, h, g_adapter);
        adapter.grad = g_adapter.data;
        kernels::accumulate_sum(g_emb, bias.grad);
    };
    accumulate(g_emb_v, h_v, state.adapter_v, state.adapter_bias_v);
    accumulate(g_emb_t, h_t, state.adapter_t, state.adapter_bias_t);
    state.head.log_temp.grad[0] += g_tau;
    return loss;
}

void fill_diag(BatchDiagnostics& diag, const ForwardResult& fwd, int n,
               std::int64_t batch_index, double tau) {
    diag.batch_index = static_cast<int>(batch_index);
    diag.sample_count = n;
    diag.reliable_count = static_cast<int>(fwd.masks.reliable.size());
    diag.mask_rate_v = fwd.masks.rate_vision;
    diag.mask_rate_t = fwd.masks.rate_touch;
    diag.mean_w_v = fwd.mean_w_v;
    diag.mean_w_t = fwd.mean_w_t;
    diag.tau = tau;
}

}  // namespace

StepResult baseline_step(Method kind, AdaptationState& state, const EncodedBatch& batch) {
    if (kind == Method::RobustTouch) return adapt_step(state, batch);

    ForwardResult fwd = forward_batch(state, batch, WeightPolicy::Pinned);
    const int n = batch.size();
    StepResult result;
    result.predictions = fwd.predictions;
    fill_diag(result.diag, fwd, n, state.batch_count, state.head.tau());
    state.batch_count += 1;

    switch (kind) {
        case Method::NoAdapt:
            result.diag.update_skipped = true;
            return result;

        case Method::EntropyMinAll: {
            double loss = 0.0;
            bool ok = true;
            try {
                loss = entropy_all_backward(state, fwd, batch);
            } catch (const NumericError&) {
                ok = false;
            } catch (const EmptyReliableSetError&) {
                ok = false;
            }
            if (ok) {
                for (ParameterBlock* b : state.modal_blocks()) {
                    if (!all_finite(b->grad)) ok = false;
                }
            }
            if (!ok || !std::isfinite(loss)) {
                for (ParameterBlock* b : state.modal_blocks()) b->zero_grad();
                result.diag.update_skipped = true;
                result.diag.flag = "non_finite_loss";
                return result;
            }
            result.diag.loss_modal = loss;
            if (!state.modal_optimizer().step(state.hp.modal_optimizer())) {
                for (ParameterBlock* b : state.modal_blocks()) b->zero_grad();
                result.diag.update_skipped = true;
                result.diag.flag = "non_finite_gradient";
            }
            result.diag.tau = state.head.tau();
            return result;
        }

        case Method::StaticFusion: {
            if (fwd.masks.reliable.empty()) {
                result.diag.update_skipped = true;
                result.diag.flag = "empty_reliable_set";
                return result;
            }
            BackwardResult losses;
            bool ok = true;
            try {
                // Pinned policy leaves fusion_fwd empty, so this touches the
                // modal blocks only; the fusion net stays frozen.
                losses = adapt_backward(state, fwd, batch);
            } catch (const NumericError&) {
                ok = false;
            }
            if (ok) {
                for (ParameterBlock* b : state.modal_blocks()) {
                    if (!all_finite(b->grad)) ok = false;
                }
            }
            if (!ok || !std::isfinite(losses.loss_modal)) {
                for (ParameterBlock* b : state.modal_blocks()) b->zero_grad();
                result.diag.update_skipped = true;
                result.diag.flag = "non_finite_loss";
                return result;
            }
            result.diag.loss_modal = losses.loss_modal;
            result.diag.loss_fused = losses.loss_fused;
            if (!state.modal_optimizer().step(state.hp.modal_optimizer())) {
                for (ParameterBlock* b : state.modal_blocks()) b->zero_grad();
                result.diag.update_skipped = true;
                result.diag.flag = "non_finite_gradient";
            }
            result.diag.tau = state.head.tau();
            return result;
        }

        case Method::RobustTouch:
            break;  // handled above
    }
    throw ConfigError("baseline_step: unknown method");
}

RunReport run_experiment(const RunConfig& config, std::uint64_t run_seed) {
    config.hp.validate();
    config.data.validate();

    RunReport report;
    report.method = method_name(config.method);
    report.seed = run_seed;
    report.config = config_echo(config, run_seed);
    report.version = kVersion;

    const std::uint64_t model_seed = combine_seeds(run_seed, 0x6d6f64656cULL);

    std::optional<ScenarioStream> stream;
    EmbeddingArchive archive;
    Mat labels;
    int dim = 0;
    int total_batches = 0;

    if (config.data.scenario) {
        ScenarioSpec spec = *config.data.scenario;
        spec.batch_size = config.hp.batch_size;
        spec.patch_grid = config.hp.patch_grid;
        spec.seed = combine_seeds(spec.seed, run_seed);
        stream.emplace(std::move(spec));
        labels = stream->prototypes().labels;
        dim = stream->spec().dim;
        total_batches = stream->total_batches();
        report.config["data"]["scenario"]["seed"] = stream->spec().seed;
        report.config["data"]["scenario"]["batch_size"] = stream->spec().batch_size;
        report.config["data"]["scenario"]["patch_grid"] = stream->spec().patch_grid;
    } else {
        const ArchiveSource& src = *config.data.archive;
        archive = load_archive(src.path);
        // Header mismatches are rejected before any computation touches the
        // payload.
        if (static_cast<int>(archive.num_classes) != src.num_classes) {
            throw ConfigError("archive K=" + std::to_string(archive.num_classes) +
                              " does not match config num_classes=" +
                              std::to_string(src.num_classes));
        }
        if (static_cast<int>(archive.dim) != src.dim) {
            throw ConfigError("archive D=" + std::to_string(archive.dim) +
                              " does not match config dim=" + std::to_string(src.dim));
        }
        labels = generate_label_matrix(src.num_classes, src.dim, src.labels_seed,
                                       src.label_max_cosine);
        dim = src.dim;
        total_batches =
            static_cast<int>(archive.samples.size()) / config.hp.batch_size;
    }

    AdaptationState state(labels, dim, config.hp, model_seed);

    std::int64_t correct_total = 0;
    std::int64_t sample_total = 0;
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> phase_totals;
    std::vector<std::string> phase_order;

    for (int t = 0; t < total_batches; ++t) {
        EncodedBatch encoded;
        std::vector<int> truth;
        if (stream) {
            auto generated = stream->make_batch(t);
            if (!generated) break;
            encoded = stream->encode(*generated);
            truth = generated->labels;
        } else {
            const int b = config.hp.batch_size;
            encoded.phase = "archive";
            for (int i = 0; i < b; ++i) {
                const ArchiveSample& s = archive.samples[static_cast<std::size_t>(t) * b + i];
                encoded.clean_v.emplace_back(s.clean_v.begin(), s.clean_v.end());
                encoded.clean_t.emplace_back(s.clean_t.begin(), s.clean_t.end());
                encoded.pert_v.emplace_back(s.pert_v.begin(), s.pert_v.end());
                encoded.pert_t.emplace_back(s.pert_t.begin(), s.pert_t.end());
                truth.push_back(static_cast<int>(s.label));
            }
        }

        const StepResult step = baseline_step(config.method, state, encoded);

        int correct = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (step.predictions[i] == truth[i]) ++correct;
        }
        const int n = static_cast<int>(truth.size());

        BatchRecord record;
        record.batch = t;
        record.phase = encoded.phase;
        record.accuracy = static_cast<double>(correct) / n;
        record.sample_count = n;
        record.reliable_count = step.diag.reliable_count;
        record.mask_rate_v = step.diag.mask_rate_v;
        record.mask_rate_t = step.diag.mask_rate_t;
        record.loss_modal = step.diag.loss_modal;
        record.loss_fus = step.diag.loss_fused;
        record.w_v_mean = step.diag.mean_w_v;
        record.w_t_mean = step.diag.mean_w_t;
        record.tau_aff = step.diag.tau;
        record.update_skipped = step.diag.update_skipped;
        record.fusion_stepped = step.diag.fusion_stepped;
        record.flag = step.diag.flag;
        report.batches.push_back(std::move(record));

        correct_total += correct;
        sample_total += n;
        auto [it, inserted] = phase_totals.try_emplace(encoded.phase, 0, 0);
        if (inserted) phase_order.push_back(encoded.phase);
        it->second.first += correct;
        it->second.second += n;
    }

    report.total_samples = sample_total;
    report.total_correct = correct_total;
    report.overall_accuracy =
        sample_total > 0 ? static_cast<double>(correct_total) / sample_total : 0.0;
    for (const std::string& phase : phase_order) {
        const auto& [correct, samples] = phase_totals.at(phase);
        report.phases.push_back(
            {phase, static_cast<int>(samples),
             samples > 0 ? static_cast<double>(correct) / samples : 0.0});
    }
    return report;
}

double recompute_overall_accuracy(const RunReport& report) {
    double weighted = 0.0;
    std::int64_t samples = 0;
    for (const BatchRecord& b : report.batches) {
        weighted += b.accuracy * b.sample_count;
        samples += b.sample_count;
    }
    return samples > 0 ? weighted / static_cast<double>(samples) : 0.0;
}

ordered_json report_to_json(const RunReport& report) {
    ordered_json j;
    j["version"] = report.version;
    j["method"] = report.method;
    j["seed"] = report.seed;
    j["config"] = report.config;
    j["overall_accuracy"] = report.overall_accuracy;
    j["total_samples"] = report.total_samples;
    j["total_correct"] = report.total_correct;
    ordered_json phases = ordered_json::array();
    for (const PhaseAccuracy& p : report.phases) {
        phases.push_back({{"phase", p.phase}, {"samples", p.samples}, {"accuracy", p.accuracy}});
    }
    j["phases"] = phases;
    ordered_json batches = ordered_json::array();
    for (const BatchRecord& b : report.batches) {
        batches.push_back({{"batch", b.batch},
                           {"phase", b.phase},
                           {"accuracy", b.accuracy},
                           {"sample_count", b.sample_count},
                           {"reliable_count", b.reliable_count},
                           {"mask_rate_v", b.mask_rate_v},
                           {"mask_rate_t", b.mask_rate_t},
                           {"loss_modal", b.loss_modal},
                           {"loss_fus", b.loss_fus},
                           {"w_v_mean", b.w_v_mean},
                           {"w_t_mean", b.w_t_mean},
                           {"tau_aff", b.tau_aff},
                           {"update_skipped", b.update_skipped},
                           {"fusion_stepped", b.fusion_stepped},
                           {"flag", b.flag}});
    }
    j["batches"] = batches;
    return j;
}

RunReport report_from_json(const ordered_json& j) {
    RunReport report;
    report.version = j.at("version").get<std::string>();
    report.method = j.at("method").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.config = j.at("config");
    report.overall_accuracy = j.at("overall_accuracy").get<double>();
    report.total_samples = j.at("total_samples").get<std::int64_t>();
    report.total_correct = j.at("total_correct").get<std::int64_t>();
    for (const json& p : j.at("phases")) {
        report.phases.push_back({p.at("phase").get<std::string>(),
                                 p.at("samples").get<int>(),
                                 p.at("accuracy").get<double>()});
    }
    for (const json& b : j.at("batches")) {
        BatchRecord record;
        record.batch = b.at("batch").get<int>();
        record.phase = b.at("phase").get<std::string>();
        record.accuracy = b.at("accuracy").get<double>();
        record.sample_count = b.at("sample_count").get<int>();
        record.reliable_count = b.at("reliable_count").get<int>();
        record.mask_rate_v = b.at("mask_rate_v").get<double>();
        record.mask_rate_t = b.at("mask_rate_t").get<double>();
        record.loss_modal = b.at("loss_modal").get<double>();
        record.loss_fus = b.at("loss_fus").get<double>();
        record.w_v_mean = b.at("w_v_mean").get<double>();
        record.w_t_mean = b.at("w_t_mean").get<double>();
        record.tau_aff = b.at("tau_aff").get<double>();
        record.update_skipped = b.at("update_skipped").get<bool>();
        record.fusion_stepped = b.at("fusion_stepped").get<bool>();
        record.flag = b.at("flag").get<std::string>();
        report.batches.push_back(std::move(record));
    }
    return report;
}

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

void write_outputs(const RunReport& report, const std::string& dir,
                   double wall_clock_seconds) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output dir " + dir + ": " + ec.message());

    {
        std::ofstream f(dir + "/report.json");
        if (!f) throw std::runtime_error("cannot write " + dir + "/report.json");
        f << report_to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream f(dir + "/per_batch.csv");
        if (!f) throw std::runtime_error("cannot write " + dir + "/per_batch.csv");
        f << "batch,phase,accuracy,reliable_count,mask_rate_v,mask_rate_t,"
             "loss_modal,loss_fus,w_v_mean,w_t_mean,tau_aff\n";
        for (const BatchRecord& b : report.batches) {
            f << b.batch << ',' << b.phase << ',' << fmt_double(b.accuracy) << ','
              << b.reliable_count << ',' << fmt_double(b.mask_rate_v) << ','
              << fmt_double(b.mask_rate_t) << ',' << fmt_double(b.loss_modal) << ','
              << fmt_double(b.loss_fus) << ',' << fmt_double(b.w_v_mean) << ','
              << fmt_double(b.w_t_mean) << ',' << fmt_double(b.tau_aff) << '\n';
        }
    }
    {
        std::ofstream f(dir + "/curves.csv");
        if (!f) throw std::runtime_error("cannot write " + dir + "/curves.csv");
        f << "batch,phase,accuracy,running_accuracy\n";
        double correct = 0.0;
        double seen = 0.0;
        for (const BatchRecord& b : report.batches) {
            correct += b.accuracy * b.sample_count;
            seen += b.sample_count;
            f << b.batch << ',' << b.phase << ',' << fmt_double(b.accuracy) << ','
              << fmt_double(seen > 0 ? correct / seen : 0.0) << '\n';
        }
    }
    {
        // Timing is inherently run-specific; it lives outside report.json so
        // identical config+seed produce identical reports.
        std::ofstream f(dir + "/run_meta.json");
        if (!f) throw std::runtime_error("cannot write " + dir + "/run_meta.json");
        ordered_json meta{{"wall_clock_seconds", wall_clock_seconds},
                          {"version", report.version}};
        f << meta.dump(2) << "\n";
    }
}

namespace {

std::string sanitize_for_path(std::string s) {
    for (char& c : s) {
        if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
    }
    return s;
}

}  // namespace

std::vector<std::string> run_sweep(const RunConfig& base) {
    // Cartesian product over the declared axes, one run per (cell, seed).
    std::vector<std::pair<std::string, std::vector<json>>> axes(base.sweep.begin(),
                                                                base.sweep.end());
    std::vector<std::size_t> index(axes.size(), 0);
    std::vector<std::string> written;

    const auto cells = [&]() {
        std::size_t n = 1;
        for (const auto& [key, values] : axes) n *= values.size();
        return n;
    }();

    for (std::size_t cell = 0; cell < cells; ++cell) {
        RunConfig config = base;
        config.sweep.clear();
        std::string cell_name;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& [key, values] = axes[a];
            const json& value = values[index[a]];
            const std::string text =
                value.is_string() ? value.get<std::string>() : value.dump();
            apply_override(config, key, text);
            if (!cell_name.empty()) cell_name += "_";
            cell_name += sanitize_for_path(key + "=" + text);
        }
        if (cell_name.empty()) cell_name = "base";

        for (std::uint64_t seed : config.seeds) {
            const auto start = std::chrono::steady_clock::now();
            RunReport report = run_experiment(config, seed);
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            if (!base.out_dir.empty()) {
                const std::string dir =
                    base.out_dir + "/" + cell_name + "/seed_" + std::to_string(seed);
                write_outputs(report, dir, wall);
                written.push_back(dir);
            }
        }

        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++index[a] < axes[a].second.size()) break;
            index[a] = 0;
        }
    }
    return written;
}

nlohmann::ordered_json export_archive(const RunConfig& config, std::uint64_t run_seed,
                                      const std::string& path, int max_samples) {
    if (!config.data.scenario) {
        throw ConfigError("export_archive: config must use a scenario data source");
    }
    ScenarioSpec spec = *config.data.scenario;
    spec.batch_size = config.hp.batch_size;
    spec.patch_grid = config.hp.patch_grid;
    spec.seed = combine_seeds(spec.seed, run_seed);
    ScenarioStream stream(spec);

    EmbeddingArchive archive;
    archive.num_classes = static_cast<std::uint32_t>(spec.num_classes);
    archive.dim = static_cast<std::uint32_t>(spec.dim);

    const int limit = max_samples > 0 ? max_samples
                                      : stream.total_batches() * spec.batch_size;
    for (int t = 0; t < stream.total_batches(); ++t) {
        if (static_cast<int>(archive.samples.size()) >= limit) break;
        auto generated = stream.make_batch(t);
        if (!generated) break;
        EncodedBatch encoded = stream.encode(*generated);
        for (int i = 0; i < encoded.size(); ++i) {
            if (static_cast<int>(archive.samples.size()) >= limit) break;
            ArchiveSample s;
            s.clean_v.assign(encoded.clean_v[i].begin(), encoded.clean_v[i].end());
            s.clean_t.assign(encoded.clean_t[i].begin(), encoded.clean_t[i].end());
            s.pert_v.assign(encoded.pert_v[i].begin(), encoded.pert_v[i].end());
            s.pert_t.assign(encoded.pert_t[i].begin(), encoded.pert_t[i].end());
            s.label = static_cast<std::uint32_t>(generated->labels[i]);
            archive.samples.push_back(std::move(s));
        }
    }
    save_archive(path, archive);

    // Companion block: paste under "data" to run from this file with the
    // same label matrix the stream used.
    return ordered_json{{"archive",
                         {{"path", path},
                          {"num_classes", spec.num_classes},
                          {"dim", spec.dim},
                          {"labels_seed", spec.seed},
                          {"label_max_cosine", spec.gen.label_max_cosine}}}};
}

}  // namespace reliatta
