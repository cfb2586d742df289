// tailtta: streaming test-time adaptation over embedding streams.
//
//   tailtta generate --out-stream s.jsonl --out-prototypes p.jsonl
//   tailtta run --stream s.jsonl --prototypes p.jsonl --out report.jsonl
//   tailtta ablate --seeds 5 --out ablation.jsonl
//   tailtta inspect-cache --report report.jsonl

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tailtta/digest.hpp"
#include "tailtta/error.hpp"
#include "tailtta/harness.hpp"
#include "tailtta/io.hpp"

namespace {

using namespace tailtta;

void add_spec_options(CLI::App& cmd, SyntheticSpec& spec) {
    cmd.add_option("--classes", spec.num_classes, "number of classes C")->capture_default_str();
    cmd.add_option("--dim", spec.dim, "embedding dimension d")->capture_default_str();
    cmd.add_option("--zipf", spec.zipf_exponent, "Zipf exponent of class frequencies")->capture_default_str();
    cmd.add_option("--sigma", spec.intra_class_noise, "per-coordinate intra-class noise")->capture_default_str();
    cmd.add_option("--jitter", spec.view_jitter, "per-coordinate view jitter")->capture_default_str();
    cmd.add_option("--offset", spec.textual_offset_noise, "per-coordinate textual prototype offset")
        ->capture_default_str();
    cmd.add_option("--samples", spec.n_samples, "stream length")->capture_default_str();
    cmd.add_option("--views", spec.n_views, "views per sample")->capture_default_str();
    cmd.add_option("--min-angle", spec.min_angle_deg, "minimum angle between class means (degrees)")
        ->capture_default_str();
    cmd.add_option("--seed", spec.seed, "generator seed")->capture_default_str();
}

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App& cmd, ConfigArgs& args) {
    cmd.add_option("--config", args.config_path, "key = value config file");
    cmd.add_option("--set", args.overrides, "override a config key (key=value), repeatable");
}

HyperParams resolve_config(const ConfigArgs& args, HyperParams base = {}) {
    std::vector<ConfigOverride> overrides;
    for (const auto& o : args.overrides) overrides.push_back(parse_override(o));
    std::optional<std::filesystem::path> path;
    if (!args.config_path.empty()) path = args.config_path;
    return load_config(path, overrides, std::move(base));
}

// Writes to `path`, or stdout when empty.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    write(out);
}

void warn_all(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming test-time adaptation with a class-aware prototype cache"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "adapt over a stream and write a session report");
    std::string stream_path;
    std::string proto_path;
    std::string out_path;
    ConfigArgs run_cfg;
    ReportOptions report_opts;
    RunOptions run_opts;
    run->add_option("--stream", stream_path, "stream file")->required();
    run->add_option("--prototypes", proto_path, "initial textual prototypes")->required();
    run->add_option("--out", out_path, "report file (default: stdout)");
    run->add_flag("--per-sample", report_opts.per_sample, "include per-sample records");
    run->add_flag("--trace-loss", report_opts.trace_loss, "include per-sample loss breakdowns");
    run->add_option("--trajectory-stride", run_opts.trajectory_stride, "samples between capacity snapshots")
        ->capture_default_str();
    add_config_options(*run, run_cfg);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic long-tailed stream and prototypes");
    SyntheticSpec gen_spec;
    std::string gen_stream;
    std::string gen_protos;
    add_spec_options(*gen, gen_spec);
    gen->add_option("--out-stream", gen_stream, "stream file")->required();
    gen->add_option("--out-prototypes", gen_protos, "prototype file")->required();

    // ablate
    auto* abl = app.add_subcommand("ablate", "run the full / capc_only / ncl_only / baseline grid");
    SyntheticSpec abl_spec;
    ConfigArgs abl_cfg;
    int n_seeds = 5;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string abl_out;
    add_spec_options(*abl, abl_spec);
    add_config_options(*abl, abl_cfg);
    abl->add_option("--n-seeds", n_seeds, "paired seeds")->capture_default_str();
    abl->add_option("--threads", threads, "worker threads")->capture_default_str();
    abl->add_option("--out", abl_out, "report file (default: stdout)");

    // inspect-cache
    auto* inspect = app.add_subcommand("inspect-cache", "print the capacity / dead-class table of a report");
    std::string report_path;
    inspect->add_option("--report", report_path, "session report")->required();

    // config
    auto* cfg = app.add_subcommand("config", "print the documented default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run) {
            const HyperParams hp = resolve_config(run_cfg);
            auto stream = load_stream(stream_path);
            auto protos = load_prototypes(proto_path);
            warn_all(stream.warnings);
            warn_all(protos.warnings);
            if (stream.meta.dim != protos.protos.dim()) {
                throw Error(ErrorKind::DimensionMismatch, "stream d=" + std::to_string(stream.meta.dim) +
                                                              " but prototypes d=" +
                                                              std::to_string(protos.protos.dim()));
            }
            if (stream.meta.num_classes != protos.protos.rows()) {
                throw Error(ErrorKind::ShapeMismatch, "stream C=" + std::to_string(stream.meta.num_classes) +
                                                          " but prototypes C=" +
                                                          std::to_string(protos.protos.rows()));
            }
            InputDigests digests{sha256_file(stream_path), sha256_file(proto_path),
                                 run_cfg.config_path.empty() ? std::string() : sha256_file(run_cfg.config_path)};
            const auto report = run_session(stream.records, hp, protos.protos, run_opts);
            emit(out_path, [&](std::ostream& os) { write_session_report(os, hp, digests, report, report_opts); });
            const auto& s = report.summary;
            std::cerr << "samples " << s.n_samples << "  accuracy " << s.accuracy << "  tail_retention "
                      << s.tail_retention << "  dead_classes " << s.dead_classes << '\n';
        } else if (*gen) {
            const auto stream = generate_stream(gen_spec);
            StreamMetadata meta{gen_spec.dim, gen_spec.num_classes, gen_spec.n_views, {}};
            write_stream(std::filesystem::path(gen_stream), meta, stream.records);
            write_prototypes(std::filesystem::path(gen_protos), stream.textual);
        } else if (*abl) {
            const HyperParams hp = resolve_config(abl_cfg, synthetic_base_params());
            const auto report = run_ablation(abl_spec, default_grid(hp), n_seeds, threads);
            emit(abl_out, [&](std::ostream& os) { write_ablation_report(os, report, hp, n_seeds); });
            for (const auto& c : report.configs) {
                std::cerr << c.name << ": accuracy " << mean(c.accuracy) << " +- " << stdev(c.accuracy)
                          << "  tail_acc " << mean(c.tail_accuracy) << "  tail_retention "
                          << mean(c.tail_retention) << '\n';
            }
        } else if (*inspect) {
            std::ifstream in(report_path);
            if (!in) throw Error(ErrorKind::IoError, "cannot open " + report_path);
            std::cout << render_cache_table(in, report_path);
        } else if (*cfg) {
            std::cout << default_config_text();
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
