// geolex command-line driver. Settings come from a TOML file; flags given on
// the command line override it.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geolex/error.hpp"
#include "geolex/pipeline.hpp"

namespace {

using geolex::pipeline::Pipeline;
using geolex::pipeline::PipelineConfig;
using geolex::pipeline::RunOptions;
using geolex::pipeline::Stage;

struct Flags {
    std::string config = "geolex.toml";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> lambda;
    std::vector<std::string> formats;
    bool no_timestamp = false;
    bool force = false;
    bool quiet = false;
};

PipelineConfig load_config(const Flags& f) {
    PipelineConfig cfg = PipelineConfig::load(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out_dir = *f.out;
    if (f.lambda) cfg.lexvar.sage.lambda = *f.lambda;
    if (!f.formats.empty()) cfg.report.formats = f.formats;
    if (f.no_timestamp) cfg.report.svg_timestamp = false;
    cfg.validate();
    return cfg;
}

int run(const Flags& f, const std::vector<Stage>& stages) {
    Pipeline p(load_config(f));
    RunOptions opt;
    opt.force = f.force;
    opt.log = f.quiet ? nullptr : &std::cerr;
    for (const auto s : stages) p.run_stage(s, opt);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geolex: geo-demographic analysis of geotagged message corpora"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&flags](CLI::App* sub) {
        sub->add_option("-c,--config", flags.config, "TOML configuration file")->capture_default_str();
        sub->add_option("--seed", flags.seed, "Master seed (overrides the config)");
        sub->add_option("-o,--out", flags.out, "Output directory (overrides the config)");
        sub->add_flag("--force", flags.force, "Re-run stages even when their cache key matches");
        sub->add_flag("-q,--quiet", flags.quiet, "No progress output");
    };

    std::vector<std::pair<CLI::App*, std::vector<Stage>>> commands;
    const std::vector<std::pair<Stage, const char*>> stage_help{
        {Stage::filter, "Apply the message and user filters"},
        {Stage::geocode, "Reverse-geocode GPS points and match profile locations"},
        {Stage::sample, "Draw the MSA- and county-balanced samples"},
        {Stage::demographics, "Name-based age/gender estimates and the latent-class model"},
        {Stage::lexvar, "Salient terms per group and annotated-lexicon rates"},
        {Stage::geoloc, "Cross-validated geolocation with stratified accuracy"},
        {Stage::report, "Tables and figures as CSV, Markdown and SVG"},
    };
    for (const auto& [stage, help] : stage_help) {
        auto* sub = app.add_subcommand(std::string(geolex::pipeline::to_string(stage)), help);
        add_common(sub);
        commands.push_back({sub, {stage}});
    }
    auto* run_cmd = app.add_subcommand("run", "Run every stage in order");
    add_common(run_cmd);
    commands.push_back({run_cmd, geolex::pipeline::all_stages()});

    for (auto* sub : {run_cmd, app.get_subcommand("lexvar")}) {
        sub->add_option("--lambda", flags.lambda, "L1 penalty for the salient-term model")
            ->check(CLI::NonNegativeNumber);
    }
    for (auto* sub : {run_cmd, app.get_subcommand("report")}) {
        sub->add_option("--format", flags.formats, "Report formats: csv, md, svg")
            ->delimiter(',')
            ->check(CLI::IsMember({"csv", "md", "svg"}));
        sub->add_flag("--no-timestamp", flags.no_timestamp, "Omit the generation time from SVG files");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : geolex::exit_code(geolex::ErrorKind::validation);
    }

    try {
        for (const auto& [sub, stages] : commands) {
            if (sub->parsed()) return run(flags, stages);
        }
    } catch (const geolex::Error& e) {
        std::cerr << "geolex: " << geolex::to_string(e.kind()) << " error: " << e.what() << "\n";
        return geolex::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "geolex: error: " << e.what() << "\n";
        return geolex::exit_code(geolex::ErrorKind::data);
    }
    return 0;
}
