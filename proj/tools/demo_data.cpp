// Writes the synthetic demo world (corpus, boundaries, gazetteer, name
// tables, lexicon and config) into a directory.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "geolex/demo.hpp"
#include "geolex/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"geolex-demo-data: generate the synthetic demo world"};
    std::string out = "data/demo";
    geolex::demo::DemoOptions opt;
    app.add_option("-o,--out", out, "Output directory")->capture_default_str();
    app.add_option("--seed", opt.seed, "Generator seed")->capture_default_str();
    app.add_option("--msas", opt.msas, "Number of MSAs (2-10)")->capture_default_str();
    app.add_option("--users-per-msa", opt.users_per_msa, "Users per MSA")->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        const auto s = geolex::demo::write_demo_world(out, opt);
        std::cout << "wrote " << s.users << " users, " << s.messages << " messages, " << s.counties
                  << " counties and " << s.name_files << " name tables to " << out << "\n";
    } catch (const geolex::Error& e) {
        std::cerr << "geolex-demo-data: " << e.what() << "\n";
        return geolex::exit_code(e.kind());
    }
    return 0;
}
