// Regenerates the synthetic fixture project (project.json, knowledge.json, raw/).

#include "vws/synth.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic fixture project"};
    std::string out;
    std::uint64_t seed = 2012;
    app.add_option("--out", out, "Target directory")->required();
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);
    try {
        vws::synth::write_fixture_project(out, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
