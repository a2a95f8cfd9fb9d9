// Generates the procedural stand-in dataset in the binary batch layout the
// loaders expect (five train files plus one test file of 3073-byte records).
#include <iostream>

#include <CLI11.hpp>

#include "credassign/errors.hpp"
#include "credassign/synth_data.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write the synthetic glyph dataset"};
    credassign::SynthConfig cfg;
    std::string out;
    app.add_option("--out", out, "target directory")->required();
    app.add_option("--seed", cfg.seed, "generator seed");
    app.add_option("--files", cfg.files, "train files to write");
    app.add_option("--per-file", cfg.per_file, "records per train file");
    app.add_option("--test-count", cfg.test_count, "records in the test file");
    CLI11_PARSE(app, argc, argv);

    try {
        credassign::write_synthetic_dataset(out, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << "wrote " << cfg.files << " train files x " << cfg.per_file << " and "
              << cfg.test_count << " test records to " << out << "\n";
    return 0;
}
