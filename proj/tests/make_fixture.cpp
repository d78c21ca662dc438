// Writes a small simulated CSV used by the command line smoke tests.

#include <fstream>
#include <iostream>

#include "rankcf/rankcf.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixture <out.csv>\n";
        return 1;
    }
    rankcf::DgpConfig cfg;
    cfg.rho = 0.5;
    cfg.pi_shape = rankcf::PiShape::quadratic;
    cfg.n = 80;
    cfg.seed = 7;
    rankcf::SimSample s = rankcf::generate(cfg);
    rankcf::ParsedData pd{s.dataset, {"const", "z1"}, {"d1"}};
    std::ofstream os(argv[1]);
    if (!os) {
        std::cerr << "cannot open " << argv[1] << '\n';
        return 1;
    }
    rankcf::emit_dataset_csv(pd, os);
    return 0;
}
