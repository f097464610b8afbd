#ifndef DIMCL_VERIFY_SUITE_HPP
#define DIMCL_VERIFY_SUITE_HPP

// Oracle and gradient checks shared by the CLI `verify` command and the
// acceptance runner.

#include <string>
#include <vector>

namespace verify {

struct Outcome {
    std::string name;
    bool pass = false;
    std::string detail; // worst-case error observed, or the failure reason
};

Outcome oracle_equivalence(int pairs = 200);
Outcome transpose_duality(int pairs = 100);
Outcome gradient_fidelity(int instances = 50);
Outcome alpha_diagnostics(int instances = 50);
Outcome diversity_endpoints();

std::vector<Outcome> run_all();

} // namespace verify

#endif
