#pragma once

#include <iosfwd>

// Compact invariant suite behind the `selftest` CLI command. Prints one
// PASS/FAIL line per check; returns true iff everything passed.

namespace biterr::selftest {

bool run(std::ostream& out);

}  // namespace biterr::selftest
