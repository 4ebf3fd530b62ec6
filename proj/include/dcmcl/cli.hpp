#pragma once

namespace dcmcl {

// gen-data | train | evaluate | decode | distill | ablate | gradcheck
// Returns 0 on success, 1 on usage errors, 2 on runtime failures.
int run(int argc, const char* const* argv);

}  // namespace dcmcl
